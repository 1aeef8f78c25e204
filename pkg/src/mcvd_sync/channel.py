"""Closed-form first-hit channel for a point source and an absorbing sphere.

A point transmitter sits at distance d from the surface of a fully absorbing
spherical receiver of radius r, in an unbounded 3-D fluid with diffusion
coefficient D (no drift).  The first-hit statistics are

    hitting rate      f(t) = r/(d+r) * d / sqrt(4 pi D t^3) * exp(-d^2/(4 D t))
    hit fraction      F(t) = r/(d+r) * erfc(d / sqrt(4 D t))
    mean peak time    t_peak = d^2 / (6 D)

F saturates at p_hit = r/(d+r) < 1: in 3-D a molecule escapes to infinity with
probability d/(d+r), so "never hits" is a first-class outcome.

Units package-wide: micrometers, seconds, um^2/s.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv


class MoleculeKind(enum.Enum):
    INFO = "info"
    SYNC = "sync"


@dataclass(frozen=True)
class ChannelGeometry:
    """Receiver radius r and transmitter-to-surface distance d, micrometers."""

    r: float
    d: float

    def __post_init__(self) -> None:
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"receiver radius must be positive, got {self.r}")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise ValueError(f"transmitter distance must be positive, got {self.d}")

    @property
    def p_hit(self) -> float:
        """Probability that a released molecule is ever absorbed, r/(d+r)."""
        return self.r / (self.d + self.r)


@dataclass(frozen=True)
class MoleculeSpec:
    """A molecule type and its diffusion coefficient (um^2/s)."""

    kind: MoleculeKind
    D: float

    def __post_init__(self) -> None:
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"diffusion coefficient must be positive, got {self.D}")


def _check_diffusion(D: float) -> None:
    if not (D > 0 and math.isfinite(D)):
        raise ValueError(f"diffusion coefficient must be positive, got {D}")


def hitting_rate(geom: ChannelGeometry, D: float, t):
    """First-hit rate f(t) in 1/s.  Scalar or ndarray t; f(0) = 0 exactly.

    Raises ValueError for negative or non-finite t.
    """
    _check_diffusion(D)
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise ValueError("t must be finite and >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    tp = t_arr[pos]
    out[pos] = (
        geom.p_hit
        * geom.d
        / np.sqrt(4.0 * np.pi * D * tp**3)
        * np.exp(-geom.d**2 / (4.0 * D * tp))
    )
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def hitting_fraction(geom: ChannelGeometry, D: float, t):
    """Fraction of released molecules absorbed by time t.  F(0) = 0 exactly.

    Monotone non-decreasing, supremum r/(d+r).  Raises ValueError for
    negative t.
    """
    _check_diffusion(D)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    out[pos] = geom.p_hit * erfc(geom.d / np.sqrt(4.0 * D * t_arr[pos]))
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def peak_time(geom: ChannelGeometry, D: float) -> float:
    """Time of the hitting-rate maximum, d^2/(6 D)."""
    _check_diffusion(D)
    return geom.d**2 / (6.0 * D)


def sample_hit_time(geom: ChannelGeometry, D: float, u: float) -> float | None:
    """Exact inverse-CDF draw of the first-hit time from a uniform u in (0,1).

    Returns None when the molecule never reaches the receiver, which happens
    iff u >= p_hit = r/(d+r).  Otherwise returns the t solving F(t) = u, i.e.

        t = d^2 / (4 D erfcinv(u / p_hit)^2)

    Raises ValueError for u outside (0,1).
    """
    _check_diffusion(D)
    if not (0.0 < u < 1.0):
        raise ValueError(f"u must lie strictly inside (0,1), got {u}")
    p = geom.p_hit
    if u >= p:
        return None
    return float(geom.d**2 / (4.0 * D * erfcinv(u / p) ** 2))


def hit_times_from_uniforms(
    geom: ChannelGeometry, D: float, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized counterpart of sample_hit_time.

    Returns (hit_mask, hit_times) where hit_times contains one entry per True
    in hit_mask; molecules with u >= p_hit simply do not appear (no sentinel
    values).
    """
    _check_diffusion(D)
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("uniforms must lie strictly inside (0,1)")
    p = geom.p_hit
    mask = u < p
    times = geom.d**2 / (4.0 * D * erfcinv(u[mask] / p) ** 2)
    return mask, times
