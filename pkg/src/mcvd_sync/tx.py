"""Binary CSK transmitter: bit generation, jittered symbol durations, and the
per-symbol dual-type emission schedule.

Every symbol releases N_sync synchronization molecules at its start; a '1'
symbol additionally releases N_info information molecules at the same instant.
Symbol k lasts T(k) = (1 + psi_k) T_s with psi_k a zero-mean Gaussian of
variance sigma2_symbol, rejection-sampled into (-0.5, 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng

from .channel import MoleculeKind

_BITS_STREAM = 1
_DURATION_STREAM = 2


@dataclass(frozen=True)
class TxConfig:
    K: int
    T_s: float
    sigma2_symbol: float
    N_info: int
    N_sync: int
    p_one: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.T_s <= 0:
            raise ValueError("T_s must be positive")
        if not (0.0 <= self.sigma2_symbol < 0.25):
            raise ValueError("sigma2_symbol must lie in [0, 0.25)")
        if self.N_info < 1 or self.N_sync < 1:
            raise ValueError("molecule budgets must be >= 1")
        if not (0.0 <= self.p_one <= 1.0):
            raise ValueError("p_one must lie in [0, 1]")


@dataclass(frozen=True)
class EmissionEvent:
    time: float
    kind: MoleculeKind
    count: int


@dataclass(frozen=True)
class EmissionSchedule:
    events: tuple[EmissionEvent, ...]
    symbol_starts: np.ndarray
    durations: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbol_starts", np.asarray(self.symbol_starts, dtype=float))
        object.__setattr__(self, "durations", np.asarray(self.durations, dtype=float))
        self.symbol_starts.flags.writeable = False
        self.durations.flags.writeable = False

    @property
    def end_time(self) -> float:
        """End of the last symbol."""
        return float(self.symbol_starts[-1] + self.durations[-1])


def generate_symbols(cfg: TxConfig) -> np.ndarray:
    """K i.i.d. Bernoulli(p_one) bits as an int8 array, deterministic in seed."""
    rng = default_rng(SeedSequence(entropy=(cfg.seed, _BITS_STREAM)))
    return (rng.random(cfg.K) < cfg.p_one).astype(np.int8)


def draw_symbol_durations(cfg: TxConfig) -> np.ndarray:
    """Per-symbol durations (1 + psi_k) T_s, psi_k truncated-Gaussian.

    psi is drawn from N(0, sigma2_symbol) and rejection-resampled until it
    lands in (-0.5, 0.5); sigma2_symbol = 0 gives every duration exactly T_s.
    """
    if cfg.sigma2_symbol == 0.0:
        return np.full(cfg.K, cfg.T_s, dtype=float)
    rng = default_rng(SeedSequence(entropy=(cfg.seed, _DURATION_STREAM)))
    sigma = math.sqrt(cfg.sigma2_symbol)
    psi = rng.normal(0.0, sigma, size=cfg.K)
    bad = (psi <= -0.5) | (psi >= 0.5)
    while bad.any():
        psi[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
        bad = (psi <= -0.5) | (psi >= 0.5)
    return (1.0 + psi) * cfg.T_s


def build_emission_schedule(
    bits: np.ndarray, durations: np.ndarray, cfg: TxConfig
) -> EmissionSchedule:
    """Release events for a bit sequence: sync every symbol, info on '1' only.

    Sync and info releases of a symbol share the same instant (the symbol
    start).  Raises ValueError when lengths disagree with cfg.K.
    """
    bits = np.asarray(bits)
    durations = np.asarray(durations, dtype=float)
    if len(bits) != cfg.K or len(durations) != cfg.K:
        raise ValueError(
            f"expected {cfg.K} bits and durations, got {len(bits)} and {len(durations)}"
        )
    starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
    events: list[EmissionEvent] = []
    for k in range(cfg.K):
        t0 = float(starts[k])
        events.append(EmissionEvent(t0, MoleculeKind.SYNC, cfg.N_sync))
        if bits[k]:
            events.append(EmissionEvent(t0, MoleculeKind.INFO, cfg.N_info))
    return EmissionSchedule(events=tuple(events), symbol_starts=starts, durations=durations)


def schedule_to_csv(schedule: EmissionSchedule, path) -> None:
    """Reproducibility dump, columns release_time_s,type,count."""
    with open(path, "w", newline="") as fh:
        fh.write("release_time_s,type,count\n")
        for ev in schedule.events:
            fh.write(f"{ev.time:.10g},{ev.kind.value},{ev.count}\n")
