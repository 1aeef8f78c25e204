"""Shared fixtures: the reference channel used across the suite and small helpers.
"""

import numpy as np
import pytest

from mcvd_sync.channel import ChannelGeometry, MoleculeKind, MoleculeSpec

# Reference parameters used throughout: receiver radius 2 um, transmitter
# distance 4 um, info/sync diffusion 79.4 / 158.8 um^2/s, symbol 380 ms,
# receiver sampling 10 us.
R_UM = 2.0
D_UM = 4.0
D_INFO = 79.4
D_SYNC = 158.8
T_S = 0.38
DELTA_T = 1e-5


@pytest.fixture(scope="session")
def geom() -> ChannelGeometry:
    return ChannelGeometry(r=R_UM, d=D_UM)


@pytest.fixture(scope="session")
def info_spec() -> MoleculeSpec:
    return MoleculeSpec(MoleculeKind.INFO, D_INFO)


@pytest.fixture(scope="session")
def sync_spec() -> MoleculeSpec:
    return MoleculeSpec(MoleculeKind.SYNC, D_SYNC)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20260811)
