"""
Shared fixtures: the reference link budget and the exactly-solvable regime.

The exact regime has no public packets and nu = 0, so every slot carries a
confidential frame and the closed forms need no ceiling approximation.
"""

import numpy as np
import pytest

from core.system_model import EveMode, EveScenario, ImageSpec, SystemConfig, TxParams


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def tx():
    return TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=6.0, L_s=10)


@pytest.fixture
def img():
    return ImageSpec(N_roi=60, N_bg=40, D_lim=40)


@pytest.fixture
def exact_tx():
    return TxParams(zeta=0.5, P_p=1000.0, P_s=1000.0, nu=0.0, L_s=10)


@pytest.fixture
def exact_img():
    return ImageSpec(N_roi=60, N_bg=0, D_lim=40)


@pytest.fixture
def nce():
    return EveScenario(mode=EveMode.NCE)


@pytest.fixture
def ce():
    return EveScenario(mode=EveMode.CE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
