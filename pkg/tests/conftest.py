import numpy as np
import pytest

from parsimony import LatentVarProcess, autocov_from_spec, autocov_from_var
from parsimony.macromodels import (
    DmpCalibration,
    NkCalibration,
    RbcCalibration,
    solve_dmp,
    solve_nk,
    solve_rbc,
)
from parsimony.settings import PRESETS_DIR, read_document


def preset(name: str) -> dict:
    return read_document(PRESETS_DIR / f"{name}.yaml")


def random_truth(seed: int, n: int = 3) -> LatentVarProcess:
    """Independent AR(1) factors seen through a random H, so Gamma_1 is symmetric"""
    rng = np.random.default_rng(seed)
    persistence = rng.uniform(0.1, 0.9, n) * rng.choice([-1, 1], n)
    return LatentVarProcess(
        F=np.diag(persistence),
        H=rng.standard_normal((n, n)) + 2 * np.eye(n),
        Sigma=np.diag(rng.uniform(0.5, 1.5, n)),
    )


def random_invertible(seed: int, n: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + n * np.eye(n)


@pytest.fixture
def ar1_acv():
    return autocov_from_spec(preset("ar1")["process"])


@pytest.fixture
def white_noise_acv():
    return autocov_from_spec(preset("white-noise")["process"])


@pytest.fixture
def two_factor_acv():
    return autocov_from_spec(preset("two-factor")["process"])


@pytest.fixture
def example1_acv():
    return autocov_from_spec(preset("example-1")["process"])


@pytest.fixture
def example2_acv():
    return autocov_from_spec(preset("example-2")["process"])


@pytest.fixture
def random_acv():
    return autocov_from_var(random_truth(0))


@pytest.fixture(scope="session")
def nk_cal():
    return NkCalibration.from_dict(preset("nk-paper")["nk"])


@pytest.fixture(scope="session")
def nk_equilibrium(nk_cal):
    return solve_nk(nk_cal)


@pytest.fixture(scope="session")
def rbc_cal():
    return RbcCalibration.from_dict(preset("rbc-paper")["rbc"])


@pytest.fixture(scope="session")
def rbc_equilibria(rbc_cal):
    return solve_rbc(rbc_cal), solve_rbc(rbc_cal, mode="re")


@pytest.fixture(scope="session")
def dmp_cal():
    return DmpCalibration.from_dict(preset("dmp-paper")["dmp"])


@pytest.fixture(scope="session")
def dmp_equilibria(dmp_cal):
    return solve_dmp(dmp_cal), solve_dmp(dmp_cal, mode="re")
