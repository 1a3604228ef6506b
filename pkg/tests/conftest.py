import os

# Keep BLAS single-threaded so timing-sensitive checks measure one core.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from pathlib import Path

import numpy as np
import pytest

from hbrd.model import MseDiag, ProblemInstance, ScaledIdentity, Trace, canonicalize

INSTANCE_DIR = Path(__file__).resolve().parent.parent / "instances"


def rand_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def rand_spd(rng: np.random.Generator, n: int, lo: float = 0.2, hi: float = 2.0) -> np.ndarray:
    q = rand_orthogonal(rng, n)
    lam = rng.uniform(lo, hi, size=n)
    return q @ np.diag(lam) @ q.T


def random_diag_mse_instance(rng: np.random.Generator, k: int):
    """Random diagonal-conditional instance with feasible MSE targets."""
    k1 = rng.uniform(0.2, 2.0, size=k)
    k2 = rng.uniform(0.2, 2.0, size=k)
    inst = ProblemInstance(k_x_given_y1=np.diag(k1), k_x_given_y2=np.diag(k2))
    d1 = k1 * rng.uniform(0.25, 0.95, size=k)
    d2 = k2 * rng.uniform(0.25, 0.95, size=k)
    return inst, MseDiag(d1=d1, d2=d2)


def random_rotated_sc_instance(rng: np.random.Generator, k: int):
    """Random general-conditional instance with feasible scaled-identity targets."""
    k1 = rand_spd(rng, k)
    k2 = rand_spd(rng, k)
    inst = ProblemInstance(k_x_given_y1=k1, k_x_given_y2=k2)
    d1 = float(np.linalg.eigvalsh(k1)[0] * rng.uniform(0.25, 0.95))
    d2 = float(np.linalg.eigvalsh(k2)[0] * rng.uniform(0.25, 0.95))
    return inst, ScaledIdentity(d1=d1, d2=d2)


def random_trace_instance(rng: np.random.Generator, k: int, diagonal: bool = False):
    """Random instance with feasible trace budgets."""
    if diagonal:
        k1 = np.diag(rng.uniform(0.2, 2.0, size=k))
        k2 = np.diag(rng.uniform(0.2, 2.0, size=k))
    else:
        k1 = rand_spd(rng, k)
        k2 = rand_spd(rng, k)
    inst = ProblemInstance(k_x_given_y1=k1, k_x_given_y2=k2)
    d1 = float(np.linalg.eigvalsh(k1)[0] * rng.uniform(0.3, 0.9))
    d2 = float(np.linalg.eigvalsh(k2)[0] * rng.uniform(0.3, 0.9))
    return inst, Trace(d1=d1, d2=d2)


@pytest.fixture(scope="session")
def mixed_trace():
    """Bivariate mixed-ordering instance with trace budgets 0.15/0.15."""
    inst = ProblemInstance(
        k_x_given_y1=np.diag([4 / 9, 4 / 9]),
        k_x_given_y2=np.diag([4 / 17, 4 / 5]),
        k_x=np.eye(2),
    )
    spec = Trace(d1=0.15, d2=0.15)
    return inst, spec, canonicalize(inst, spec)


@pytest.fixture(scope="session")
def mismatched_mse():
    """Two mismatched-degraded components under componentwise MSE 0.2."""
    inst = ProblemInstance(
        k_x_given_y1=np.diag([1.0, 0.25]), k_x_given_y2=np.diag([0.25, 1.0])
    )
    spec = MseDiag(d1=np.array([0.2, 0.2]), d2=np.array([0.2, 0.2]))
    return inst, spec, canonicalize(inst, spec)


@pytest.fixture(scope="session")
def mixed_sc():
    inst = ProblemInstance(
        k_x_given_y1=np.diag([4 / 9, 4 / 9]), k_x_given_y2=np.diag([4 / 17, 4 / 5])
    )
    spec = ScaledIdentity(d1=0.15, d2=0.15)
    return inst, spec, canonicalize(inst, spec)
