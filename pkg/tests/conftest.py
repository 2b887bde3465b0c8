import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "fer",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("fer")


def random_so(n, rng):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def random_gaussian(L, rng, pure=False):
    """Random valid correlation matrix of L modes: Q (+) v_r J Q^T."""
    from fer_er.gaussian import canonical_block

    v = np.ones(L) if pure else rng.uniform(0, 1, size=L)
    Q = random_so(2 * L, rng)
    return Q @ canonical_block(v) @ Q.T, v, Q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
