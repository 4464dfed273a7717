import numpy as np
import pytest

from bnf.potential import WindingMatrix, cosine_potential, golden_winding, random_trigpoly
from bnf.resonance import ResonanceParams, ResonanceTable

PHI = (1 + np.sqrt(5)) / 2
TWOFREQ = WindingMatrix([[1.0, 0.0, (np.sqrt(5) - 1) / 2], [0.0, 1.0, np.sqrt(2) - 1]])


@pytest.fixture
def golden():
    return golden_winding()


@pytest.fixture
def cos_x():
    """V = cos(x) lifted to the golden torus: V̂(±(1,0)) = 1/2."""
    return cosine_potential([(1, 0)], [1.0], 2)


def random_instance(rng, M=2, K=2.0, ell=4, R=8.0, mean=True, normalize=True, n_cut=None):
    """Random Hermitian V with unit ℓ¹ coefficient mass and a fiber k ∉ ℛ_R^{n_cut}.

    M = 2 uses the golden winding in d = 1, M = 3 a two-dimensional winding.
    Non-resonance is |σ_k(ξ)| ≥ R⁻¹|ξ|^{−(M+3/2)} for 0 < |ξ| ≤ n_cut (default ⌈ℓK⌉).
    """
    F = golden_winding() if M == 2 else TWOFREQ
    V = random_trigpoly(rng, M, K, mean=mean)
    if normalize:
        V = V * (1.0 / V.l1())
    n = n_cut if n_cut is not None else int(np.ceil(ell * K))
    table = ResonanceTable(F, ResonanceParams(R, M + 1.5, n))
    for _ in range(10_000):
        k = rng.uniform(-0.5, 0.5, size=F.d)
        if not table.mask(k[None, :])[0]:
            return V, F, k
    raise RuntimeError("no non-resonant fiber found")
