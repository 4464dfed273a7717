import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnf.errors import RationalDirection
from bnf.potential import WindingMatrix, golden_winding
from bnf.resonance import (
    ResonanceParams, fibered_symbol, guard_default, hyperplane_distance, is_resonant,
    resonant_fraction,
)

F = golden_winding()
xi_st = st.tuples(st.integers(-6, 6), st.integers(-6, 6)).filter(any)
k_st = st.floats(-3, 3)


def test_params_validation():
    with pytest.raises(ValueError):
        ResonanceParams(0.5, 3.0, 2)
    with pytest.raises(ValueError):
        ResonanceParams(2.0, 3.0, 0)


class TestSymbol:
    def test_zero_frequency(self):
        assert fibered_symbol(F, [0.7], (0, 0)) == 0

    def test_k_zero_is_positive(self):
        assert fibered_symbol(F, [0.0], (1, -1)) == pytest.approx((1 - F.entries[0, 1]) ** 2)

    def test_hand_value(self):
        assert fibered_symbol(F, [0.3], (1, 0)) == pytest.approx(1.6, abs=1e-15)

    @given(xi_st, k_st)
    def test_definition(self, xi, k):
        fx = F.apply(xi)
        direct = float(np.sum((fx + k) ** 2) - k**2)
        assert fibered_symbol(F, [k], xi) == pytest.approx(direct, rel=1e-9, abs=1e-9)

    @given(xi_st, k_st)
    def test_reflection_sum(self, xi, k):
        neg = tuple(-v for v in xi)
        fx2 = float(np.sum(F.apply(xi) ** 2))
        total = fibered_symbol(F, [k], xi) + fibered_symbol(F, [k], neg)
        assert total == pytest.approx(2 * fx2, rel=1e-12)


class TestHyperplane:
    def test_on_plane(self):
        xi = (1, 0)
        k = [-0.5]
        assert hyperplane_distance(F, k, xi) == pytest.approx(0, abs=1e-15)
        assert is_resonant(F, ResonanceParams(1e12, 3.5, 1), k)

    def test_origin(self):
        xi = (2, -1)
        assert hyperplane_distance(F, [0.0], xi) == pytest.approx(np.linalg.norm(F.apply(xi)) / 2)

    @given(xi_st, k_st)
    @settings(max_examples=200)
    def test_tube_equivalence(self, xi, k):
        n = np.linalg.norm(F.apply(xi))
        lhs = abs(fibered_symbol(F, [k], xi))
        rhs = 2 * n * hyperplane_distance(F, [k], xi)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)

    def test_2d_equivalence(self):
        G = WindingMatrix([[1.0, 0.0, 0.618], [0.0, 1.0, 0.414]], check_radius=2)
        rng = np.random.default_rng(0)
        for _ in range(100):
            xi = tuple(rng.integers(-3, 4, 3))
            if not any(xi):
                continue
            k = rng.normal(size=2)
            lhs = abs(fibered_symbol(G, k, xi))
            rhs = 2 * np.linalg.norm(G.apply(xi)) * hyperplane_distance(G, k, xi)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_rational_direction(self):
        G = WindingMatrix([[1.0, 2.0]], check_radius=0)
        with pytest.raises(RationalDirection):
            hyperplane_distance(G, [0.1], (2, -1))


class TestIsResonant:
    def test_threshold_is_strict(self):
        params = ResonanceParams(4.0, 3.5, 1)
        # only |ξ| = 1 frequencies matter; put k where min |σ| = 1.6/R
        # σ(1,0) = 1 + 2k = 1.6/4 -> k = -0.3
        k = -0.3
        sig = [abs(fibered_symbol(F, [k], xi)) for xi in [(1, 0), (-1, 0), (0, 1), (0, -1)]]
        assert min(sig) == pytest.approx(0.4)
        assert not is_resonant(F, params, [k])

    def test_exact_boundary_not_resonant(self):
        G = WindingMatrix([[1.0]])
        params = ResonanceParams(2.0, 1.0, 1)
        # σ(ξ=1) = 1 + 2k = 0.5 exactly at k = -0.25
        assert fibered_symbol(G, [-0.25], (1,)) == 0.5
        assert not is_resonant(G, params, [-0.25])
        assert is_resonant(G, params, [-0.2500001])

    def test_set_inclusions(self):
        # ℛ_R shrinks as R grows and grows with n_cut
        rng = np.random.default_rng(5)
        for k in rng.uniform(-1.5, 1.5, 300):
            base = is_resonant(F, ResonanceParams(4.0, 3.5, 2), [k])
            if base:
                assert is_resonant(F, ResonanceParams(4.0, 3.5, 3), [k])
                assert is_resonant(F, ResonanceParams(2.0, 3.5, 2), [k])
            if is_resonant(F, ResonanceParams(8.0, 3.5, 2), [k]):
                assert base

    def test_tube_picture_single_frequency(self):
        params = ResonanceParams(3.0, 2.5, 1)
        G = WindingMatrix([[1.0]])
        rng = np.random.default_rng(8)
        for k in rng.uniform(-1, 1, 500):
            xi = (1,)
            n = 1.0
            width = 0.5 / params.R / n
            in_tube_p = hyperplane_distance(G, [k], xi) < width
            in_tube_m = hyperplane_distance(G, [k], (-1,)) < width
            assert is_resonant(G, params, [k]) == (in_tube_p or in_tube_m)


class TestFraction:
    def test_reproducible_and_job_independent(self):
        params = ResonanceParams(4.0, 3.5, 2)
        a = resonant_fraction(F, params, 2.0, 20_000, seed=3, jobs=1)
        b = resonant_fraction(F, params, 2.0, 20_000, seed=3, jobs=1)
        c = resonant_fraction(F, params, 2.0, 20_000, seed=3, jobs=3)
        assert a == b == c
        assert a != resonant_fraction(F, params, 2.0, 20_000, seed=4)

    def test_large_R(self):
        p, hw = resonant_fraction(F, ResonanceParams(1e6, 3.5, 2), 2.0, 10_000, seed=0)
        assert p < 1e-2
        assert hw >= 0

    def test_nondecreasing_in_ncut(self):
        a, _ = resonant_fraction(F, ResonanceParams(4.0, 3.5, 1), 2.0, 20_000, seed=1)
        b, _ = resonant_fraction(F, ResonanceParams(4.0, 3.5, 2), 2.0, 20_000, seed=1)
        assert b >= a

    def test_halving_ratio(self):
        fr = [resonant_fraction(F, ResonanceParams(R, 3.5, 2), 2.0, 50_000, seed=0)[0]
              for R in (1, 2, 4, 8)]
        for a, b in zip(fr, fr[1:]):
            assert 1.4 <= a / b <= 2.8

    def test_preconditions(self):
        params = ResonanceParams(2.0, 3.5, 2)
        with pytest.raises(ValueError):
            resonant_fraction(F, params, 1.0, 10)
        with pytest.raises(ValueError):
            resonant_fraction(F, params, 0.0, 5000)


def test_guard_default_scaling():
    p = ResonanceParams(8.0, 3.5, 4)
    assert guard_default(p, 2, 2.0) == pytest.approx(1e-8 / 8 * 4 ** -3.5)
