"""Rayleigh-Schrödinger jets (νⁿ_k, φⁿ_k) of the fibered operator −Δ_k + λV.

Everything lives in Fourier space on ℤᴹ, where −Δ_k is the diagonal
multiplier σ_k(ξ) = |Fξ|² + 2k·Fξ and V acts by sparse convolution.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CombinatorialLimit, MagnitudeOverflow, ResonantFiber
from .potential import TrigPolynomial, WindingMatrix
from .resonance import fibered_symbol

log = logging.getLogger(__name__)

OVERFLOW = 1e150
MAX_TREE_SIZE = 12
MAX_TREE_ORDER = 6
# used when no guard is supplied: only rejects exact (or rounding-level) zeros
DEFAULT_GUARD = 1e-13


@dataclass(frozen=True)
class Jet:
    """ℓ-jet at fiber k: ν⁰..ν^ℓ and φ⁰..φ^ℓ, plus the data it was built from."""

    k: np.ndarray
    order: int
    nus: tuple
    phis: tuple
    min_symbol: float
    max_coeff: float
    V: TrigPolynomial
    F: WindingMatrix
    mu: float = 0.0

    def __hash__(self):
        return hash((self.k.tobytes(), self.order, self.nus))


@dataclass(frozen=True)
class TaylorBloch:
    kappa: complex
    psi: TrigPolynomial
    lam: float


def _divide(rhs: TrigPolynomial, F: WindingMatrix, k, mu: float, guard: float | None):
    """rhs/(σ_k − iμ) on the nonzero modes of rhs; returns (quotient, min |σ|)."""
    if len(rhs) == 0:
        return rhs, np.inf
    sig = fibered_symbol(F, k, rhs.keys)
    smin = float(np.min(np.abs(sig)))
    if guard is not None and smin < guard:
        i = int(np.argmin(np.abs(sig)))
        raise ResonantFiber(rhs.keys[i].copy(), float(sig[i]), k)
    q = rhs.with_values(rhs.values / (sig - 1j * mu))
    if len(q) and q.max_abs() > OVERFLOW:
        raise MagnitudeOverflow(f"corrector coefficient {q.max_abs():.3e} exceeds {OVERFLOW:.0e}")
    return q, smin


def _check_real(nus, V: TrigPolynomial):
    if not V.is_hermitian():
        return
    for n, nu in enumerate(nus):
        if abs(nu.imag) > 1e-10 * (1 + abs(nu)):
            log.warning("Im nu^%d = %.3e for a real potential", n, nu.imag)


def _recurrence(V, F, k, ell, mu, guard) -> Jet:
    if ell < 0:
        raise ValueError("jet order must be >= 0")
    k = np.asarray(k, dtype=float).reshape(-1).copy()
    k.setflags(write=False)
    one = TrigPolynomial.constant(1.0, V.M)
    phis = [one]
    nus: list[complex] = []
    smin = np.inf
    for n in range(ell + 1):
        Vphi = V.convolve(phis[n])
        nus.append(complex(Vphi.mean))
        if n == ell:
            break
        rhs = -Vphi.project()
        for l in range(n):
            rhs = rhs + nus[l] * phis[n - l]
        nxt, s = _divide(rhs.project(), F, k, mu, guard)
        smin = min(smin, s)
        phis.append(nxt)
    _check_real(nus, V)
    biggest = max(p.max_abs() for p in phis)
    return Jet(k, ell, tuple(nus), tuple(phis), float(smin), float(biggest), V, F, float(mu))


def compute_jet(V: TrigPolynomial, F: WindingMatrix, k, ell: int, guard: float | None = None) -> Jet:
    """Corrector recurrence.

    ν^n = (Vφ^n)^(0) and, off the mean mode,
    φ^{n+1} = [−Π(Vφ^n) + Σ_{l<n} ν^l φ^{n−l}] / σ_k.
    Raises ResonantFiber if an inverted |σ_k(ξ)| falls below ``guard``
    (``DEFAULT_GUARD`` when omitted).
    """
    return _recurrence(V, F, k, ell, 0.0, DEFAULT_GUARD if guard is None else guard)


def compute_jet_regularized(V: TrigPolynomial, F: WindingMatrix, k, ell: int, mu: float) -> Jet:
    """Same recurrence with divisor σ_k − iμ; defined on resonant fibers too."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    return _recurrence(V, F, k, ell, float(mu), None)


def taylor_bloch(jet: Jet, lam: float) -> TaylorBloch:
    """κ = λ Σ λⁿνⁿ and ψ = Σ λⁿφⁿ."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    kappa = lam * sum(lam**n * nu for n, nu in enumerate(jet.nus))
    keys = np.vstack([p.keys for p in jet.phis])
    vals = np.concatenate([lam**n * p.values for n, p in enumerate(jet.phis)])
    psi = TrigPolynomial.from_arrays(keys, vals, jet.V.M)
    return TaylorBloch(complex(kappa), psi, float(lam))


def _eigendefect(V: TrigPolynomial, jet: Jet, lam: float) -> TrigPolynomial:
    ell, nu, phi = jet.order, jet.nus, jet.phis
    d = V.convolve(phi[ell]).project()
    for l in range(ell):
        d = d - nu[l] * phi[ell - l]
    tail = TrigPolynomial.zero(V.M)
    for n in range(1, ell + 1):
        for l in range(ell - n, ell):
            tail = tail + (lam ** (n + l - ell) * nu[l + 1]) * phi[n]
    return d - lam * tail


def eigendefect(jet: Jet, lam: float) -> TrigPolynomial:
    """𝔡 with (−Δ_k + λV)ψ = κψ + λ^{ℓ+1}𝔡 holding exactly."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return _eigendefect(jet.V, jet, lam)


def verify_eigen_identity(V: TrigPolynomial, F: WindingMatrix, jet: Jet, lam: float) -> float:
    """Relative ℓ² residual of (σ_k + λV)ψ − κψ − λ^{ℓ+1}𝔡.

    A zero left side gives the absolute residual, which is 0 for V = 0.
    """
    tb = taylor_bloch(jet, lam)
    psi = tb.psi
    sig = fibered_symbol(F, jet.k, psi.keys) if len(psi) else np.zeros(0)
    lhs = psi.with_values(sig * psi.values) + lam * V.convolve(psi)
    rhs = tb.kappa * psi + lam ** (jet.order + 1) * _eigendefect(V, jet, lam)
    diff = (lhs - rhs).norm()
    scale = lhs.norm()
    return diff / scale if scale > 0 else diff


# -- tree formulas (independent oracle) --------------------------------------

@lru_cache(maxsize=None)
def _trees(m: int, strict: bool) -> tuple:
    out = []

    def build(suffix, total):
        # suffix holds a_{j+1..m}; the next entry a_j may use up to m-j-total
        j = m - len(suffix)
        if j == 0:
            if not strict or total == m - 1:
                out.append(suffix)
            return
        for v in range(m - j - total + 1):
            build((v,) + suffix, total + v)

    build((), 0)
    return tuple(sorted(out))


def enumerate_trees(m: int, variant: str = "literal") -> list:
    """Index set 𝒯_m = {a ∈ ℕ^m : a_j + … + a_m ≤ m − j}, lexicographically sorted.

    ``variant="strict"`` additionally imposes |a| = m − 1, which leaves
    the Catalan-many rooted plane trees.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_TREE_SIZE:
        raise CombinatorialLimit(f"enumerate_trees limited to m <= {MAX_TREE_SIZE}, got {m}")
    if variant not in ("literal", "strict"):
        raise ValueError(f"unknown tree variant {variant!r}")
    return list(_trees(m, variant == "strict"))


def _compositions(total: int, parts: int):
    """All tuples in ℕ^parts summing to total."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


class _WordEvaluator:
    """Operator words G^{b+1}ΠV built with plain dict arithmetic.

    Kept deliberately separate from TrigPolynomial.convolve so the
    oracle shares no arithmetic with the recurrence.
    """

    def __init__(self, V: TrigPolynomial, F: WindingMatrix, k, guard: float):
        self.V = V.coeffs
        self.F = F
        self.k = np.asarray(k, dtype=float).reshape(-1)
        self.guard = guard
        self.zero = (0,) * V.M

    def sigma(self, xi) -> float:
        fx = self.F.entries @ np.asarray(xi, dtype=float)
        return float(fx @ fx + 2.0 * self.k @ fx)

    def times_V(self, f: dict) -> dict:
        out: dict = {}
        for a, ca in self.V.items():
            for b, cb in f.items():
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, 0j) + ca * cb
        return out

    def g_pi_v(self, f: dict, power: int) -> dict:
        """G^power Π V f."""
        out = {}
        for xi, c in self.times_V(f).items():
            if xi == self.zero:
                continue
            s = self.sigma(xi)
            if abs(s) < self.guard:
                raise ResonantFiber(np.array(xi), s, self.k)
            out[xi] = c / s**power
        return out

    def chain(self, bs) -> dict:
        """G^{b_1+1}ΠV ⋯ G^{b_c+1}ΠV applied to 1, rightmost factor first."""
        f = {self.zero: 1.0 + 0j}
        for b in reversed(bs):
            f = self.g_pi_v(f, b + 1)
        return f

    def expect_word(self, bs) -> complex:
        """𝔼[V G^{b_1+1}ΠV ⋯ G^{b_c+1}ΠV]."""
        return self.times_V(self.chain(bs)).get(self.zero, 0j)


def _tree_guard(guard):
    return DEFAULT_GUARD if guard is None else guard


def _nu_tree(ev: _WordEvaluator, n: int, strict: bool) -> complex:
    total = 0j
    for m in range(1, n + 2):
        sign = (-1) ** (n + 1 - m)
        for a in _trees(m, strict):
            for c in _compositions(n + 1 - m, m):
                prod = 1.0 + 0j
                for aj, cj in zip(a, c):
                    prod *= sum(ev.expect_word(b) for b in _compositions(aj, cj))
                    if prod == 0:
                        break
                total += sign * prod
    return total


def nu_tree_formula(V: TrigPolynomial, F: WindingMatrix, k, n: int, variant: str = "literal",
                    guard: float | None = None) -> complex:
    """νⁿ from the tree expansion over 𝒯_m (see ``enumerate_trees`` for variants)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > MAX_TREE_ORDER:
        raise CombinatorialLimit(f"tree formulas limited to n <= {MAX_TREE_ORDER}, got {n}")
    enumerate_trees(1, variant)
    ev = _WordEvaluator(V, F, k, _tree_guard(guard))
    return _nu_tree(ev, n, variant == "strict")


def phi_tree_formula(V: TrigPolynomial, F: WindingMatrix, k, n: int, variant: str = "literal",
                     guard: float | None = None) -> TrigPolynomial:
    """φⁿ = Σ_m (−1)^m Σ ν^{a_1}⋯ν^{a_ℓ'} G^{b_1+1}ΠV ⋯ G^{b_m+1}ΠV 1.

    The ν factors come from ``nu_tree_formula`` with the same variant.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > MAX_TREE_ORDER:
        raise CombinatorialLimit(f"tree formulas limited to n <= {MAX_TREE_ORDER}, got {n}")
    enumerate_trees(1, variant)
    if n == 0:
        return TrigPolynomial.constant(1.0, V.M)
    ev = _WordEvaluator(V, F, k, _tree_guard(guard))
    strict = variant == "strict"
    nus = [_nu_tree(ev, j, strict) for j in range(n)]
    acc: dict = {}
    for m in range(1, n + 1):
        for lp in range(0, n - m + 1):
            for a in _compositions(n - m - lp, lp):
                coef = (-1) ** m * np.prod([nus[j] for j in a]) if a else (-1) ** m
                if coef == 0:
                    continue
                for b in _compositions(lp, m):
                    for xi, c in ev.chain(b).items():
                        acc[xi] = acc.get(xi, 0j) + coef * c
    return TrigPolynomial(acc, M=V.M)


def nu_k_derivative(V: TrigPolynomial, F: WindingMatrix, k, n: int, j: int, h: float,
                    guard: float | None = None) -> np.ndarray:
    """Central finite-difference ∇_k^j νⁿ (gradient for j=1, Hessian for j=2)."""
    if j not in (1, 2):
        raise ValueError("derivative order j must be 1 or 2")
    if not h > 0:
        raise ValueError("step h must be positive")
    k = np.asarray(k, dtype=float).reshape(-1)
    d = k.shape[0]
    eye = np.eye(d) * h

    def nu(kk):
        return compute_jet(V, F, kk, n, guard).nus[n]

    if j == 1:
        return np.array([(nu(k + eye[i]) - nu(k - eye[i])) / (2 * h) for i in range(d)])
    hess = np.zeros((d, d), dtype=complex)
    centre = nu(k)
    for i in range(d):
        hess[i, i] = (nu(k + eye[i]) - 2 * centre + nu(k - eye[i])) / h**2
        for l in range(i + 1, d):
            v = (nu(k + eye[i] + eye[l]) - nu(k + eye[i] - eye[l])
                 - nu(k - eye[i] + eye[l]) + nu(k - eye[i] - eye[l])) / (4 * h**2)
            hess[i, l] = hess[l, i] = v
    return hess


__all__ = [
    "Jet", "TaylorBloch", "compute_jet", "compute_jet_regularized", "taylor_bloch",
    "eigendefect", "verify_eigen_identity", "enumerate_trees", "nu_tree_formula",
    "phi_tree_formula", "nu_k_derivative",
]
