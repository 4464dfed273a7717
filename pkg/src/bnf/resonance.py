"""Fibered Laplacian symbol, diffraction hyperplanes and fattened resonant sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._pool import parallel_map
from .errors import RationalDirection
from .potential import IRRATIONAL_TOL, WindingMatrix, integer_ball

SAMPLE_CHUNK = 8192


@dataclass(frozen=True)
class ResonanceParams:
    """Fattening strength R, exponent s0 and frequency truncation n_cut of ℛ_R^n."""

    R: float
    s0: float
    n_cut: int

    def __post_init__(self):
        if not self.R >= 1:
            raise ValueError(f"R must be >= 1, got {self.R}")
        if int(self.n_cut) != self.n_cut or self.n_cut < 1:
            raise ValueError(f"n_cut must be an integer >= 1, got {self.n_cut}")
        object.__setattr__(self, "n_cut", int(self.n_cut))

    def threshold(self, xi) -> np.ndarray:
        """R⁻¹|ξ|^{−s0} for a stack of frequencies."""
        r = np.linalg.norm(np.atleast_2d(xi), axis=1)
        return r ** (-self.s0) / self.R


def _as_k(F: WindingMatrix, k) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.shape[0] != F.d:
        raise ValueError(f"fiber k must have {F.d} components, got {k.shape[0]}")
    return k


def fibered_symbol(F: WindingMatrix, k, xi):
    """σ_k(ξ) = |Fξ|² + 2k·Fξ; accepts one ξ or a (P, M) stack."""
    k = _as_k(F, k)
    fx = F.apply(xi)
    out = np.sum(fx * fx, axis=-1) + 2.0 * (fx @ k)
    return out[()] if np.ndim(out) == 0 else out


def hyperplane_distance(F: WindingMatrix, k, xi) -> float:
    """Distance from k to P_ξ = {k' : |Fξ + k'| = |k'|}."""
    k = _as_k(F, k)
    fx = F.apply(xi)
    n = float(np.linalg.norm(fx))
    if n < IRRATIONAL_TOL:
        raise RationalDirection(np.asarray(xi), n)
    return abs(float(k @ fx) / n + 0.5 * n)


class ResonanceTable:
    """Precomputed frequencies 0 < |ξ| ≤ n_cut with their Fξ and thresholds."""

    def __init__(self, F: WindingMatrix, params: ResonanceParams):
        self.F = F
        self.params = params
        self.xi = integer_ball(F.M, params.n_cut)
        self.fx = F.apply(self.xi)
        self.fx2 = np.sum(self.fx**2, axis=1)
        self.thr = params.threshold(self.xi) if len(self.xi) else np.zeros(0)

    def symbols(self, ks) -> np.ndarray:
        ks = np.atleast_2d(np.asarray(ks, dtype=float))
        return self.fx2[None, :] + 2.0 * ks @ self.fx.T

    def mask(self, ks) -> np.ndarray:
        """Resonance flag for each row of ks (shape (P, d))."""
        if len(self.xi) == 0:
            return np.zeros(np.atleast_2d(ks).shape[0], dtype=bool)
        return np.any(np.abs(self.symbols(ks)) < self.thr[None, :], axis=1)

    def offending(self, k):
        """First resonant ξ (lexicographic) at fiber k, with its symbol, or None."""
        if len(self.xi) == 0:
            return None
        s = self.symbols(k)[0]
        hit = np.abs(s) < self.thr
        if not np.any(hit):
            return None
        i = int(np.argmax(hit))
        return self.xi[i], float(s[i])


def is_resonant(F: WindingMatrix, params: ResonanceParams, k) -> bool:
    """True iff |σ_k(ξ)| < R⁻¹|ξ|^{−s0} for some 0 < |ξ| ≤ n_cut (open set)."""
    return bool(ResonanceTable(F, params).mask(_as_k(F, k)[None, :])[0])


def _count_chunk(args) -> tuple[int, int]:
    F, params, kappa, seed, index, size = args
    ss = np.random.SeedSequence(seed).spawn(index + 1)[index]
    rng = np.random.Generator(np.random.PCG64(ss))
    table = ResonanceTable(F, params)
    got: list[np.ndarray] = []
    n = 0
    while n < size:
        pts = rng.uniform(-kappa, kappa, size=(2 * (size - n) + 16, F.d))
        pts = pts[np.sum(pts**2, axis=1) < kappa**2][: size - n]
        got.append(pts)
        n += len(pts)
    pts = np.vstack(got)
    return int(np.count_nonzero(table.mask(pts))), size


def resonant_fraction(F: WindingMatrix, params: ResonanceParams, kappa: float, samples: int,
                      seed: int = 0, jobs: int | None = 1) -> tuple[float, float]:
    """Monte-Carlo estimate of |ℛ_R^{n_cut} ∩ B_κ| / |B_κ| and its 95% binomial half-width.

    Samples are drawn uniformly in B_κ by rejection from the bounding box,
    using PCG64 streams derived per fixed-size chunk from ``seed``.  The
    count reduction is an integer sum, so the result is independent of
    ``jobs``.
    """
    if samples < 1000:
        raise ValueError("resonant_fraction needs at least 1000 samples")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    sizes = [SAMPLE_CHUNK] * (samples // SAMPLE_CHUNK)
    if samples % SAMPLE_CHUNK:
        sizes.append(samples % SAMPLE_CHUNK)
    tasks = [(F, params, float(kappa), int(seed), i, s) for i, s in enumerate(sizes)]
    counts = parallel_map(_count_chunk, tasks, jobs)
    hits = sum(c for c, _ in counts)
    p = hits / samples
    return p, 1.96 * float(np.sqrt(max(p * (1 - p), 0.0) / samples))


def guard_default(params: ResonanceParams, ell: int, K: float) -> float:
    """Default small-divisor floor 1e-8·R⁻¹·(ℓK)^{−s0}."""
    scale = max(ell * K, 1.0)
    return 1e-8 / params.R * scale ** (-params.s0)


__all__ = [
    "ResonanceParams", "ResonanceTable", "fibered_symbol", "hyperplane_distance",
    "is_resonant", "resonant_fraction", "guard_default",
]
