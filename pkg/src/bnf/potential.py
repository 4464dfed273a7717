"""Quasiperiodic potentials V(x) = Ṽ(Fᵀx).

A potential is a sparse trigonometric polynomial on the torus 𝕋ᴹ
together with a d×M winding matrix F.  Frequencies ξ ∈ ℤᴹ are measured
with the Euclidean norm throughout.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import RationalDirection

DROP_TOL = 1e-30
IRRATIONAL_TOL = 1e-14


def integer_box(M: int, radius: int) -> np.ndarray:
    """All nonzero ξ ∈ ℤᴹ with |ξ|∞ ≤ radius, in lexicographic order."""
    r = int(radius)
    if r < 1:
        return np.zeros((0, M), dtype=np.int64)
    axis = np.arange(-r, r + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([axis] * M), indexing="ij"), axis=-1).reshape(-1, M)
    return grid[np.any(grid != 0, axis=1)]


def integer_ball(M: int, radius: float) -> np.ndarray:
    """All nonzero ξ ∈ ℤᴹ with Euclidean |ξ| ≤ radius, in lexicographic order."""
    box = integer_box(M, int(np.floor(radius)))
    if box.size == 0:
        return box
    return box[np.sqrt((box**2).sum(axis=1)) <= radius * (1 + 1e-12)]


class WindingMatrix:
    """Real d×M matrix F with d ≤ M, defining V(x) = Ṽ(Fᵀx)."""

    __slots__ = ("entries",)

    def __init__(self, entries, check_radius: int = 4):
        F = np.array(entries, dtype=float)
        if F.ndim == 1:
            F = F.reshape(1, -1)
        if F.ndim != 2:
            raise ValueError("winding matrix must be two-dimensional")
        d, M = F.shape
        if d < 1 or d > M:
            raise ValueError(f"winding matrix needs 1 <= d <= M, got d={d}, M={M}")
        F.setflags(write=False)
        object.__setattr__(self, "entries", F)
        if check_radius:
            self.check_irrational(check_radius)

    def __setattr__(self, name, value):
        raise AttributeError("WindingMatrix is immutable")

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]

    def apply(self, xi) -> np.ndarray:
        """Fξ for one frequency (shape (M,)) or a stack of them (shape (P, M))."""
        return np.asarray(xi, dtype=float) @ self.entries.T

    def check_irrational(self, radius: int) -> None:
        xi = integer_ball(self.M, radius)
        if xi.size == 0:
            return
        norms = np.linalg.norm(self.apply(xi), axis=1)
        bad = norms <= IRRATIONAL_TOL * np.linalg.norm(xi, axis=1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise RationalDirection(xi[i], norms[i])

    def __reduce__(self):
        return (WindingMatrix, (self.entries.copy(), 0))

    def __eq__(self, other):
        return isinstance(other, WindingMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"WindingMatrix({self.entries.tolist()!r})"


def _reduce(keys: np.ndarray, values: np.ndarray, M: int):
    """Sum values sharing a key; return lexicographically sorted unique keys."""
    if keys.shape[0] == 0:
        return np.zeros((0, M), dtype=np.int64), np.zeros(0, dtype=complex)
    lo = keys.min(axis=0)
    span = keys.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) >= 2.0**62:
        # too wide for a packed key; fall back to row-wise unique
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    else:
        stride = np.ones(M, dtype=np.int64)
        for i in range(M - 2, -1, -1):
            stride[i] = stride[i + 1] * span[i + 1]
        codes = (keys - lo) @ stride
        _, first, inv = np.unique(codes, return_index=True, return_inverse=True)
        uniq = keys[first]
    inv = inv.ravel()
    n = uniq.shape[0]
    re = np.bincount(inv, weights=values.real, minlength=n)
    im = np.bincount(inv, weights=values.imag, minlength=n)
    return uniq, re + 1j * im


class TrigPolynomial:
    """Sparse complex Fourier coefficients on ℤᴹ.

    Keys are stored as a lexicographically sorted integer array and
    coefficients with modulus at most ``DROP_TOL`` are discarded.
    Instances are immutable.
    """

    __slots__ = ("M", "keys", "values", "_lookup")

    def __init__(self, coeffs: Mapping | None = None, M: int | None = None):
        coeffs = dict(coeffs or {})
        if M is None:
            if not coeffs:
                raise ValueError("M is required for an empty polynomial")
            M = len(next(iter(coeffs)))
        if coeffs:
            keys = np.array([tuple(k) for k in coeffs], dtype=np.int64).reshape(-1, M)
            values = np.array(list(coeffs.values()), dtype=complex)
        else:
            keys = np.zeros((0, M), dtype=np.int64)
            values = np.zeros(0, dtype=complex)
        self._init(keys, values, M, reduce=True)

    def _init(self, keys, values, M, reduce):
        if reduce:
            keys, values = _reduce(keys, values, M)
        keep = np.abs(values) > DROP_TOL
        keys = np.ascontiguousarray(keys[keep])
        values = np.ascontiguousarray(values[keep])
        keys.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "M", int(M))
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_lookup", None)

    @classmethod
    def from_arrays(cls, keys, values, M: int | None = None, reduce: bool = True) -> "TrigPolynomial":
        keys = np.asarray(keys, dtype=np.int64)
        if M is None:
            M = keys.shape[1]
        keys = keys.reshape(-1, M)
        obj = cls.__new__(cls)
        obj._init(keys, np.asarray(values, dtype=complex).ravel(), M, reduce)
        return obj

    @classmethod
    def zero(cls, M: int) -> "TrigPolynomial":
        return cls({}, M=M)

    @classmethod
    def constant(cls, c, M: int) -> "TrigPolynomial":
        return cls({(0,) * M: c}, M=M)

    def __setattr__(self, name, value):
        raise AttributeError("TrigPolynomial is immutable")

    # -- inspection -------------------------------------------------------

    def __len__(self):
        return self.keys.shape[0]

    @property
    def coeffs(self) -> dict:
        return {tuple(int(v) for v in k): complex(c) for k, c in zip(self.keys, self.values)}

    def coeff(self, xi) -> complex:
        if self._lookup is None:
            object.__setattr__(self, "_lookup", self.coeffs)
        return self._lookup.get(tuple(int(v) for v in xi), 0j)

    __getitem__ = coeff

    @property
    def mean(self) -> complex:
        return self.coeff((0,) * self.M)

    @property
    def support_radius(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sqrt((self.keys**2).sum(axis=1)).max())

    def norm(self) -> float:
        """ℓ² norm of the coefficients (= L²(𝕋ᴹ) norm with normalized measure)."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if len(self) else 0.0

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """coeff(−ξ) == conj(coeff(ξ)) for every stored ξ, to relative rtol."""
        if len(self) == 0:
            return True
        lookup = self.coeffs
        scale = self.max_abs()
        for k, c in lookup.items():
            partner = lookup.get(tuple(-v for v in k), 0j)
            if abs(partner - c.conjugate()) > rtol * scale:
                return False
        return True

    # -- algebra ----------------------------------------------------------

    def _check(self, other):
        if self.M != other.M:
            raise ValueError(f"torus dimension mismatch: {self.M} vs {other.M}")

    def __add__(self, other):
        if not isinstance(other, TrigPolynomial):
            return self + TrigPolynomial.constant(other, self.M)
        self._check(other)
        return TrigPolynomial.from_arrays(
            np.vstack([self.keys, other.keys]), np.concatenate([self.values, other.values]), self.M
        )

    __radd__ = __add__

    def __neg__(self):
        return TrigPolynomial.from_arrays(self.keys, -self.values, self.M, reduce=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, TrigPolynomial):
            return self.convolve(c)
        return TrigPolynomial.from_arrays(self.keys, self.values * complex(c), self.M, reduce=False)

    __rmul__ = __mul__

    def convolve(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Coefficients of the pointwise product of the two fields."""
        self._check(other)
        if len(self) == 0 or len(other) == 0:
            return TrigPolynomial.zero(self.M)
        keys = (self.keys[:, None, :] + other.keys[None, :, :]).reshape(-1, self.M)
        vals = (self.values[:, None] * other.values[None, :]).ravel()
        return TrigPolynomial.from_arrays(keys, vals, self.M)

    def project(self) -> "TrigPolynomial":
        """Π: drop the mean mode ξ = 0."""
        keep = np.any(self.keys != 0, axis=1)
        return TrigPolynomial.from_arrays(self.keys[keep], self.values[keep], self.M, reduce=False)

    def with_values(self, values) -> "TrigPolynomial":
        """Same keys, new coefficients (used for diagonal Fourier multipliers)."""
        return TrigPolynomial.from_arrays(self.keys, values, self.M, reduce=False)

    def conj_reflect(self) -> "TrigPolynomial":
        """Coefficients of the complex conjugate field."""
        return TrigPolynomial.from_arrays(-self.keys, np.conj(self.values), self.M)

    def __reduce__(self):
        return (TrigPolynomial.from_arrays, (self.keys.copy(), self.values.copy(), self.M, False))

    def __eq__(self, other):
        return (
            isinstance(other, TrigPolynomial)
            and self.M == other.M
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.M, self.keys.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"TrigPolynomial({self.coeffs!r}, M={self.M})"


def evaluate(V: TrigPolynomial, F: WindingMatrix, x, omega=None):
    """V(x) = Σ_ξ V̂(ξ) exp(i(Fξ)·x), optionally translated on the torus by ω.

    ``x`` may be a single d-vector or an array of shape (..., d).
    """
    x = np.asarray(x, dtype=float)
    if F.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if len(V) == 0:
        return np.zeros(x.shape[:-1], dtype=complex)[()]
    phase = x @ F.apply(V.keys).T
    if omega is not None:
        phase = phase + V.keys @ np.asarray(omega, dtype=float)
    out = np.exp(1j * phase) @ V.values
    return out[()] if np.ndim(out) == 0 else out


def frequency_cutoff(V: TrigPolynomial, K: float) -> TrigPolynomial:
    """Ṽ_K: keep the coefficients with |ξ| ≤ K."""
    if K < 0:
        raise ValueError("cutoff K must be non-negative")
    r = np.sqrt((V.keys**2).sum(axis=1))
    keep = r <= K
    return TrigPolynomial.from_arrays(V.keys[keep], V.values[keep], V.M, reduce=False)


def gevrey_tail(V: TrigPolynomial, K: float) -> float:
    """ℓ¹ mass of the coefficients with |ξ| > K."""
    if K < 0:
        raise ValueError("cutoff K must be non-negative")
    r = np.sqrt((V.keys**2).sum(axis=1))
    return float(np.abs(V.values[r > K]).sum())


def diophantine_scan(F: WindingMatrix, r0: float, N: int) -> float:
    """min over 0 < |ξ|∞ ≤ N of |Fξ|·|ξ|^r0, an empirical lower estimate of 1/C₀.

    Raises RationalDirection when some |Fξ| falls below 1e-14.
    """
    if N < 1:
        raise ValueError("scan radius N must be >= 1")
    xi = integer_box(F.M, N)
    fx = np.linalg.norm(F.apply(xi), axis=1)
    bad = fx < IRRATIONAL_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RationalDirection(xi[i], fx[i])
    return float(np.min(fx * np.linalg.norm(xi, axis=1) ** r0))


# -- text formats -----------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps_trigpoly(V: TrigPolynomial) -> str:
    lines = [f"trigpoly M={V.M}"]
    for k, c in zip(V.keys, V.values):
        lines.append(" ".join([*(str(int(v)) for v in k), _fmt(c.real), _fmt(c.imag)]))
    return "\n".join(lines) + "\n"


def loads_trigpoly(text: str) -> TrigPolynomial:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or not rows[0].startswith("trigpoly"):
        raise ValueError("missing 'trigpoly M=<int>' header")
    header = dict(tok.split("=", 1) for tok in rows[0].split()[1:])
    M = int(header["M"])
    coeffs: dict = {}
    for r in rows[1:]:
        parts = r.split()
        if len(parts) != M + 2:
            raise ValueError(f"expected {M + 2} fields, got {len(parts)}: {r!r}")
        key = tuple(int(p) for p in parts[:M])
        coeffs[key] = coeffs.get(key, 0j) + complex(float(parts[M]), float(parts[M + 1]))
    return TrigPolynomial(coeffs, M=M)


def dumps_winding(F: WindingMatrix) -> str:
    lines = [f"winding d={F.d} M={F.M}"]
    lines += [" ".join(_fmt(v) for v in row) for row in F.entries]
    return "\n".join(lines) + "\n"


def loads_winding(text: str, check_radius: int = 4) -> WindingMatrix:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or not rows[0].startswith("winding"):
        raise ValueError("missing 'winding d=<int> M=<int>' header")
    header = dict(tok.split("=", 1) for tok in rows[0].split()[1:])
    d, M = int(header["d"]), int(header["M"])
    body = [[float(v) for v in r.split()] for r in rows[1:]]
    if len(body) != d or any(len(r) != M for r in body):
        raise ValueError(f"winding body must be {d} rows of {M} reals")
    return WindingMatrix(body, check_radius=check_radius)


def read_trigpoly(path) -> TrigPolynomial:
    return loads_trigpoly(Path(path).read_text())


def write_trigpoly(V: TrigPolynomial, path) -> None:
    Path(path).write_text(dumps_trigpoly(V))


def read_winding(path, check_radius: int = 4) -> WindingMatrix:
    return loads_winding(Path(path).read_text(), check_radius=check_radius)


def write_winding(F: WindingMatrix, path) -> None:
    Path(path).write_text(dumps_winding(F))


def cosine_potential(modes: Iterable, amplitudes: Iterable, M: int) -> TrigPolynomial:
    """Σ a_j cos(ω_j·θ) as a Hermitian trigonometric polynomial."""
    coeffs: dict = {}
    for w, a in zip(modes, amplitudes):
        w = tuple(int(v) for v in w)
        for key in (w, tuple(-v for v in w)):
            coeffs[key] = coeffs.get(key, 0j) + 0.5 * a
    return TrigPolynomial(coeffs, M=M)


def golden_winding() -> WindingMatrix:
    return WindingMatrix([[1.0, (1.0 + np.sqrt(5.0)) / 2.0]])


def random_trigpoly(rng: np.random.Generator, M: int, K: float, n_modes: int | None = None,
                    hermitian: bool = True, mean: bool = True) -> TrigPolynomial:
    """Random polynomial supported in |ξ| ≤ K (test and sweep helper)."""
    ball = integer_ball(M, K)
    half = [tuple(k) for k in ball if tuple(k) > tuple(-v for v in k)]
    if n_modes is not None and n_modes < len(half):
        idx = rng.choice(len(half), size=n_modes, replace=False)
        half = [half[i] for i in sorted(idx)]
    coeffs: dict = {}
    for k in half:
        c = complex(rng.normal(), rng.normal()) / np.sqrt(2.0)
        coeffs[k] = c
        coeffs[tuple(-v for v in k)] = c.conjugate() if hermitian else complex(rng.normal(), rng.normal())
    if mean:
        coeffs[(0,) * M] = complex(rng.normal(), 0.0 if hermitian else rng.normal())
    return TrigPolynomial(coeffs, M=M)


__all__ = [
    "TrigPolynomial", "WindingMatrix", "evaluate", "frequency_cutoff", "gevrey_tail",
    "diophantine_scan", "integer_ball", "integer_box", "dumps_trigpoly", "loads_trigpoly",
    "dumps_winding", "loads_winding", "read_trigpoly", "write_trigpoly", "read_winding",
    "write_winding", "cosine_potential", "golden_winding", "random_trigpoly",
]
