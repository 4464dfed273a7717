"""Periodic simulation box: physical grid states and discrete Fourier profiles.

Conventions on a box [0, L)ᵈ with N points per axis:

* nodes x_j = j·L/N, box centre x_c = L/2;
* modes k ∈ (2π/L)ℤᵈ in numpy FFT order;
* u(x) = L^{−d/2} Σ_k a_k e^{ik·x}, so Σ|a_k|² equals the continuum L² norm.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GridMismatch

MAGIC = b"BNF1"


def _check_box(L: float, N: int, d: int):
    if not L > 0:
        raise ValueError(f"box length must be positive, got {L}")
    if N < 2 or N & (N - 1):
        raise ValueError(f"grid size must be a power of two, got {N}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")


def wavenumbers(L: float, N: int) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(N, d=L / N)


def mode_grid(L: float, N: int, d: int) -> np.ndarray:
    """Array of shape (N,)*d + (d,) holding k at every FFT-ordered index."""
    k1 = wavenumbers(L, N)
    return np.stack(np.meshgrid(*([k1] * d), indexing="ij"), axis=-1)


def node_grid(L: float, N: int, d: int) -> np.ndarray:
    """Array of shape (N,)*d + (d,) holding the node coordinates."""
    x1 = np.arange(N) * (L / N)
    return np.stack(np.meshgrid(*([x1] * d), indexing="ij"), axis=-1)


def kinetic_symbol(L: float, N: int, d: int) -> np.ndarray:
    return np.sum(mode_grid(L, N, d) ** 2, axis=-1)


@dataclass(frozen=True)
class GridState:
    L: float
    N: int
    d: int
    values: np.ndarray
    t: float = 0.0
    contaminated: bool = False

    def __post_init__(self):
        _check_box(self.L, self.N, self.d)
        if self.values.shape != (self.N,) * self.d:
            raise ValueError(f"values shape {self.values.shape} does not match N={self.N}, d={self.d}")

    @property
    def cell(self) -> float:
        return (self.L / self.N) ** self.d

    def norm(self) -> float:
        """Continuum L² norm."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell))

    def same_grid(self, other: "GridState") -> None:
        if (self.L, self.N, self.d) != (other.L, other.N, other.d):
            raise GridMismatch(f"grids differ: {(self.L, self.N, self.d)} vs {(other.L, other.N, other.d)}")

    def with_values(self, values, **kw) -> "GridState":
        return replace(self, values=values, **kw)


@dataclass(frozen=True)
class SpectralProfile:
    """Amplitudes a_k on the box's discrete modes (FFT order).

    ``nonresonant`` carries the (params, radius) used by project_nonresonant,
    ``removed_mass`` the squared ℓ² mass that projection discarded.
    """

    L: float
    N: int
    d: int
    amplitudes: np.ndarray
    nonresonant: tuple | None = None
    removed_mass: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _check_box(self.L, self.N, self.d)
        if self.amplitudes.shape != (self.N,) * self.d:
            raise ValueError("amplitude array does not match the box")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def modes(self) -> np.ndarray:
        return mode_grid(self.L, self.N, self.d)

    def support(self) -> list:
        """FFT indices of nonzero amplitudes, lexicographically sorted."""
        idx = np.argwhere(self.amplitudes != 0)
        return [tuple(int(v) for v in row) for row in idx]

    def mode_at(self, index) -> np.ndarray:
        k1 = wavenumbers(self.L, self.N)
        return np.array([k1[i] for i in index])

    def with_amplitudes(self, amplitudes, **kw) -> "SpectralProfile":
        return replace(self, amplitudes=amplitudes, **kw)


def to_grid(p: SpectralProfile, t: float = 0.0) -> GridState:
    """Physical field u(x_j) = L^{−d/2} Σ_k a_k e^{ik·x_j}."""
    scale = p.N**p.d / p.L ** (p.d / 2)
    return GridState(p.L, p.N, p.d, np.fft.ifftn(p.amplitudes) * scale, t)


def from_grid(u: GridState) -> SpectralProfile:
    scale = u.L ** (u.d / 2) / u.N**u.d
    return SpectralProfile(u.L, u.N, u.d, np.fft.fftn(u.values) * scale)


# -- binary format ------------------------------------------------------------
# magic "BNF1", then int64 d, int64 N, float64 L, then (profiles only) the
# int64 FFT mode indices of one axis, then row-major complex128 values.
# Everything little-endian.

def _header(d, N, L) -> bytes:
    return MAGIC + struct.pack("<qqd", d, N, L)


def _body(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<c16").tobytes(order="C")


def dumps_grid(u: GridState) -> bytes:
    return _header(u.d, u.N, u.L) + _body(u.values)


def dumps_profile(p: SpectralProfile) -> bytes:
    idx = np.fft.fftfreq(p.N, d=1.0 / p.N).astype("<i8")
    return _header(p.d, p.N, p.L) + idx.tobytes() + _body(p.amplitudes)


def _parse_header(buf: bytes):
    if buf[:4] != MAGIC:
        raise ValueError("not a BNF1 file")
    d, N, L = struct.unpack("<qqd", buf[4:28])
    return int(d), int(N), float(L), 28


def loads_grid(buf: bytes) -> GridState:
    d, N, L, off = _parse_header(buf)
    vals = np.frombuffer(buf[off:], dtype="<c16")
    if vals.size != N**d:
        raise ValueError("BNF1 grid payload has the wrong length")
    return GridState(L, N, d, vals.reshape((N,) * d).astype(complex))


def loads_profile(buf: bytes) -> SpectralProfile:
    d, N, L, off = _parse_header(buf)
    idx = np.frombuffer(buf[off:off + 8 * N], dtype="<i8")
    if not np.array_equal(idx, np.fft.fftfreq(N, d=1.0 / N)):
        raise ValueError("BNF1 profile mode-index header does not match N")
    vals = np.frombuffer(buf[off + 8 * N:], dtype="<c16")
    if vals.size != N**d:
        raise ValueError("BNF1 profile payload has the wrong length")
    return SpectralProfile(L, N, d, vals.reshape((N,) * d).astype(complex))


def write_grid(u: GridState, path) -> None:
    Path(path).write_bytes(dumps_grid(u))


def read_grid(path) -> GridState:
    return loads_grid(Path(path).read_bytes())


def write_profile(p: SpectralProfile, path) -> None:
    Path(path).write_bytes(dumps_profile(p))


def read_profile(path) -> SpectralProfile:
    return loads_profile(Path(path).read_bytes())
