"""Initial data and the closed-form spectral flows on the simulation box.

* free flow: e^{−it|k|²}
* effective flow U: e^{−it(|k|² + Re κ_k)} on modes carrying a jet
* Bloch expansion W° and diagonal flow V: Σ_k a_k e^{ik·x} ψ_k(x), with or
  without the effective phase.

Jet-less modes that were masked as resonant keep the free phase and ψ ≡ 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._pool import parallel_map
from .errors import GridTooSmall, MissingJet, NumericalGuard
from .grid import GridState, SpectralProfile, kinetic_symbol, node_grid, to_grid, wavenumbers
from .jets import Jet, compute_jet, taylor_bloch, verify_eigen_identity
from .potential import TrigPolynomial, WindingMatrix
from .resonance import ResonanceParams, ResonanceTable

log = logging.getLogger(__name__)

AMPLITUDE_CUTOFF = 1e-12
IDENTITY_TOL = 1e-8
LAMBDA_REF = 0.1


def make_packet(k0, eps: float, envelope_width: float, L: float, N: int) -> SpectralProfile:
    """Unit-norm Gaussian packet ε^{d/2} e^{ik0·x} g(ε(x − x_c)) centred in the box.

    g(y) = (πw²)^{−d/4} exp(−|y|²/(2w²)) with w = envelope_width, so the
    Fourier width is ε/w.  Amplitudes below 1e-12 of the peak are zeroed.
    """
    k0 = np.atleast_1d(np.asarray(k0, dtype=float))
    d = k0.shape[0]
    if not eps > 0 or not envelope_width > 0:
        raise ValueError("eps and envelope_width must be positive")
    s = envelope_width / eps
    reach = np.sqrt(2 * np.log(1 / AMPLITUDE_CUTOFF))
    if reach * s >= L / 2:
        raise GridTooSmall(f"packet radius {reach * s:.4g} exceeds half the box {L / 2:.4g}")
    kmax = float(np.max(np.abs(k0))) + reach / s
    if kmax >= np.pi * N / L:
        raise GridTooSmall(f"packet k-support {kmax:.4g} reaches the Nyquist mode {np.pi * N / L:.4g}")
    x = node_grid(L, N, d)
    y = x - L / 2
    u = (eps**d / (np.pi * envelope_width**2) ** (d / 2)) ** 0.5 * np.exp(
        1j * (x @ k0) - np.sum(y**2, axis=-1) / (2 * s**2)
    )
    a = np.fft.fftn(u) * (L ** (d / 2) / N**d)
    a[np.abs(a) < AMPLITUDE_CUTOFF * np.abs(a).max()] = 0
    a /= np.sqrt(np.sum(np.abs(a) ** 2))
    return SpectralProfile(L, N, d, a, meta={"k0": k0.tolist(), "eps": eps, "width": envelope_width})


def project_nonresonant(p: SpectralProfile, F: WindingMatrix, params: ResonanceParams,
                        radius: float | None = None) -> SpectralProfile:
    """Zero the modes with |k| > radius or k ∈ ℛ_R^{n_cut}; radius defaults to R^{1/d}."""
    if radius is None:
        radius = params.R ** (1.0 / p.d)
    ks = p.modes().reshape(-1, p.d)
    amp = p.amplitudes.reshape(-1).copy()
    live = np.flatnonzero(amp)
    kill = np.linalg.norm(ks[live], axis=1) > radius
    kill |= ResonanceTable(F, params).mask(ks[live])
    amp[live[kill]] = 0
    out = amp.reshape(p.amplitudes.shape)
    removed = float(np.sum(np.abs(p.amplitudes) ** 2) - np.sum(np.abs(out) ** 2))
    return p.with_amplitudes(out, nonresonant=(params, float(radius)),
                             removed_mass=p.removed_mass + removed)


def free_flow(p: SpectralProfile, t: float) -> SpectralProfile:
    return p.with_amplitudes(p.amplitudes * np.exp(-1j * t * kinetic_symbol(p.L, p.N, p.d)))


@dataclass(frozen=True)
class JetTable:
    """Jets keyed by FFT mode index, plus modes deliberately left without one."""

    V: TrigPolynomial
    F: WindingMatrix
    ell: int
    guard: float | None
    jets: dict
    masked: frozenset = field(default_factory=frozenset)

    def __contains__(self, index):
        return index in self.jets

    def kappa(self, index, lam: float) -> complex:
        return taylor_bloch(self.jets[index], lam).kappa


def _jet_task(args) -> Jet:
    V, F, k, ell, guard = args
    jet = compute_jet(V, F, k, ell, guard)
    res = verify_eigen_identity(V, F, jet, LAMBDA_REF)
    if not res <= IDENTITY_TOL:
        raise NumericalGuard(f"eigen identity residual {res:.3e} at k = {k.tolist()}")
    return jet


def build_jet_table(p: SpectralProfile, V: TrigPolynomial, F: WindingMatrix, ell: int,
                    guard: float | None = None, params: ResonanceParams | None = None,
                    mask_resonant: bool = False, jobs: int | None = 1) -> JetTable:
    """Jets for every mode carrying amplitude in p.

    With ``mask_resonant`` the modes in ℛ_R^{n_cut} (per ``params``) get no
    jet and evolve freely; otherwise a resonant mode raises ResonantFiber.
    """
    if mask_resonant and params is None:
        raise ValueError("mask_resonant needs resonance params")
    support = p.support()
    masked = set()
    if mask_resonant:
        table = ResonanceTable(F, params)
        ks = np.array([p.mode_at(i) for i in support]).reshape(-1, p.d)
        flags = table.mask(ks) if len(support) else []
        masked = {i for i, f in zip(support, flags) if f}
    todo = [i for i in support if i not in masked]
    jets = parallel_map(_jet_task, [(V, F, p.mode_at(i), ell, guard) for i in todo], jobs)
    return JetTable(V, F, ell, guard, dict(zip(todo, jets)), frozenset(masked))


def _effective_multiplier(p: SpectralProfile, jets: JetTable, lam: float, t: float) -> np.ndarray:
    mult = np.exp(-1j * t * kinetic_symbol(p.L, p.N, p.d))
    for idx in p.support():
        if idx in jets.jets:
            kap = jets.kappa(idx, lam)
            if abs(kap.imag) > 1e-10 * (1 + abs(kap)):
                log.warning("Im kappa = %.3e at mode %s", kap.imag, idx)
            mult[idx] *= np.exp(-1j * t * kap.real)
        elif idx not in jets.masked:
            raise MissingJet(f"no jet for mode index {idx} (k = {p.mode_at(idx).tolist()})")
    return mult


def effective_flow(p: SpectralProfile, jets: JetTable, lam: float, t: float) -> SpectralProfile:
    """Phase e^{−it(|k|² + Re κ^ℓ_{k,λ})} per mode; free phase on masked modes."""
    return p.with_amplitudes(p.amplitudes * _effective_multiplier(p, jets, lam, t))


def bloch_flow(p: SpectralProfile, jets: JetTable, lam: float, t: float, omega=None) -> GridState:
    """V(x) = Σ_k e^{−it(|k|²+Re κ_k)} a_k e^{ik·x} ψ_k(x) on the grid nodes.

    Uses e^{i(k+Fξ)·x} = e^{iFξ·x} e^{ik·x}: for each torus frequency ξ the
    k-sum is one inverse FFT of a_k ψ̂_k(ξ), evaluated exactly at the nodes.
    ``omega`` translates the potential on the torus.
    """
    amp = p.amplitudes * _effective_multiplier(p, jets, lam, t)
    zero = (0,) * jets.V.M
    layers: dict = {}
    for idx in p.support():
        if idx in jets.jets:
            psi = taylor_bloch(jets.jets[idx], lam).psi
            for key, c in zip(psi.keys, psi.values):
                key = tuple(int(v) for v in key)
                if key not in layers:
                    layers[key] = np.zeros_like(amp)
                layers[key][idx] += amp[idx] * c
        else:
            layers.setdefault(zero, np.zeros_like(amp))[idx] += amp[idx]
    x = node_grid(p.L, p.N, p.d)
    scale = p.N**p.d / p.L ** (p.d / 2)
    out = np.zeros((p.N,) * p.d, dtype=complex)
    for key in sorted(layers):
        field_k = np.fft.ifftn(layers[key]) * scale
        if any(key):
            phase = x @ jets.F.apply(np.array(key))
            if omega is not None:
                phase = phase + np.dot(key, omega)
            field_k = field_k * np.exp(1j * phase)
        out += field_k
    return GridState(p.L, p.N, p.d, out, t)


def bloch_expand(p: SpectralProfile, jets: JetTable, lam: float, omega=None) -> GridState:
    """W°(x) = Σ_k a_k e^{ik·x} ψ^ℓ_{k,λ}(x)."""
    return bloch_flow(p, jets, lam, 0.0, omega)


def effective_grid(p: SpectralProfile, jets: JetTable, lam: float, t: float) -> GridState:
    """U^{ℓ;t} on the grid."""
    return to_grid(effective_flow(p, jets, lam, t), t)


__all__ = [
    "make_packet", "project_nonresonant", "free_flow", "JetTable", "build_jet_table",
    "effective_flow", "bloch_flow", "bloch_expand", "effective_grid", "wavenumbers",
]
