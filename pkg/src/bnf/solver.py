"""Reference integrator for i∂ₜu = (−Δ + λV)u on the periodic box (Strang splitting)."""
from __future__ import annotations

import warnings

import numpy as np

from .errors import BoundaryContamination
from .grid import GridState, kinetic_symbol, node_grid
from .potential import TrigPolynomial, WindingMatrix, evaluate

SHELL = 0.05
CONTAMINATION_MASS = 1e-6


def sample_potential(V: TrigPolynomial, F: WindingMatrix, L: float, N: int, omega=None) -> np.ndarray:
    """V on the nodes x = (L/N)·j; the imaginary residue must stay below 1e-12·Σ|V̂|."""
    vals = np.asarray(evaluate(V, F, node_grid(L, N, F.d), omega))
    vals = np.broadcast_to(vals, (N,) * F.d)
    tol = 1e-12 * max(V.l1(), 1e-300)
    if np.max(np.abs(vals.imag), initial=0.0) > tol:
        raise ValueError("sampled potential is not real; is V Hermitian?")
    return np.ascontiguousarray(vals.real)


class _Stepper:
    def __init__(self, L, N, d, V_grid, lam, dt):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.half = np.exp(-0.5j * lam * dt * np.asarray(V_grid))
        self.kin = np.exp(-1j * dt * kinetic_symbol(L, N, d))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = u * self.half
        u = np.fft.ifftn(np.fft.fftn(u) * self.kin)
        return u * self.half


def step(state: GridState, V_grid, lam: float, dt: float) -> GridState:
    """One Strang step: half potential phase, exact kinetic step, half potential phase."""
    s = _Stepper(state.L, state.N, state.d, V_grid, lam, dt)
    return state.with_values(s(state.values), t=state.t + dt)


def shell_mass(u: GridState) -> float:
    """Fraction of the mass within 5% of the box edge along any axis."""
    x = node_grid(u.L, u.N, u.d)
    outer = np.any(np.abs(x - u.L / 2) > (0.5 - SHELL) * u.L, axis=-1)
    dens = np.abs(u.values) ** 2
    total = dens.sum()
    return float(dens[outer].sum() / total) if total > 0 else 0.0


class Snapshots(list):
    """Snapshot states plus run metadata (dt, steps, time rounding, drift, contamination)."""

    dt: float
    steps: int
    rounding: list
    mass_drift: float
    contaminated: bool


def evolve(state: GridState, V_grid, lam: float, T: float, dt: float, snapshot_times=None) -> Snapshots:
    """Step from state.t to state.t + T, copying out states at the requested times.

    Times are rounded to the nearest step; the rounding is reported in
    ``result.rounding`` as (requested, actual) pairs.  A BoundaryContamination
    warning is issued if any snapshot holds ≥ 1e-6 of its mass in the outer
    shell, and the affected states carry ``contaminated=True``.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if snapshot_times is None:
        snapshot_times = [T]
    times = sorted(float(t) for t in snapshot_times)
    if times and (times[0] < 0 or times[-1] > T * (1 + 1e-12) + 1e-12):
        raise ValueError("snapshot times must lie in [0, T]")
    nsteps = int(round(T / dt)) if T > 0 else 0
    want = sorted({min(int(round(t / dt)), nsteps) for t in times} | ({0} if T == 0 else set()))
    out = Snapshots()
    out.dt, out.steps = dt, nsteps
    out.rounding = [(t, min(int(round(t / dt)), nsteps) * dt) for t in times]
    m0 = state.norm()
    stepper = _Stepper(state.L, state.N, state.d, V_grid, lam, dt) if nsteps else None
    u = state.values.copy()
    n = 0
    flagged = False
    for target in want:
        while n < target:
            u = stepper(u)
            n += 1
        snap = state.with_values(u.copy(), t=state.t + n * dt)
        if shell_mass(snap) >= CONTAMINATION_MASS:
            snap = snap.with_values(snap.values, contaminated=True)
            flagged = True
        out.append(snap)
    while n < nsteps:
        u = stepper(u)
        n += 1
    out.mass_drift = abs(state.with_values(u).norm() - m0) / m0 if m0 > 0 else 0.0
    out.contaminated = flagged
    if flagged:
        warnings.warn("mass reached the outer shell of the box; periodic wrap may pollute results",
                      BoundaryContamination, stacklevel=2)
    return out


__all__ = ["sample_potential", "step", "evolve", "shell_mass", "Snapshots", "GridState"]
