"""Error norms, ballistic moments and the λ-scaling sweeps."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import stats

from ._pool import parallel_map
from .errors import Contaminated
from .flows import bloch_expand, bloch_flow, build_jet_table, effective_grid
from .grid import GridState, node_grid, to_grid
from .solver import evolve


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    ell: int
    R: float
    K: float
    T: float
    seed: int
    observable: str
    value: float
    meta: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.observable}")
        if not isinstance(self.meta, MappingProxyType):
            object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def key(self):
        return (self.observable, self.ell, self.lam)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    r2: float
    residuals: tuple


def l2_error(a: GridState, b: GridState) -> float:
    """‖a − b‖·(L/N)^{d/2}."""
    a.same_grid(b)
    return float(np.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * a.cell))


def _radius(u: GridState, center) -> np.ndarray:
    x = node_grid(u.L, u.N, u.d)
    c = np.full(u.d, u.L / 2) if center is None else np.asarray(center, dtype=float)
    return np.linalg.norm(x - c, axis=-1)


def rescaled_moment(u: GridState, t: float, m: int, center=None) -> float:
    """‖(|x − x_c|/t)^m u‖ about the launch point (box centre by default)."""
    if u.contaminated:
        raise Contaminated("moment requested on a boundary-contaminated state")
    r = _radius(u, center) / t
    return float(np.sqrt(np.sum(np.abs(r**m * u.values) ** 2) * u.cell))


def truncated_moment(u: GridState, t: float, m: int, C0: float, center=None) -> float:
    """Moment with the ballistic cutoff e^{−½(|x − x_c|/(C0 t))²}."""
    if u.contaminated:
        raise Contaminated("moment requested on a boundary-contaminated state")
    if not C0 >= 1:
        raise ValueError("C0 must be >= 1")
    r = _radius(u, center)
    w = (r / t) ** m * np.exp(-0.5 * (r / (C0 * t)) ** 2)
    return float(np.sqrt(np.sum(np.abs(w * u.values) ** 2) * u.cell))


def fit_slope(x, y) -> SlopeFit:
    """Least-squares fit of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept),
                    float(res.rvalue**2), tuple(float(v) for v in resid))


# -- sweeps -------------------------------------------------------------------

def _sweep_task(args):
    kind, lam, ell, sc, tables, T, dt, times = args
    Vg = sc.potential_grid()
    p = sc.profile()
    if kind == "u":
        snaps = evolve(to_grid(p), Vg, lam, T, dt, times)
        rows = []
        for l in sorted(tables):
            for s in snaps:
                rows.append((l, s.t, l2_error(s, effective_grid(p, tables[l], lam, s.t)),
                             l2_error(s, bloch_flow(p, tables[l], lam, s.t))))
        return kind, lam, ell, rows, snaps.mass_drift, snaps.contaminated
    tab = tables[ell]
    w0 = bloch_expand(p, tab, lam)
    snaps = evolve(w0, Vg, lam, T, dt, times)
    rows = [(ell, s.t, l2_error(s, bloch_flow(p, tab, lam, s.t))) for s in snaps]
    prep = l2_error(w0, to_grid(p))
    return kind, lam, ell, (rows, prep), snaps.mass_drift, snaps.contaminated


@dataclass
class SweepResult:
    records: list
    fits: dict
    series: list  # (lam, ell, t, err_u_U, err_u_V, err_W_V)


def scaling_sweep(scenario, lam_list, ell_list, T: float, dt: float, jobs: int | None = 1,
                  n_snapshots: int | None = None) -> SweepResult:
    """Reference runs from u° and from W° for every (λ, ℓ), compared with U^ℓ and V^ℓ.

    Errors are maxima over ≥ 20 evenly spaced snapshots in [0, T]; slopes
    are fitted over the positive λ values.
    """
    lams = sorted({float(v) for v in lam_list}, reverse=True)
    ells = sorted({int(v) for v in ell_list})
    n_snap = max(n_snapshots or scenario.snapshots, 20)
    times = list(np.linspace(0.0, T, n_snap + 1))
    p = scenario.profile()
    tables = {l: build_jet_table(p, scenario.V, scenario.F, l, scenario.guard_for(l),
                                 scenario.params_for(l), scenario.mask_resonant, jobs=1)
              for l in ells}
    tasks = [("u", lam, 0, scenario, tables, T, dt, times) for lam in lams]
    tasks += [("W", lam, l, scenario, tables, T, dt, times) for lam in lams for l in ells]
    results = parallel_map(_sweep_task, tasks, jobs)

    u_rows, w_rows, drift, prep = {}, {}, {}, {}
    for kind, lam, ell, rows, md, contaminated in results:
        if kind == "u":
            for l, t, eU, eV in rows:
                u_rows[(lam, l, round(t, 12))] = (eU, eV)
            drift[("u", lam)] = (md, contaminated)
        else:
            rws, pr = rows
            for l, t, eW in rws:
                w_rows[(lam, l, round(t, 12))] = eW
            drift[("W", lam, ell)] = (md, contaminated)
            prep[(lam, ell)] = pr

    series = []
    for (lam, l, t) in sorted(u_rows, key=lambda k: (-k[0], k[1], k[2])):
        eU, eV = u_rows[(lam, l, t)]
        series.append((lam, l, t, eU, eV, w_rows[(lam, l, t)]))

    records = []
    K = scenario.K
    for lam in lams:
        for l in ells:
            rows = [s for s in series if s[0] == lam and s[1] == l]
            meta = {"mass_drift_u": drift[("u", lam)][0], "mass_drift_W": drift[("W", lam, l)][0],
                    "contaminated": bool(drift[("u", lam)][1] or drift[("W", lam, l)][1]),
                    "removed_mass": p.removed_mass}
            common = dict(lam=lam, ell=l, R=scenario.R, K=K, T=T, seed=scenario.seed, meta=meta)
            records.append(SweepRecord(observable="sup_u_U", value=max(r[3] for r in rows), **common))
            records.append(SweepRecord(observable="sup_u_V", value=max(r[4] for r in rows), **common))
            records.append(SweepRecord(observable="sup_W_V", value=max(r[5] for r in rows), **common))
            records.append(SweepRecord(observable="prep_u0_W0", value=prep[(lam, l)], **common))

    fits = {}
    for obs in ("sup_u_U", "sup_u_V", "sup_W_V", "prep_u0_W0"):
        for l in ells:
            pts = [(r.lam, r.value) for r in records if r.observable == obs and r.ell == l and r.lam > 0]
            if len(pts) >= 3 and all(v > 0 for _, v in pts):
                fits[(obs, l)] = fit_slope(*zip(*pts))
    return SweepResult(records, fits, series)


def _moment_task(args):
    sc, lam, t, dt = args
    snaps = evolve(to_grid(sc.profile()), sc.potential_grid(), lam, t, dt, [t])
    return snaps[-1]


def moment_gap(scenario, lam_list, m: int, t: float, dt: float | None = None, C0_list=(),
               jobs: int | None = 1) -> dict:
    """|M_m^t(u_λ) − M_m^t(u_0)| per λ, plus truncated-moment gaps M − M̃(C0).

    Returns the records together with two rank correlations: ρ(λ, gap), and
    ρ(position, gap) along λ in decreasing order (−1 when the gap shrinks
    strictly with λ).
    """
    if t < 1:
        raise ValueError("moment time must be >= 1")
    dt = scenario.dt if dt is None else dt
    lams = sorted({float(v) for v in lam_list} | {0.0}, reverse=True)
    states = dict(zip(lams, parallel_map(_moment_task, [(scenario, lam, t, dt) for lam in lams], jobs)))
    M0 = rescaled_moment(states[0.0], t, m)
    records = []
    common = dict(R=scenario.R, K=scenario.K, T=t, seed=scenario.seed)
    for lam in lams:
        u = states[lam]
        M = rescaled_moment(u, t, m)
        meta = {"m": m, "t": t, "M": M, "M0": M0}
        records.append(SweepRecord(lam=lam, ell=0, observable="moment_gap", value=abs(M - M0),
                                   meta=meta, **common))
        for C0 in C0_list:
            Mt = truncated_moment(u, t, m, C0)
            records.append(SweepRecord(lam=lam, ell=0, observable=f"truncation_gap_C0={C0:g}",
                                       value=M - Mt, meta={**meta, "C0": C0, "Mtilde": Mt}, **common))
    gaps = [r.value for r in records if r.observable == "moment_gap" and r.lam > 0]
    pos = [r.lam for r in records if r.observable == "moment_gap" and r.lam > 0]
    if len(gaps) >= 2:
        rho_lam = float(stats.spearmanr(pos, gaps).statistic)
        rho_seq = float(stats.spearmanr(np.arange(len(gaps)), gaps).statistic)
    else:
        rho_lam = rho_seq = float("nan")
    return {"records": records, "spearman_lambda": rho_lam, "spearman_sequence": rho_seq}


__all__ = [
    "SweepRecord", "SlopeFit", "SweepResult", "l2_error", "rescaled_moment", "truncated_moment",
    "fit_slope", "scaling_sweep", "moment_gap",
]
