"""Experiment scenarios: an INI file plus potential and winding files.

Example::

    [potential]
    file = golden_1d.trigpoly        # relative to the scenario file
    winding = golden_1d.winding

    [packet]
    k0 = 0.1                         # space separated for d > 1
    eps = 0.02
    width = 1.0

    [box]
    L = 2048
    N = 4096

    [run]
    lambdas = 0.1, 0.05, 0.025, 0.0125
    ells = 1, 2
    T = 20
    dt = 2.5e-3
    snapshots = 20
    seed = 0

    [resonance]
    R = 8
    s0 = 3.5
    # n_cut defaults to K·ℓ, guard to 1e-8·R⁻¹(ℓK)^{−s0}
    project = false                  # apply project_nonresonant to the packet
    mask = false                     # jet-less resonant modes instead of an error
    kappa = 2.0
    samples = 100000
    R_list = 1, 2, 4, 8
    points = 0                       # optional point cloud size

    [moments]
    t = 50
    m = 1
    lambdas = 0.2, 0.1, 0.05, 0.025
    C0 = 1, 2

    [jets]
    k = 0.1; 0.25                    # fibers separated by ';'
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .flows import make_packet, project_nonresonant
from .grid import SpectralProfile
from .potential import TrigPolynomial, WindingMatrix, read_trigpoly, read_winding
from .resonance import ResonanceParams, guard_default
from .solver import sample_potential

BUNDLED = ("golden_1d", "twofreq_2d", "periodic_check")


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def _vectors(text: str) -> list:
    return [_floats(chunk) for chunk in text.split(";") if chunk.strip()]


@dataclass
class Scenario:
    name: str
    V: TrigPolynomial
    F: WindingMatrix
    potential_file: str
    winding_file: str
    k0: tuple
    eps: float
    width: float
    L: float
    N: int
    lambdas: tuple
    ells: tuple
    T: float
    dt: float
    snapshots: int = 20
    seed: int = 0
    R: float = 8.0
    s0: float = 3.5
    n_cut: int | None = None
    guard: float | None = None
    project: bool = False
    mask_resonant: bool = False
    radius: float | None = None
    kappa: float = 1.0
    samples: int = 100_000
    R_list: tuple = (1.0, 2.0, 4.0, 8.0)
    points: int = 0
    moment_t: float = 50.0
    moment_m: int = 1
    moment_lambdas: tuple = (0.2, 0.1, 0.05, 0.025)
    C0: tuple = (1.0, 2.0)
    jet_ks: tuple = ()
    out: str | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.F.d

    @property
    def M(self) -> int:
        return self.F.M

    @property
    def K(self) -> float:
        return max(self.V.support_radius, 1.0)

    def params_for(self, ell: int, R: float | None = None) -> ResonanceParams:
        n = self.n_cut if self.n_cut is not None else max(int(np.ceil(self.K * max(ell, 1))), 1)
        return ResonanceParams(self.R if R is None else R, self.s0, n)

    def guard_for(self, ell: int) -> float:
        if self.guard is not None:
            return self.guard
        return guard_default(self.params_for(ell), ell, self.K)

    def profile(self) -> SpectralProfile:
        if "profile" not in self._cache:
            p = make_packet(self.k0, self.eps, self.width, self.L, self.N)
            if self.project:
                p = project_nonresonant(p, self.F, self.params_for(max(self.ells)), self.radius)
            self._cache["profile"] = p
        return self._cache["profile"]

    def potential_grid(self) -> np.ndarray:
        if "vgrid" not in self._cache:
            self._cache["vgrid"] = sample_potential(self.V, self.F, self.L, self.N)
        return self._cache["vgrid"]

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def resolved(self) -> dict:
        """Flat, ordered description of every parameter (for manifests)."""
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name not in ("V", "F", "_cache", "out")}
        out["d"], out["M"], out["K"] = self.d, self.M, self.K
        out["F"] = self.F.entries.tolist()
        out["V"] = sorted(self.V.coeffs.items())
        return out


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def load_scenario(path, seed: int | None = None, out: str | None = None) -> Scenario:
    """Parse and validate a scenario; raises ScenarioError naming the bad parameter."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario: file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys such as L, N, T, R are case sensitive
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ScenarioError(f"scenario: {exc}") from exc
    return _build(cp, path.parent, path.stem, seed, out)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("bnf") / "scenarios" / f"{name}.ini"))


def resolve_scenario(target: str, seed: int | None = None, out: str | None = None) -> Scenario:
    """Path to an INI file, or the name of a bundled scenario."""
    if target in BUNDLED and not Path(target).exists():
        return load_scenario(bundled_path(target), seed, out)
    return load_scenario(target, seed, out)


def _get(sec, key, conv, default=None, required=False, where=""):
    if key not in sec:
        if required:
            raise ScenarioError(f"{where}.{key}: missing")
        return default
    try:
        return conv(sec[key])
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{where}.{key}: cannot parse {sec[key]!r} ({exc})") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _build(cp, base: Path, name: str, seed, out) -> Scenario:
    pot = _section(cp, "potential")
    pfile = _get(pot, "file", str, required=True, where="potential")
    wfile = _get(pot, "winding", str, required=True, where="potential")
    ppath, wpath = base / pfile, base / wfile
    for key, pth in (("file", ppath), ("winding", wpath)):
        if not pth.is_file():
            raise ScenarioError(f"potential.{key}: file not found: {pth}")
    try:
        V = read_trigpoly(ppath)
        F = read_winding(wpath)
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(f"potential: {exc}") from exc
    if V.M != F.M:
        raise ScenarioError(f"potential.file: torus dimension {V.M} != winding M {F.M}")
    if not V.is_hermitian():
        raise ScenarioError("potential.file: coefficients are not Hermitian (V must be real)")

    pk, box, run = _section(cp, "packet"), _section(cp, "box"), _section(cp, "run")
    res, mom, jt = _section(cp, "resonance"), _section(cp, "moments"), _section(cp, "jets")
    k0 = tuple(_get(pk, "k0", _floats, required=True, where="packet"))
    lambdas = tuple(_get(run, "lambdas", _floats, required=True, where="run"))
    ells = tuple(int(v) for v in _get(run, "ells", _floats, (1,), where="run"))
    sc = Scenario(
        name=name, V=V, F=F, potential_file=str(pfile), winding_file=str(wfile), k0=k0,
        eps=_get(pk, "eps", float, required=True, where="packet"),
        width=_get(pk, "width", float, 1.0, where="packet"),
        L=_get(box, "L", float, required=True, where="box"),
        N=_get(box, "N", int, required=True, where="box"),
        lambdas=lambdas, ells=ells,
        T=_get(run, "T", float, required=True, where="run"),
        dt=_get(run, "dt", float, required=True, where="run"),
        snapshots=_get(run, "snapshots", int, 20, where="run"),
        seed=_get(run, "seed", int, 0, where="run") if seed is None else int(seed),
        R=_get(res, "R", float, 8.0, where="resonance"),
        s0=_get(res, "s0", float, 3.5, where="resonance"),
        n_cut=_get(res, "n_cut", int, None, where="resonance"),
        guard=_get(res, "guard", float, None, where="resonance"),
        project=_get(res, "project", _bool, False, where="resonance"),
        mask_resonant=_get(res, "mask", _bool, False, where="resonance"),
        radius=_get(res, "radius", float, None, where="resonance"),
        kappa=_get(res, "kappa", float, 1.0, where="resonance"),
        samples=_get(res, "samples", int, 100_000, where="resonance"),
        R_list=tuple(_get(res, "R_list", _floats, (1.0, 2.0, 4.0, 8.0), where="resonance")),
        points=_get(res, "points", int, 0, where="resonance"),
        moment_t=_get(mom, "t", float, 50.0, where="moments"),
        moment_m=_get(mom, "m", int, 1, where="moments"),
        moment_lambdas=tuple(_get(mom, "lambdas", _floats, (0.2, 0.1, 0.05, 0.025), where="moments")),
        C0=tuple(_get(mom, "C0", _floats, (1.0, 2.0), where="moments")),
        jet_ks=tuple(tuple(v) for v in _get(jt, "k", _vectors, [list(k0)], where="jets")),
        out=out,
    )
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    def bad(key, msg):
        raise ScenarioError(f"{key}: {msg}")

    if len(sc.k0) != sc.d:
        bad("packet.k0", f"needs {sc.d} components")
    if not sc.eps > 0:
        bad("packet.eps", "must be positive")
    if not sc.width > 0:
        bad("packet.width", "must be positive")
    if not sc.L > 0:
        bad("box.L", "must be positive")
    if sc.N < 2 or sc.N & (sc.N - 1):
        bad("box.N", "must be a power of two")
    if not sc.lambdas or any(v < 0 for v in sc.lambdas):
        bad("run.lambdas", "must be a non-empty list of non-negative couplings")
    if not sc.ells or any(v < 0 for v in sc.ells):
        bad("run.ells", "jet orders must be >= 0")
    if sc.T < 0:
        bad("run.T", "must be >= 0")
    if not sc.dt > 0:
        bad("run.dt", "must be positive")
    if sc.snapshots < 1:
        bad("run.snapshots", "must be >= 1")
    if sc.seed < 0 or sc.seed >= 2**64:
        bad("run.seed", "must be an unsigned 64-bit integer")
    if not sc.R >= 1:
        bad("resonance.R", "must be >= 1")
    if sc.n_cut is not None and sc.n_cut < 1:
        bad("resonance.n_cut", "must be >= 1")
    if sc.guard is not None and not sc.guard > 0:
        bad("resonance.guard", "must be positive")
    if not sc.kappa > 0:
        bad("resonance.kappa", "must be positive")
    if sc.samples < 1000:
        bad("resonance.samples", "must be >= 1000")
    if sc.points < 0:
        bad("resonance.points", "must be >= 0")
    if any(not r >= 1 for r in sc.R_list):
        bad("resonance.R_list", "every R must be >= 1")
    if sc.moment_t < 1:
        bad("moments.t", "must be >= 1")
    if sc.moment_m < 1:
        bad("moments.m", "must be >= 1")
    if any(c < 1 for c in sc.C0):
        bad("moments.C0", "every C0 must be >= 1")
    for k in sc.jet_ks:
        if len(k) != sc.d:
            bad("jets.k", f"every fiber needs {sc.d} components")
    try:
        sc.profile()
    except Exception as exc:
        bad("packet", str(exc))
