"""Experiment plumbing: manifests, data simulation, reconstruction and the
phantom x curve x noise x solver table."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .grids import Image, ImageGrid, Sinogram
from .phantoms import (PhantomSpec, default_annulus, default_ellipses, delta_error,
                       make_phantom, spec_from_manifest, spec_to_manifest)
from .radon import CurveSpec, NoiseSpec, ShiftInvariantOperator, default_axes, simulate_data
from .solvers import ReconConfig, ReconResult, cgls_tikhonov, lambda_grid, sweep_lambda, tv_reconstruct
from .spectral import SpectralOptions, SupportBand, invert_R2d

log = logging.getLogger(__name__)

METHODS = ("cgls", "tv", "spectral")
GAMMAS = (0.01, 0.05)
EPSILON = 0.05
NOISE_SEED = 11

# lambda chosen by the 13-point sweep (minimum delta) at m=257 with the
# seeds above, keyed by (method, phantom kind, j, gamma)
CALIBRATED_LAMBDA = {
    ("cgls", "annulus", 0, 0.01): 1e-4, ("cgls", "annulus", 0, 0.05): 1e-3,
    ("cgls", "annulus", 1, 0.01): 1e-4, ("cgls", "annulus", 1, 0.05): 1e-3,
    ("cgls", "ellipses", 0, 0.01): 1e-4, ("cgls", "ellipses", 0, 0.05): 1e-3,
    ("cgls", "ellipses", 1, 0.01): 1e-4, ("cgls", "ellipses", 1, 0.05): 1e-3,
    ("tv", "annulus", 0, 0.01): 1e-4, ("tv", "annulus", 0, 0.05): 1e-3,
    ("tv", "annulus", 1, 0.01): 1e-4, ("tv", "annulus", 1, 0.05): 10 ** -3.5,
    ("tv", "ellipses", 0, 0.01): 1e-4, ("tv", "ellipses", 0, 0.05): 10 ** -3.5,
    ("tv", "ellipses", 1, 0.01): 1e-4, ("tv", "ellipses", 1, 0.05): 10 ** -3.5,
}


class ScaledOperator:
    """``A / c`` without copying ``A``."""

    def __init__(self, A, c: float):
        self.A, self.c, self.shape = A, float(c), A.shape

    def matvec(self, x):
        return self.A.matvec(x) / self.c

    def rmatvec(self, y):
        return self.A.rmatvec(y) / self.c


def operator_norm(A, iters: int = 30, seed: int = 0) -> float:
    """Spectral norm estimate by power iteration on ``A^T A``."""
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.rmatvec(A.matvec(v))
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))


@lru_cache(maxsize=8)
def forward_operator(kind: str, s: float, m: int, two_sided: bool = True) -> ShiftInvariantOperator:
    p_axis, y_axis = default_axes(m)
    return ShiftInvariantOperator(CurveSpec(kind, s), ImageGrid(m), p_axis, y_axis, two_sided)


@lru_cache(maxsize=8)
def _norm_cached(kind: str, s: float, m: int) -> float:
    return operator_norm(forward_operator(kind, s, m))


# ------------------------------------------------------------------ manifest

@dataclass(frozen=True)
class ExperimentManifest:
    phantom: PhantomSpec
    curve: CurveSpec = field(default_factory=CurveSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    recon: ReconConfig = field(default_factory=ReconConfig)
    method: str = "cgls"
    output_dir: str = "out"
    sweep: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.curve.kind == "generalized":
            raise ValueError("experiments support ellipse and hyperbola curves only")

    @property
    def m(self) -> int:
        return self.phantom.m

    def to_entries(self) -> dict[str, str]:
        r = self.recon
        out = spec_to_manifest(self.phantom)
        out.update({
            "curve.kind": self.curve.kind, "curve.s": repr(float(self.curve.s)),
            "noise.gamma": repr(float(self.noise.gamma)),
            "noise.epsilon": repr(float(self.noise.epsilon)),
            "noise.seed": str(self.noise.seed),
            "recon.lambda": repr(float(r.lam)), "recon.beta_smooth": repr(float(r.beta_smooth)),
            "recon.max_iters": str(r.max_iters), "recon.tol": repr(float(r.tol)),
            "recon.nonneg": str(r.nonneg).lower(), "recon.seed": str(r.seed),
            "recon.tv_form": r.tv_form, "recon.sweep": str(self.sweep).lower(),
            "method": self.method, "output_dir": self.output_dir,
        })
        return out

    @classmethod
    def from_entries(cls, e: dict[str, str]) -> "ExperimentManifest":
        known = {"curve.kind", "curve.s", "noise.gamma", "noise.epsilon", "noise.seed",
                 "recon.lambda", "recon.beta_smooth", "recon.max_iters", "recon.tol",
                 "recon.nonneg", "recon.seed", "recon.tv_form", "recon.sweep", "method",
                 "output_dir"}
        for k in e:
            if k not in known and not k.startswith("phantom."):
                raise ValueError(f"unknown manifest key {k!r}")
        d = ReconConfig()
        curve = CurveSpec(e.get("curve.kind", "ellipse"), float(e.get("curve.s", 2.0)))
        noise = NoiseSpec(float(e.get("noise.gamma", 0.0)), float(e.get("noise.epsilon", 0.0)),
                          int(e.get("noise.seed", 0)))
        recon = ReconConfig(
            lam=float(e.get("recon.lambda", d.lam)),
            beta_smooth=float(e.get("recon.beta_smooth", d.beta_smooth)),
            max_iters=int(e.get("recon.max_iters", d.max_iters)),
            tol=float(e.get("recon.tol", d.tol)),
            nonneg=_bool(e.get("recon.nonneg", str(d.nonneg))),
            seed=int(e.get("recon.seed", d.seed)),
            tv_form=e.get("recon.tv_form", d.tv_form),
        )
        return cls(spec_from_manifest(e), curve, noise, recon, e.get("method", "cgls"),
                   e.get("output_dir", "out"), _bool(e.get("recon.sweep", "false")))


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# ---------------------------------------------------------------- simulation

@dataclass
class Simulation:
    phantom: Image
    clean: Sinogram          # exact operator, no noise
    data: np.ndarray         # perturbed operator plus noise, flattened p-major


def simulate(man: ExperimentManifest) -> Simulation:
    op = forward_operator(man.curve.kind, man.curve.s, man.m)
    ph = make_phantom(man.phantom)
    clean = op.sinogram(ph)
    # perturbation and noise draw from separate streams of the same seed
    A_eps = op.perturbed(man.noise.epsilon, man.noise.seed)
    data = simulate_data(A_eps, ph, man.noise)
    return Simulation(ph, clean, data)


# ------------------------------------------------------------ reconstruction

@dataclass
class Outcome:
    image: Image
    delta: float
    lam: float
    iterations: int
    flag: str
    runtime: float
    result: ReconResult | None = None
    sweep_rows: list = field(default_factory=list)


def _solve(method: str, A, b, cfg: ReconConfig) -> ReconResult:
    return cgls_tikhonov(A, b, cfg) if method == "cgls" else tv_reconstruct(A, b, cfg)


def reconstruct(man: ExperimentManifest, sim: Simulation) -> Outcome:
    """Run the manifest's method on ``sim.data``.

    Algebraic methods solve the problem rescaled by the operator norm, so
    ``lambda`` is relative to a unit-norm operator; the rescaling leaves the
    image scale (unit maximum for the test phantoms) unchanged.
    """
    t0 = time.perf_counter()
    m = man.m
    if man.method == "spectral":
        sino = Sinogram(sim.clean.p_axis, sim.clean.y_axis,
                        sim.data.reshape(sim.clean.values.shape), sim.clean.j, sim.clean.s)
        lo, hi = man.phantom.support_x2
        band = SupportBand(max(lo - 1.5, sino.p_axis.lo), min(hi + 1.5, sino.p_axis.hi))
        res = invert_R2d(sino, band, ImageGrid(m), SpectralOptions())
        flag = "converged" if not res.failed_frequencies else f"dropped_{len(res.failed_frequencies)}"
        return Outcome(res.image, delta_error(res.image, sim.phantom), 0.0, 0, flag,
                       time.perf_counter() - t0)
    op = forward_operator(man.curve.kind, man.curve.s, m)
    c = _norm_cached(man.curve.kind, man.curve.s, m)
    A = ScaledOperator(op, c)
    b = sim.data / c
    rows = []
    if man.sweep:
        lam, res, rows = sweep_lambda(
            lambda lam: _solve(man.method, A, b, replace(man.recon, lam=lam)),
            lambda_grid(),
            lambda r: delta_error(r.image(m), sim.phantom),
        )
    else:
        lam = man.recon.lam
        res = _solve(man.method, A, b, man.recon)
    img = res.image(m)
    return Outcome(img, delta_error(img, sim.phantom), lam, res.iterations, res.flag,
                   time.perf_counter() - t0, res, rows)


# ---------------------------------------------------------------------- table

def table_manifests(m: int = 257, methods=("cgls", "tv"), sweep: bool = False,
                    output_dir: str = "out") -> list[ExperimentManifest]:
    """{annulus, ellipses} x {ellipse, hyperbola} x {1 %, 5 %} x methods."""
    out = []
    for method in methods:
        for ph in (default_annulus(m), default_ellipses(m)):
            for j in (0, 1):
                for g in GAMMAS:
                    lam = CALIBRATED_LAMBDA.get((method, ph.kind, j, g), 1e-3)
                    iters = 300 if method == "cgls" else 3000
                    cfg = ReconConfig(lam=lam, max_iters=iters, tol=1e-8 if method == "cgls" else 1e-6)
                    out.append(ExperimentManifest(
                        ph, CurveSpec.for_orientation(j), NoiseSpec(g, EPSILON, NOISE_SEED),
                        cfg, method, output_dir, sweep))
    return out


def cell_label(man: ExperimentManifest) -> str:
    return f"{man.method}/{man.phantom.kind}/E{man.curve.j}/{round(man.noise.gamma * 100)}%"
