"""Regularised least-squares reconstruction: CGLS with Tikhonov damping and
non-negative smoothed-TV by projected gradient descent.

Operators only need ``shape``, ``matvec`` and ``rmatvec``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grids import Image, ImageGrid

log = logging.getLogger(__name__)

TV_FORMS = ("isotropic", "global")


@dataclass(frozen=True)
class ReconConfig:
    """Solver settings.

    ``lam`` weights the regulariser.  ``tv_form`` picks the TV penalty:
    ``"isotropic"`` sums ``sqrt(|grad x|_i^2 + beta^2)`` over pixels,
    ``"global"`` is ``sqrt(||grad x||^2 + beta^2)`` over the whole image.
    """

    lam: float = 0.0
    beta_smooth: float = 1e-3
    max_iters: int = 200
    tol: float = 1e-6
    nonneg: bool = True
    seed: int = 0
    tv_form: str = "isotropic"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.beta_smooth > 0:
            raise ValueError(f"TV smoothing beta must be > 0, got {self.beta_smooth}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not self.tol >= 0:
            raise ValueError("tol must be >= 0")
        if self.tv_form not in TV_FORMS:
            raise ValueError(f"tv_form must be one of {TV_FORMS}, got {self.tv_form!r}")


@dataclass
class IterationLog:
    rows: list = field(default_factory=list)   # (iter, objective, residual, step)

    def add(self, it, objective, residual, step):
        self.rows.append((int(it), float(objective), float(residual), float(step)))

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "objective", "residual", "step"])
            for r in self.rows:
                wr.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3])])


@dataclass
class ReconResult:
    x: np.ndarray
    log: IterationLog
    iterations: int
    flag: str = "converged"   # converged | max_iters | breakdown | line_search

    def image(self, m: int | None = None) -> Image:
        m = m or math.isqrt(self.x.size)
        return Image(ImageGrid(m), self.x)


def _check_dims(A, b) -> np.ndarray:
    b = np.asarray(b, float).ravel()
    if b.size != A.shape[0]:
        raise ValueError(f"data length {b.size} != operator rows {A.shape[0]}")
    return b


# ----------------------------------------------------------------------- CGLS

def cgls_tikhonov(A, b, cfg: ReconConfig) -> ReconResult:
    """CGLS on ``[A; sqrt(lam) I] x = [b; 0]`` from ``x = 0``.

    Stops when ``||A^T r - lam x||`` falls below ``tol`` times its initial
    value.  The log residual is the augmented one,
    ``sqrt(||Ax - b||^2 + lam ||x||^2)``, which CGLS decreases monotonically.
    """
    b = _check_dims(A, b)
    lam = cfg.lam
    x = np.zeros(A.shape[1])
    r = b.copy()
    s = A.rmatvec(r)
    p = s.copy()
    gamma = s @ s
    norm0 = math.sqrt(gamma)
    out = IterationLog()
    out.add(0, r @ r, math.sqrt(r @ r), 0.0)
    if norm0 == 0:
        return ReconResult(x, out, 0)
    flag = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        q = A.matvec(p)
        curv = q @ q + lam * (p @ p)
        if curv <= 0 or not np.isfinite(curv):
            flag = "breakdown"
            it -= 1
            break
        a = gamma / curv
        x += a * p
        r -= a * q
        s = A.rmatvec(r) - lam * x
        gamma_new = s @ s
        res2 = r @ r + lam * (x @ x)
        out.add(it, res2, math.sqrt(res2), a)
        if math.sqrt(gamma_new) <= cfg.tol * norm0:
            flag = "converged"
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return ReconResult(x, out, it, flag)


# ------------------------------------------------------------------------- TV

def grad2d(x: np.ndarray) -> np.ndarray:
    """Forward differences ``(d_rows, d_cols)`` with zeros on the far edges."""
    g = np.zeros((2,) + x.shape)
    g[0, :-1] = x[1:] - x[:-1]
    g[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return g


def grad2d_adjoint(g: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`grad2d` (minus the discrete divergence)."""
    out = np.zeros(g.shape[1:])
    out[:-1] -= g[0, :-1]
    out[1:] += g[0, :-1]
    out[:, :-1] -= g[1, :, :-1]
    out[:, 1:] += g[1, :, :-1]
    return out


def _as_square(x, n):
    m = math.isqrt(n)
    if m * m != n:
        raise ValueError(f"TV needs a square image, got {n} unknowns")
    return np.asarray(x, float).reshape(m, m)


def tv_penalty(x: np.ndarray, beta: float, form: str = "isotropic"):
    """``(G(x), dG/dx)`` for a 2-D array ``x``."""
    g = grad2d(x)
    if form == "global":
        val = math.sqrt(float(np.sum(g * g)) + beta * beta)
        return val, grad2d_adjoint(g) / val
    mag = np.sqrt(g[0] ** 2 + g[1] ** 2 + beta * beta)
    return float(mag.sum()), grad2d_adjoint(g / mag)


def tv_objective(A, b, x, cfg: ReconConfig) -> float:
    b = _check_dims(A, b)
    x = np.asarray(x, float).ravel()
    r = A.matvec(x) - b
    return float(r @ r) + cfg.lam * tv_penalty(_as_square(x, x.size), cfg.beta_smooth, cfg.tv_form)[0]


def tv_gradient(A, b, x, cfg: ReconConfig) -> np.ndarray:
    b = _check_dims(A, b)
    x = np.asarray(x, float).ravel()
    g = 2.0 * A.rmatvec(A.matvec(x) - b)
    if cfg.lam:
        g += cfg.lam * tv_penalty(_as_square(x, x.size), cfg.beta_smooth, cfg.tv_form)[1].ravel()
    return g


def _tv_value_grad(A, b, x, cfg):
    r = A.matvec(x) - b
    pen, dpen = tv_penalty(_as_square(x, x.size), cfg.beta_smooth, cfg.tv_form)
    return float(r @ r) + cfg.lam * pen, 2.0 * A.rmatvec(r) + cfg.lam * dpen.ravel(), r


def tv_reconstruct(A, b, cfg: ReconConfig, x0=None) -> ReconResult:
    """Projected gradient descent on ``||Ax - b||^2 + lam * TV_beta(x)``.

    Trial steps alternate the two Barzilai-Borwein lengths (long on odd
    iterations, short on even ones), then halve until the
    Armijo condition ``phi(x+) <= phi(x) + 1e-4 g.(x+ - x)`` holds.  With
    ``nonneg`` the projection clamps negatives to 0.  Stops when the
    objective dropped by less than ``tol`` (relative) over the last 10
    iterations.
    """
    b = _check_dims(A, b)
    n = A.shape[1]
    proj = (lambda v: np.maximum(v, 0.0)) if cfg.nonneg else (lambda v: v)
    x = proj(np.zeros(n) if x0 is None else np.asarray(x0, float).ravel().copy())
    phi, g, r = _tv_value_grad(A, b, x, cfg)
    out = IterationLog()
    out.add(0, phi, math.sqrt(r @ r), 0.0)
    # first trial step: exact minimiser of the data term along -g
    Ag = A.matvec(g)
    step = 0.5 * (g @ g) / (Ag @ Ag) if Ag @ Ag > 0 else 1.0
    flag = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        t = step
        while True:
            x_new = proj(x - t * g)
            d = x_new - x
            phi_new, g_new, r_new = _tv_value_grad(A, b, x_new, cfg)
            if phi_new <= phi + 1e-4 * (g @ d) and phi_new <= phi:
                break
            t *= 0.5
            if t < 1e-16:
                break
        if t < 1e-16:
            flag = "line_search"
            it -= 1
            break
        if not np.any(d):
            flag = "converged"
            it -= 1
            break
        dg = g_new - g
        sy = d @ dg
        if sy > 0:
            step = (d @ d) / sy if it % 2 else sy / (dg @ dg)
        else:
            step = 2 * t
        x, phi, g, r = x_new, phi_new, g_new, r_new
        out.add(it, phi, math.sqrt(r @ r), t)
        if it >= 10:
            old = out.rows[it - 10][1]
            if old - phi <= cfg.tol * abs(old):
                flag = "converged"
                break
    return ReconResult(x, out, it, flag)


def lambda_grid(lo_exp: float = -4, hi_exp: float = 2, count: int = 13) -> np.ndarray:
    return np.logspace(lo_exp, hi_exp, count)


def sweep_lambda(solve, lams, score):
    """Run ``solve(lam)`` for each ``lam`` and score it; returns
    ``(best_lam, best_result, rows)`` with rows ``(lam, score, iterations, flag)``."""
    rows = []
    best = None
    for lam in lams:
        res = solve(float(lam))
        sc = float(score(res))
        rows.append((float(lam), sc, res.iterations, res.flag))
        log.info("lambda=%.3g score=%.4f iters=%d %s", lam, sc, res.iterations, res.flag)
        if best is None or sc < best[1]:
            best = (float(lam), sc, res)
    return best[0], best[2], rows
