"""Generalized Abel and weakly singular Volterra equations on ``[a, b]``.

The equation solved here is::

    g(p) = int_{B_j(p)} [(-1)^j (p - w)]^alpha K(p, w) f(w) dw

with ``B_0(p) = [a, p]``, ``B_1(p) = [p, b]`` and ``alpha = m - beta > -1``
(``m`` a non-negative integer, ``0 <= beta < 1``).  The inverse follows the
constructive route: ``m`` differentiations reduce the equation to a weakly
singular one with kernel ``M(p, w) / [(-1)^j (p - w)]^beta``; an Abel
fractional integration plus one more differentiation turns that into a
second-kind Volterra equation with a bounded kernel, which is solved by
triangular substitution or by Neumann iteration.

Quadrature choices:

* forward application and the fractional integral use product integration,
  i.e. the power weight is integrated exactly against the piecewise-linear
  interpolant of the smooth factor;
* integrals of the form ``int_0^1 F(t) t^-beta (1-t)^(beta-1) dt`` use
  Gauss-Jacobi rules matched to the weight, doubled until two successive
  orders agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg, special
from scipy.signal import savgol_filter

from .grids import Grid1D

log = logging.getLogger(__name__)

KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class AbelError(RuntimeError):
    pass


class KernelValidationError(AbelError):
    def __init__(self, report):
        super().__init__(report.summary())
        self.report = report


class QuadratureError(AbelError):
    pass


class NeumannDivergenceError(AbelError):
    pass


def split_exponent(alpha: float) -> tuple[int, float]:
    """Return ``(m, beta)`` with ``alpha = m - beta``, ``m >= 0``, ``beta in [0, 1)``."""
    if not alpha > -1:
        raise ValueError(f"exponent alpha must exceed -1, got {alpha}")
    m = math.ceil(alpha - 1e-12)
    beta = m - alpha
    if abs(beta) < 1e-12:
        beta = 0.0
    return max(m, 0), float(beta)


def leibniz_coeffs(alpha: float, j: int, k: int) -> np.ndarray:
    """Coefficients ``c_{i,k}``, ``i = 0..k``, of the k-th p-derivative of
    ``[(-1)^j (p - w)]^alpha K(p, w)``::

        H^(k) = sum_i c_{i,k} [(-1)^j (p - w)]^(alpha - (k - i)) K^(i)
    """
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    out = np.empty(k + 1)
    for i in range(k + 1):
        falling = np.prod([alpha - q for q in range(k - i)]) if k > i else 1.0
        out[i] = (-1.0) ** (j * (k - i)) * math.comb(k, i) * falling
    return out


def _fd_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    # exact stencil weights for d^order/dx^order at 0 from the given offsets
    n = len(offsets)
    vander = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


@dataclass(frozen=True)
class AbelKernelSpec:
    """Orientation, exponent and kernel of a generalized Abel equation.

    ``kernel(p, w)`` must accept broadcastable arrays.  ``dkernel(p, w, i)``
    optionally returns the i-th partial derivative in ``p``; it may raise
    ``NotImplementedError`` for orders it does not cover.  Missing orders
    fall back to one-sided finite differences taken *into* the triangle
    ``T_j`` (forward in p for j=0, backward for j=1) on ``i + 4`` nodes with
    step ``fd_step * eps**(1/(i+4))``, fourth-order accurate.
    """

    j: int
    alpha: float
    kernel: KernelFn
    dkernel: Callable | None = None
    fd_step: float = 1.0
    name: str = "K"

    def __post_init__(self):
        if self.j not in (0, 1):
            raise ValueError(f"orientation j must be 0 or 1, got {self.j}")
        split_exponent(self.alpha)

    @property
    def m_int(self) -> int:
        return split_exponent(self.alpha)[0]

    @property
    def beta(self) -> float:
        return split_exponent(self.alpha)[1]

    def __call__(self, p, w):
        return self.kernel(np.asarray(p, float), np.asarray(w, float))

    def derivative(self, p, w, order: int) -> np.ndarray:
        p = np.asarray(p, float)
        w = np.asarray(w, float)
        if order == 0:
            return np.broadcast_to(self.kernel(p, w), np.broadcast(p, w).shape) * 1.0
        if self.dkernel is not None:
            try:
                out = self.dkernel(p, w, order)
                return np.broadcast_to(out, np.broadcast(p, w).shape) * 1.0
            except NotImplementedError:
                pass
        h = self.fd_step * np.finfo(float).eps ** (1.0 / (order + 4))
        direction = 1.0 if self.j == 0 else -1.0
        offsets = np.arange(order + 4, dtype=float)
        coef = _fd_weights(offsets, order)
        acc = np.zeros(np.broadcast(p, w).shape)
        for c, o in zip(coef, offsets):
            acc = acc + c * self.kernel(p + direction * o * h, w)
        return acc / (direction * h) ** order


def power_sum_kernel(j: int, alpha: float, e: float, scale: float = 1.0) -> AbelKernelSpec:
    """``K(p, w) = scale * (p + w)**e`` with analytic p-derivatives."""

    def kern(p, w):
        return scale * (p + w) ** e

    def dkern(p, w, i):
        falling = np.prod([e - q for q in range(i)])
        return scale * falling * (p + w) ** (e - i)

    return AbelKernelSpec(j, alpha, kern, dkern, name=f"{scale}*(p+w)^{e}")


def constant_kernel(j: int, alpha: float, value: float = 1.0) -> AbelKernelSpec:
    def kern(p, w):
        return np.full(np.broadcast(p, w).shape, float(value))

    def dkern(p, w, i):
        return np.zeros(np.broadcast(p, w).shape)

    return AbelKernelSpec(j, alpha, kern, dkern, name=f"{value}")


# --------------------------------------------------------------------------
# quadrature building blocks
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _cell_moments(n_cells: int, expo: float) -> tuple[np.ndarray, np.ndarray]:
    """``A[d] = int_d^{d+1} s^e (s - d) ds`` and ``B[d] = int_d^{d+1} s^e (d+1-s) ds``."""
    d = np.arange(n_cells, dtype=float)
    A = np.empty(n_cells)
    B = np.empty(n_cells)
    near = d < 8
    dn = d[near]
    i0 = ((dn + 1) ** (expo + 1) - dn ** (expo + 1)) / (expo + 1)
    i1 = ((dn + 1) ** (expo + 2) - dn ** (expo + 2)) / (expo + 2)
    A[near] = i1 - dn * i0
    B[near] = (dn + 1) * i0 - i1
    far = ~near
    if np.any(far):
        # closed forms cancel badly for distant cells; the integrand is analytic there
        t = 0.5 * (_GL_NODES + 1.0)
        s = d[far, None] + t[None, :]
        wt = 0.5 * _GL_WEIGHTS[None, :] * s**expo
        A[far] = np.sum(wt * t[None, :], axis=1)
        B[far] = np.sum(wt * (1.0 - t[None, :]), axis=1)
    return A, B


def product_weights(n: int, h: float, expo: float, j: int) -> np.ndarray:
    """Product-trapezoid weights for ``int_{B_j(p_i)} |p_i - w|^expo F(w) dw``.

    Row ``i`` integrates the weight exactly against the piecewise-linear
    interpolant of ``F`` on the uniform grid; exact for linear ``F``.
    """
    if not expo > -1:
        raise ValueError("power weight exponent must exceed -1")
    A, B = _cell_moments(max(n - 1, 1), expo)
    i = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    d = i - k
    W = np.zeros((n, n))
    left = (d >= 1)  # cell [w_k, w_{k+1}] lies at distance d-1
    W[left] += A[np.clip(d - 1, 0, n - 2)][left]
    right = (d >= 0) & (k >= 1)  # cell [w_{k-1}, w_k] lies at distance d
    W[right] += B[np.clip(d, 0, n - 2)][right]
    W *= h ** (expo + 1)
    if j == 1:
        W = W[::-1, ::-1].copy()
    return W


def trapezoid_weights(n: int, h: float, j: int) -> np.ndarray:
    """Trapezoid weights for ``int_{B_j(p_i)} F(w) dw`` as an ``n x n`` matrix."""
    W = np.tril(np.full((n, n), h))
    W[:, 0] *= 0.5
    W[np.arange(n), np.arange(n)] *= 0.5
    W[0, 0] = 0.0
    if j == 1:
        W = W[::-1, ::-1].copy()
    return W


def triangle_mask(n: int, j: int) -> np.ndarray:
    return np.tril(np.ones((n, n), bool)) if j == 0 else np.triu(np.ones((n, n), bool))


@lru_cache(maxsize=64)
def _jacobi_rule(order: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # weight t^-beta (1-t)^(beta-1) on [0, 1]; the affine map has unit Jacobian factor
    # a + b = -1 makes scipy divide 0/0 in a branch it then discards
    with np.errstate(invalid="ignore", divide="ignore"):
        x, w = special.roots_jacobi(order, beta - 1.0, -beta)
    return 0.5 * (x + 1.0), w


def jacobi_average(func, r, w, beta: float, tol: float = 1e-10, order: int = 32,
                   max_order: int = 1024, chunk: int = 2_000_000) -> np.ndarray:
    """``int_0^1 func(w + (r - w) t, w, t) t^-beta (1-t)^(beta-1) dt``.

    The Gauss-Jacobi order doubles from ``order`` until two successive
    results agree to ``tol`` (relative to the largest magnitude, floored at 1).
    """
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    shape = np.broadcast(r, w).shape
    rf = np.broadcast_to(r, shape).ravel()
    wf = np.broadcast_to(w, shape).ravel()

    def at(n):
        t, wt = _jacobi_rule(n, float(beta))
        out = np.empty(rf.size)
        step = max(1, chunk // n)
        for s0 in range(0, rf.size, step):
            rr = rf[s0:s0 + step, None]
            ww = wf[s0:s0 + step, None]
            vals = func(ww + (rr - ww) * t[None, :], ww, t[None, :])
            out[s0:s0 + step] = vals @ wt
        return out

    n = order
    prev = at(n)
    while n < max_order:
        n *= 2
        cur = at(n)
        scale = max(1.0, float(np.max(np.abs(cur)))) if cur.size else 1.0
        if cur.size == 0 or np.max(np.abs(cur - prev)) <= tol * scale:
            return cur.reshape(shape)
        prev = cur
    raise QuadratureError(
        f"Gauss-Jacobi quadrature did not reach tol={tol} by order {max_order}"
    )


# --------------------------------------------------------------------------
# forward operator and elementary steps
# --------------------------------------------------------------------------

def _kernel_on_triangle(values_fn, grid: Grid1D, j: int) -> np.ndarray:
    pts = grid.points
    mask = triangle_mask(grid.count, j)
    P = np.broadcast_to(pts[:, None], mask.shape)[mask]
    Wg = np.broadcast_to(pts[None, :], mask.shape)[mask]
    out = np.zeros(mask.shape)
    vals = values_fn(P, Wg)
    if not np.all(np.isfinite(vals)):
        raise AbelError("kernel evaluation produced non-finite values on T_j")
    out[mask] = vals
    return out


def abel_matrix(spec: AbelKernelSpec, grid: Grid1D) -> np.ndarray:
    """Dense matrix of the discretised forward operator on ``grid``."""
    W = product_weights(grid.count, grid.spacing, spec.alpha, spec.j)
    K = _kernel_on_triangle(spec, grid, spec.j)
    return W * K


def abel_forward_apply(spec: AbelKernelSpec, f, grid: Grid1D) -> np.ndarray:
    f = np.asarray(f, float)
    if f.shape != (grid.count,):
        raise ValueError(f"profile has shape {f.shape}, grid has {grid.count} points")
    if not np.all(np.isfinite(f)):
        raise ValueError("profile must be finite")
    return abel_matrix(spec, grid) @ f


def fractional_integrate(g, beta: float, j: int, grid: Grid1D) -> np.ndarray:
    """Abel integral ``int_{D_j(r)} g(p) [(-1)^j (r - p)]^(beta - 1) dp`` at each node."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    g = np.asarray(g, float)
    return product_weights(grid.count, grid.spacing, beta - 1.0, j) @ g


def c_beta_diag(spec: AbelKernelSpec, r) -> np.ndarray:
    beta = spec.beta
    if beta == 0:
        raise ValueError("c_beta is only defined for beta in (0, 1)")
    r = np.asarray(r, float)
    return np.pi * spec(r, r) / np.sin(np.pi * beta)


def L_beta_eval(spec: AbelKernelSpec, r, omega, tol: float = 1e-10, order: int = 32):
    """``L_beta(r, w) = int_0^1 K(w + (r-w) t, w) t^-beta (1-t)^(beta-1) dt``."""
    beta = spec.beta
    if beta == 0:
        raise ValueError("L_beta is only defined for beta in (0, 1)")
    return jacobi_average(lambda p, w, t: spec(p, w), r, omega, beta, tol=tol, order=order)


def differentiate_m(g, m_int: int, grid: Grid1D, smooth: bool = False) -> np.ndarray:
    """``m_int``-th derivative from one finite-difference stencil per node.

    Stencils have ``m_int + 2`` points (rounded up to odd), centred in the
    interior and shifted inward at the ends, so every node is second-order
    accurate.  A single stencil avoids the boundary error growth of chained
    first differences.  With ``smooth=True`` the samples first pass through
    a local cubic (window 7) Savitzky-Golay filter.
    """
    if m_int < 1:
        raise ValueError("derivative order must be positive")
    width = m_int + 2 + (m_int % 2 == 0)
    n = grid.count
    if n <= 2 * m_int + 1 or n < width:
        raise ValueError(f"grid of {n} points too coarse for {m_int} derivatives")
    data = np.asarray(g, float)
    if smooth and n >= 7:
        data = savgol_filter(data, 7, 3, mode="interp")
    half = width // 2
    coef = _fd_weights(np.arange(-half, half + 1, dtype=float), m_int)
    out = np.empty(n)
    out[half:n - half] = sum(
        c * data[k:n - width + 1 + k] for k, c in enumerate(coef)
    )
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - width)
        offs = np.arange(start, start + width) - i
        out[i] = _fd_weights(offs.astype(float), m_int) @ data[start:start + width]
    return out / grid.spacing**m_int


# --------------------------------------------------------------------------
# second-kind equations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangularKernelMatrix:
    """Samples ``K2(r_i, w_k)`` of a bounded kernel, zero outside ``T_j``."""

    grid: Grid1D
    values: np.ndarray
    j: int

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        n = self.grid.count
        if vals.shape != (n, n):
            raise ValueError(f"kernel matrix must be {n}x{n}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("second-kind kernel must be bounded (finite)")
        vals[~triangle_mask(n, self.j)] = 0.0
        object.__setattr__(self, "values", vals)


def second_kind_solve(kernel2: TriangularKernelMatrix, h, method: str = "substitution",
                      tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Solve ``h(r) = int_{B_j(r)} K2(r, w) f(w) dw + f(r)`` on the grid.

    The integral uses the trapezoid rule, giving a triangular system.
    ``method="neumann"`` iterates ``f <- h - K2 f`` instead; the discrete
    operator is triangular so the iteration converges, but a run of 50
    growing updates is reported as divergence.
    """
    h = np.asarray(h, float)
    grid = kernel2.grid
    if h.shape != (grid.count,) or not np.all(np.isfinite(h)):
        raise ValueError("right-hand side must be finite and match the grid")
    op = trapezoid_weights(grid.count, grid.spacing, kernel2.j) * kernel2.values
    if method == "substitution":
        return linalg.solve_triangular(np.eye(grid.count) + op, h, lower=kernel2.j == 0)
    if method != "neumann":
        raise ValueError(f"unknown second-kind method {method!r}")
    f = h.copy()
    prev_step = np.inf
    growing = 0
    for it in range(max_iter):
        f_new = h - op @ f
        step = np.linalg.norm(f_new - f)
        f = f_new
        if step <= tol * max(np.linalg.norm(f), np.finfo(float).tiny):
            log.debug("Neumann iteration converged after %d steps", it + 1)
            return f
        growing = growing + 1 if step > prev_step else 0
        if growing >= 50:
            raise NeumannDivergenceError(
                "Neumann updates grew for 50 consecutive iterations; the discrete "
                "kernel's spectral radius is not below one at this resolution"
            )
        prev_step = step
    raise NeumannDivergenceError(f"Neumann iteration did not converge in {max_iter} steps")


# --------------------------------------------------------------------------
# kernel validation and the full solve
# --------------------------------------------------------------------------

@dataclass
class KernelReport:
    passed: bool
    failures: list = field(default_factory=list)
    checked_points: int = 0

    def summary(self) -> str:
        if self.passed:
            return f"kernel validation passed ({self.checked_points} points)"
        lines = [f"kernel validation FAILED ({len(self.failures)} problems)"]
        for cond, p, w, val in self.failures[:10]:
            lines.append(f"  {cond} at (p={p:.6g}, w={w:.6g}): {val!r}")
        return "\n".join(lines)


def validate_kernel(spec: AbelKernelSpec, grid: Grid1D, samples: int = 41) -> KernelReport:
    """Numerical check of the solvability hypotheses on a lattice of ``T_j``.

    Condition (1): ``K`` and ``G_i = [(-1)^j (p-w)]^(i-1) K^(i)`` finite for
    ``1 <= i <= m+1``.  Condition (2): ``min |K(p,p)| > 1e-10 * max |K(p,p)|``.
    """
    pts = np.linspace(grid.lo, grid.hi, samples)
    mask = triangle_mask(samples, spec.j)
    P = np.broadcast_to(pts[:, None], mask.shape)[mask]
    W = np.broadcast_to(pts[None, :], mask.shape)[mask]
    u = (-1.0) ** spec.j * (P - W)
    failures = []
    with np.errstate(all="ignore"):
        K = spec(P, W) * np.ones_like(P)
        for idx in np.flatnonzero(~np.isfinite(K)):
            failures.append(("condition (1): K finite", P[idx], W[idx], K[idx]))
        for i in range(1, spec.m_int + 2):
            G = u ** (i - 1) * spec.derivative(P, W, i)
            for idx in np.flatnonzero(~np.isfinite(G)):
                failures.append((f"condition (1): G_{i} finite", P[idx], W[idx], G[idx]))
        diag = np.abs(spec(pts, pts) * np.ones_like(pts))
    if not np.all(np.isfinite(diag)):
        bad = np.flatnonzero(~np.isfinite(diag))
        failures += [("condition (2): K(p,p) finite", pts[b], pts[b], diag[b]) for b in bad]
    else:
        floor = 1e-10 * diag.max()
        if diag.max() == 0 or diag.min() <= floor:
            for b in np.flatnonzero(diag <= floor):
                failures.append(("condition (2): K(p,p) != 0", pts[b], pts[b], diag[b]))
    return KernelReport(not failures, failures, P.size)


@dataclass
class AbelSolveOptions:
    method: str = "substitution"
    smooth: bool = False
    pin_endpoint: bool = True
    quad_tol: float = 1e-10
    quad_order: int = 32
    neumann_tol: float = 1e-12
    neumann_max_iter: int = 10_000
    validate: bool = True
    # defect-correction passes against the discrete forward operator
    refine: int = 0


def reduced_kernel(spec: AbelKernelSpec, p, w) -> tuple[np.ndarray, np.ndarray]:
    """``M = sum_i c_{i,m} u^i K^(i)`` and ``dM/dp`` with ``u = (-1)^j (p - w)``.

    After ``m`` differentiations ``g^(m)(p) = int M(p,w) u^-beta f(w) dw``.
    """
    m, j = spec.m_int, spec.j
    c = leibniz_coeffs(spec.alpha, j, m)
    u = (-1.0) ** j * (np.asarray(p, float) - np.asarray(w, float))
    derivs = [spec.derivative(p, w, i) for i in range(m + 2)]
    M = np.zeros(np.broadcast(p, w).shape)
    dM = np.zeros_like(M)
    sgn = (-1.0) ** j
    for i in range(m + 1):
        M = M + c[i] * u**i * derivs[i]
        dM = dM + c[i] * u**i * derivs[i + 1]
        if i:
            dM = dM + c[i] * i * sgn * u ** (i - 1) * derivs[i]
    return M, dM


def second_kind_system(spec: AbelKernelSpec, grid: Grid1D, opts: AbelSolveOptions | None = None):
    """Kernel ``K2`` and diagonal scale ``c`` of the reduced second-kind equation.

    ``f + int K2 f = (-1)^j rhs / c`` where ``rhs`` is the final derivative
    of the (fractionally integrated) data.
    """
    opts = opts or AbelSolveOptions()
    pts = grid.points
    beta, j = spec.beta, spec.j
    mask = triangle_mask(grid.count, j)
    R = np.broadcast_to(pts[:, None], mask.shape)[mask]
    Wg = np.broadcast_to(pts[None, :], mask.shape)[mask]
    N = np.zeros(mask.shape)
    if beta > 0:
        diag = np.pi * reduced_kernel(spec, pts, pts)[0] / np.sin(np.pi * beta)
        N[mask] = jacobi_average(
            lambda p, w, t: t * reduced_kernel(spec, p, w)[1],
            R, Wg, beta, tol=opts.quad_tol, order=opts.quad_order,
        )
    else:
        diag = reduced_kernel(spec, pts, pts)[0]
        N[mask] = reduced_kernel(spec, R, Wg)[1]
    if not np.all(np.isfinite(N)) or not np.all(np.isfinite(diag)):
        raise AbelError("non-finite entries in the reduced second-kind kernel")
    sgn = (-1.0) ** j
    return TriangularKernelMatrix(grid, sgn * N / diag[:, None], j), diag


def abel_solve(spec: AbelKernelSpec, g, grid: Grid1D, opts: AbelSolveOptions | None = None,
               system=None) -> np.ndarray:
    """Recover ``f`` on ``grid`` from samples of ``g``.

    ``system`` may carry a precomputed ``second_kind_system`` result when the
    same kernel is solved for many right-hand sides.  ``opts.refine`` adds
    defect-correction passes ``f += solve(g - A f)`` with ``A`` the product
    quadrature forward matrix; each pass pulls ``f`` towards the solution of
    the discrete forward model, which also amplifies noise in ``g``.
    """
    opts = opts or AbelSolveOptions()
    g = np.asarray(g, float)
    if g.shape != (grid.count,) or not np.all(np.isfinite(g)):
        raise ValueError("data must be finite and match the grid")
    if opts.validate:
        report = validate_kernel(spec, grid)
        if not report.passed:
            raise KernelValidationError(report)
    kernel2, diag = system if system is not None else second_kind_system(spec, grid, opts)
    f = _solve_once(spec, g, grid, opts, kernel2, diag)
    if opts.refine > 0:
        A = abel_matrix(spec, grid)
        for _ in range(opts.refine):
            f = f + _solve_once(spec, g - A @ f, grid, opts, kernel2, diag)
    return f


def _solve_once(spec, g, grid, opts, kernel2, diag):
    m, beta, j = spec.m_int, spec.beta, spec.j
    # I^beta commutes with the m derivatives because g^(k) vanishes at the
    # degenerate endpoint for k < m; integrating first leaves a smooth function
    data = fractional_integrate(g, beta, j, grid) if beta > 0 else g.copy()
    rhs = differentiate_m(data, m + 1, grid, smooth=opts.smooth)
    h = (-1.0) ** j * rhs / diag
    f = second_kind_solve(kernel2, h, opts.method, opts.neumann_tol, opts.neumann_max_iter)
    if opts.pin_endpoint and grid.count >= 4:
        # the continuum equation carries no information at the degenerate endpoint
        if j == 0:
            f[0] = 3 * f[1] - 3 * f[2] + f[3]
        else:
            f[-1] = 3 * f[-2] - 3 * f[-3] + f[-4]
    return f
