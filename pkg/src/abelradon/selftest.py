"""Fast invariant suite behind ``abelradon selftest``.

Every check is deterministic (fixed seeds) and returns the measured
quantity next to its bound, so two runs print identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .abel import (abel_forward_apply, abel_solve, c_beta_diag, constant_kernel,
                   leibniz_coeffs, power_sum_kernel, L_beta_eval)
from .grids import Grid1D, ImageGrid, SparseOperator
from .radon import CurveSpec, ShiftInvariantOperator, default_axes
from .solvers import ReconConfig, cgls_tikhonov
from .spectral import (H_2d, alpha_n, gegenbauer, kernel_nd, sphere_area,
                       spherical_means_kernel)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.bound)


def _small_operator(j: int, m: int = 33, two_sided: bool = True) -> ShiftInvariantOperator:
    p_axis, y_axis = default_axes(m)
    return ShiftInvariantOperator(CurveSpec.for_orientation(j), ImageGrid(m), p_axis, y_axis, two_sided)


def check_adjoint(op) -> float:
    rng = np.random.default_rng(1)
    x = rng.standard_normal(op.shape[1])
    y = rng.standard_normal(op.shape[0])
    Ax = op.matvec(x)
    return abs(Ax @ y - x @ op.rmatvec(y)) / (np.linalg.norm(Ax) * np.linalg.norm(y))


def check_null_space(op) -> float:
    rng = np.random.default_rng(2)
    m = math.isqrt(op.shape[1])
    z = rng.standard_normal((m, m))
    odd = z - z[::-1]
    scale = np.linalg.norm(op.matvec(np.abs(odd).ravel()))
    return float(np.linalg.norm(op.matvec(odd.ravel())) / scale)


def check_diagonals() -> float:
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        p, s, xi = rng.uniform(0.5, 40), rng.uniform(0.5, 4), rng.uniform(0, 2)
        for j in (0, 1):
            worst = max(worst, abs(H_2d(j, s, xi, p, p) / (math.sqrt(s / 2) * math.sqrt(p)) - 1))
            for n in (3, 4, 5):
                a = (n - 3) / 2
                K = np.prod(kernel_nd(j, s, xi, n, p, p), axis=0)
                ref = 2**a * sphere_area(n - 2) * math.sqrt(s) * p ** (a + 1)
                worst = max(worst, abs(K / ref - 1))
        for n, l in ((3, 2), (4, 3), (5, 1)):
            a, g = (n - 3) / 2, (n - 2) / 2
            ref = 2**a * s ** (2 * a + 0.5) * gegenbauer(l, g, 1.0)
            worst = max(worst, abs(spherical_means_kernel(l, n, s, s) / ref - 1))
    spec = power_sum_kernel(0, 0.5, 0.5)
    r = np.linspace(1.0, 3.0, 5)
    Lrr = L_beta_eval(spec, r, r)
    worst = max(worst, float(np.max(np.abs(Lrr / c_beta_diag(spec, r) - 1))))
    return worst


def check_leibniz() -> float:
    """``d^k/dp^k [u^alpha K]`` by the coefficient expansion vs finite differences."""
    worst = 0.0
    K = lambda p, w: np.sqrt(p + w)  # noqa: E731
    dK = [lambda p, w, i=i: np.prod([0.5 - q for q in range(i)]) * (p + w) ** (0.5 - i)
          for i in range(4)]
    p0, w0 = 2.3, 0.7
    for alpha in (0.5, 1.5, 2.5):
        for k in range(4):
            c = leibniz_coeffs(alpha, 0, k)
            u = p0 - w0
            exact = sum(c[i] * u ** (alpha - k + i) * dK[i](p0, w0) for i in range(k + 1))
            h = 1e-2
            f = lambda p: (p - w0) ** alpha * K(p, w0)  # noqa: E731
            if k == 0:
                fd = f(p0)
            else:
                # 8th-order central stencil for the k-th derivative
                offs = np.arange(-5, 6, dtype=float)
                V = np.vander(offs, increasing=True).T
                rhs = np.zeros(offs.size)
                rhs[k] = math.factorial(k)
                wts = np.linalg.solve(V, rhs)
                fd = sum(wt * f(p0 + o * h) for wt, o in zip(wts, offs)) / h**k
            worst = max(worst, abs(fd / exact - 1))
    return worst


def check_alpha_n() -> float:
    worst = 0.0
    for n in range(3, 8):
        integrand = 2 * math.pi
        for i in range(1, n - 3):
            integrand *= integrate.quad(lambda t, i=i: math.sin(t) ** i, 0, math.pi,
                                        epsabs=0, epsrel=1e-13)[0]
        worst = max(worst, abs(alpha_n(n) / (integrand if n > 3 else 2.0) - 1))
    return worst


def check_round_trip() -> float:
    grid = Grid1D(1.0, 3.0, 129)
    x = grid.points
    f = np.exp(-((x - 2.0) ** 2)) * np.sin(x)
    worst = 0.0
    for j in (0, 1):
        for spec in (constant_kernel(j, -0.5), power_sum_kernel(j, 0.5, 1.0)):
            g = abel_forward_apply(spec, f, grid)
            fr = abel_solve(spec, g, grid)
            worst = max(worst, np.linalg.norm(fr - f) / np.linalg.norm(f))
    return worst


def check_cgls() -> float:
    rng = np.random.default_rng(4)
    M = sp.random(50, 50, density=0.3, random_state=5) + sp.eye(50)
    A = SparseOperator(M)
    b = rng.standard_normal(50)
    res = cgls_tikhonov(A, b, ReconConfig(lam=0.1, max_iters=500, tol=1e-14))
    D = A.toarray()
    ref = np.linalg.solve(D.T @ D + 0.1 * np.eye(50), D.T @ b)
    return float(np.linalg.norm(res.x - ref) / np.linalg.norm(ref))


def run_checks(operator_factory: Callable[[int], object] = _small_operator) -> list[CheckResult]:
    out = []
    for j in (0, 1):
        op = operator_factory(j)
        out.append(CheckResult(f"adjoint identity E{j}", check_adjoint(op), 1e-12))
        out.append(CheckResult(f"odd-image null space E{j}", check_null_space(op), 1e-10))
    out += [
        CheckResult("diagonal identities", check_diagonals(), 1e-8),
        CheckResult("Leibniz coefficients vs finite differences", check_leibniz(), 1e-5),
        CheckResult("alpha_n vs quadrature", check_alpha_n(), 1e-10),
        CheckResult("Abel round trip (129 samples)", check_round_trip(), 2e-2),
        CheckResult("CGLS vs dense normal equations", check_cgls(), 1e-8),
    ]
    return out


def format_report(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'value':>10}  {'bound':>8}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.value:10.3e}  {r.bound:8.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} passed")
    return "\n".join(lines)
