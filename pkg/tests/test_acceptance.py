"""End-to-end acceptance checks; each test records one PASS/FAIL line.

The reconstruction tables at m=257 use the frozen per-cell lambda values in
``experiments.CALIBRATED_LAMBDA`` (one solve per cell).  Set
``ABELRADON_FULL_SWEEP=1`` to rerun the full 13-point lambda sweep per cell
instead (about three hours on one core).
"""

import math
import os

import numpy as np
import pytest
from scipy import integrate, sparse

from abelradon.abel import (AbelSolveOptions, L_beta_eval, abel_forward_apply, abel_solve,
                            c_beta_diag, constant_kernel, leibniz_coeffs, power_sum_kernel)
from abelradon.experiments import (ExperimentManifest, reconstruct, simulate, table_manifests)
from abelradon.grids import Grid1D, ImageGrid, Sinogram
from abelradon.phantoms import (default_annulus, default_ellipses, default_smooth, delta_error,
                                make_phantom, reflection_correlation)
from abelradon.radon import CurveSpec, NoiseSpec, ShiftInvariantOperator, default_axes
from abelradon.solvers import ReconConfig, cgls_tikhonov, tv_gradient, tv_objective, tv_reconstruct
from abelradon.spectral import (H_2d, SupportBand, alpha_n, band_grid, ellipse_abel_spec,
                                gegenbauer, invert_R2d, kernel_nd, sinogram_spectrum,
                                sphere_area, spherical_means_kernel)

FULL_SWEEP = os.environ.get("ABELRADON_FULL_SWEEP") == "1"

# published reconstruction errors; columns (E0 1%, E0 5%, E1 1%, E1 5%)
CGLS_REF = {"annulus": (0.27, 0.64, 0.57, 0.75), "ellipses": (0.27, 0.73, 0.54, 0.88)}
TV_REF = {"annulus": (0.17, 0.34, 0.21, 0.54), "ellipses": (0.09, 0.23, 0.09, 0.36)}
COLUMNS = ((0, 0.01), (0, 0.05), (1, 0.01), (1, 0.05))


def _run_table(m, methods):
    sims, out = {}, {}
    for man in table_manifests(m, methods, sweep=FULL_SWEEP):
        key = (man.phantom, man.curve, man.noise)
        if key not in sims:
            sims[key] = simulate(man)
        res = reconstruct(man, sims[key])
        out[(man.method, man.phantom.kind, man.curve.j, man.noise.gamma)] = res.delta
    return out


@pytest.fixture(scope="module")
def table257():
    return _run_table(257, ("cgls", "tv"))


@pytest.fixture(scope="module")
def table129():
    return _run_table(129, ("cgls",))


def _band(table, method, ref, tol):
    bad, cells = [], []
    for kind, row in ref.items():
        for (j, g), r in zip(COLUMNS, row):
            d = table[(method, kind, j, g)]
            cells.append(f"{kind}/E{j}/{round(g * 100)}%={d:.3f}(ref {r:.2f})")
            if abs(d - r) > tol:
                bad.append(cells[-1])
    return bad, cells


def _orderings(table, method="cgls"):
    bad = []
    for kind in ("annulus", "ellipses"):
        for j in (0, 1):
            if not table[(method, kind, j, 0.01)] < table[(method, kind, j, 0.05)]:
                bad.append(f"{kind}/E{j}: 1% !< 5%")
        for g in (0.01, 0.05):
            if not table[(method, kind, 0, g)] < table[(method, kind, 1, g)]:
                bad.append(f"{kind}/{round(g * 100)}%: E0 !< E1")
    return bad


# ------------------------------------------------------------------ 1. CGLS

@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="at 5% noise the lambda-optimal CGLS errors are 0.13-0.37 "
                   "below the published values (see the decisions ledger)")
def test_c1_cgls_table_within_band(table257, acceptance_report):
    bad, cells = _band(table257, "cgls", CGLS_REF, 0.15)
    acceptance_report("1a CGLS table within +-0.15 (m=257)", not bad,
                      "out of band: " + "; ".join(bad) if bad else "; ".join(cells))
    assert not bad, bad


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="ellipses at 5% noise: E0 0.515 vs E1 0.510 at the "
                   "lambda-optimal weights (see the decisions ledger)")
def test_c1_cgls_orderings(table257, acceptance_report):
    bad = _orderings(table257)
    acceptance_report("1b CGLS orderings 1%<5% and E0<E1 (m=257)", not bad, "; ".join(bad))
    assert not bad, bad


@pytest.mark.slow
def test_c1_cgls_orderings_desk_scale(table129, acceptance_report):
    bad = _orderings(table129)
    acceptance_report("1c CGLS orderings 1%<5% and E0<E1 (m=129)", not bad, "; ".join(bad))
    assert not bad, bad


# -------------------------------------------------------------------- 2. TV

@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="annulus at 5% noise: the lambda-optimal TV errors are "
                   "0.18-0.23 below the published values (see the decisions ledger)")
def test_c2_tv_table_within_band(table257, acceptance_report):
    bad, cells = _band(table257, "tv", TV_REF, 0.12)
    acceptance_report("2a TV table within +-0.12 (m=257)", not bad,
                      "out of band: " + "; ".join(bad) if bad else "; ".join(cells))
    assert not bad, bad


@pytest.mark.slow
def test_c2_tv_beats_cgls(table257, acceptance_report):
    bad = []
    for kind in ("annulus", "ellipses"):
        for j, g in COLUMNS:
            tv, cg = table257[("tv", kind, j, g)], table257[("cgls", kind, j, g)]
            if not tv < cg:
                bad.append(f"{kind}/E{j}/{round(g * 100)}%: tv {tv:.3f} >= cgls {cg:.3f}")
    acceptance_report("2b TV delta < CGLS delta in every cell (m=257)", not bad, "; ".join(bad))
    assert not bad, bad


# ------------------------------------------------------------ 3. null space

def _op(j, m, two_sided):
    p, y = default_axes(m)
    return ShiftInvariantOperator(CurveSpec.for_orientation(j), ImageGrid(m), p, y, two_sided)


def _power_norm(op, iters=50):
    v = np.random.default_rng(0).standard_normal(op.shape[1])
    for _ in range(iters):
        v = op.rmatvec(op.matvec(v))
        n = np.linalg.norm(v)
        v /= n
    return math.sqrt(n)


def test_c3_null_space_and_even_images(acceptance_report):
    m = 65
    worst_odd = worst_even = 0.0
    for j in (0, 1):
        two, one = _op(j, m, True), _op(j, m, False)
        norm = _power_norm(two)
        rng = np.random.default_rng(30 + j)
        for _ in range(10):
            z = rng.standard_normal((m, m))
            odd = z - z[::-1]
            worst_odd = max(worst_odd, np.linalg.norm(two.matvec(odd.ravel()))
                            / (norm * np.linalg.norm(odd)))
            even = (z + z[::-1]).ravel()
            half = 0.5 * two.matvec(even)
            worst_even = max(worst_even, np.linalg.norm(one.matvec(even) - half) / np.linalg.norm(half))
    ok = worst_odd <= 1e-10 and worst_even <= 1e-10
    acceptance_report("3 null space: odd images invisible, even images one- vs two-sided", ok,
                      f"odd {worst_odd:.1e}, even {worst_even:.1e}")
    assert ok


# -------------------------------------------------------- 4. Abel oracle suite

def _kernels(j, alpha):
    return {"1": constant_kernel(j, alpha), "p+w": power_sum_kernel(j, alpha, 1.0),
            "sqrt(p+w)": power_sum_kernel(j, alpha, 0.5)}


def test_c4_abel_round_trips(acceptance_report):
    f_fun = lambda x: np.exp(-((x - 2.0) ** 2)) * (1 + 0.5 * np.sin(2 * x))  # noqa: E731
    bad, worst = [], 0.0
    for alpha in (-0.5, 0.0, 0.5, 1.0, 1.5):
        for j in (0, 1):
            for name, spec in _kernels(j, alpha).items():
                errs = []
                for n in (129, 257, 513):
                    grid = Grid1D(1.0, 3.0, n)
                    f = f_fun(grid.points)
                    g = abel_forward_apply(spec, f, grid)
                    fr = abel_solve(spec, g, grid, AbelSolveOptions())
                    errs.append(np.linalg.norm(fr - f) / np.linalg.norm(f))
                worst = max(worst, errs[-1])
                if not (errs[-1] <= 2e-2 and errs[0] > errs[1] > errs[2]):
                    bad.append(f"alpha={alpha} j={j} K={name}: " + ",".join(f"{e:.1e}" for e in errs))
    acceptance_report("4 Abel round trips <= 2e-2 at 513, monotone in count", not bad,
                      "; ".join(bad) or f"worst {worst:.1e}")
    assert not bad, bad


# ---------------------------------------------------- 5. spectral cross-check

def _smooth_setup(m):
    ps = default_smooth(m)
    ph = make_phantom(ps)
    p, y = default_axes(m)
    op = ShiftInvariantOperator(CurveSpec("ellipse"), ImageGrid(m), p, y, two_sided=False)
    # explicit sparse matrix, not the FFT apply used by the inversion tests
    A = op.to_sparse()
    sino = Sinogram(p, y, A.matvec(ph.vector).reshape(p.count, y.count), 0, 2.0)
    lo, hi = ps.support_x2
    return ps, ph, sino, SupportBand(lo - 1.5, hi + 1.5)


def _spectral_mismatch(m):
    """Energy-weighted relative L2 mismatch, over frequencies up to the
    cutoff, between the y1-DFT of the discrete sinogram and the per-frequency
    forward Abel operator applied to the phantom's own y1-DFT."""
    ps, ph, sino, band = _smooth_setup(m)
    xi, G = sinogram_spectrum(sino)
    grid, sel = band_grid(sino.p_axis, band)
    sm = ps.smooth
    y = sino.y_axis.points
    u = (y[:, None] - sm.center[0]) / sm.widths[0]
    v = (grid.points[None, :] - sm.center[1]) / sm.widths[1]
    f = np.exp(-0.5 * (u**2 + v**2))
    f[:, np.abs(v[0]) > sm.cut] = 0.0
    f[np.abs(y) > m / 2] = 0.0
    _, F = sinogram_spectrum(Sinogram(grid, sino.y_axis, f.T, 0, sino.s))
    num = den = 0.0
    for k in range(xi.size):
        if xi[k] > 0.8 * np.pi:
            break
        spec = ellipse_abel_spec(0, sino.s, float(xi[k]))
        pred = abel_forward_apply(spec, F[:, k].real, grid) + 1j * abel_forward_apply(spec, F[:, k].imag, grid)
        num += np.linalg.norm(pred - G[sel, k]) ** 2
        den += np.linalg.norm(G[sel, k]) ** 2
    return math.sqrt(num / den)


def test_c5_spectral_cross_validation(acceptance_report):
    mismatch = _spectral_mismatch(129)
    deltas = {}
    for m in (129, 257):
        _, ph, sino, band = _smooth_setup(m)
        deltas[m] = delta_error(invert_R2d(sino, band, ph.grid).image, ph)
    ok = mismatch <= 2e-2 and deltas[129] <= 0.1 and deltas[257] < deltas[129]
    acceptance_report("5 spectral: DFT vs Abel forward <= 2%, inversion delta <= 0.1, improves", ok,
                      f"mismatch {mismatch:.2%}, delta129 {deltas[129]:.3f}, delta257 {deltas[257]:.3f}")
    assert ok


# ----------------------------------------------------- 6. diagonal identities

def _diag_samples():
    rng = np.random.default_rng(60)
    return [(rng.uniform(0.5, 50), rng.uniform(0.3, 4), rng.uniform(0, 3)) for _ in range(50)]


def test_c6_diagonal_identities(acceptance_report):
    worst = {"H": 0.0, "K": 0.0, "K_l": 0.0, "L": 0.0}
    for p, s, xi in _diag_samples():
        for j in (0, 1):
            worst["H"] = max(worst["H"], abs(H_2d(j, s, xi, p, p) / (math.sqrt(s / 2) * math.sqrt(p)) - 1))
            for n in (3, 4, 5):
                a = (n - 3) / 2
                K = float(np.prod(kernel_nd(j, s, xi, n, p, p), axis=0))
                worst["K"] = max(worst["K"], abs(K / (2**a * sphere_area(n - 2) * math.sqrt(s) * p ** (a + 1)) - 1))
        for n in (3, 4, 5, 6):
            for l in range(5):
                a, g = (n - 3) / 2, (n - 2) / 2
                ref = 2**a * s ** (2 * a + 0.5) * gegenbauer(l, g, 1.0)
                worst["K_l"] = max(worst["K_l"], abs(float(spherical_means_kernel(l, n, s, s)) / ref - 1))
    for alpha in (-0.5, 0.5, 1.5, 0.25):
        for j in (0, 1):
            spec = power_sum_kernel(j, alpha, 0.5)
            r = np.linspace(1.0, 3.0, 7)
            worst["L"] = max(worst["L"], float(np.max(np.abs(L_beta_eval(spec, r, r) / c_beta_diag(spec, r) - 1))))
    ok = all(v <= 1e-8 for v in worst.values())
    acceptance_report("6 diagonal identities (H with sqrt(s/2)*sqrt(p))", ok,
                      ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


@pytest.mark.xfail(strict=True, reason="the linear-in-p diagonal law for H holds only at p = 1; "
                   "the kernel's diagonal is sqrt(s/2)*sqrt(p) (see decisions ledger)")
def test_c6_literal_linear_H_diagonal(acceptance_report):
    worst = max(abs(H_2d(j, s, xi, p, p) / (math.sqrt(s / 2) * p) - 1)
                for p, s, xi in _diag_samples() for j in (0, 1))
    acceptance_report("6 literal H diagonal sqrt(s/2)*p", worst <= 1e-8, f"worst rel {worst:.2f}")
    assert worst <= 1e-8


# --------------------------------------------------------- 7. coefficients

def test_c7_coefficient_oracle(acceptance_report):
    offs = np.arange(-5, 6, dtype=float)
    worst_l = 0.0
    w0 = 1.1
    for j in (0, 1):
        p0 = 2.0 if j == 0 else 0.4
        for alpha in (-0.5, 0.5, 1.5, 2.25):
            K = lambda p: np.exp(p / 3) * np.cos(w0)  # noqa: E731
            H = lambda p: ((-1) ** j * (p - w0)) ** alpha * K(p)  # noqa: E731
            u = (-1) ** j * (p0 - w0)
            for k in range(4):
                c = leibniz_coeffs(alpha, j, k)
                exact = sum(c[i] * u ** (alpha - (k - i)) * (1 / 3) ** i * K(p0) for i in range(k + 1))
                if k == 0:
                    fd = H(p0)
                else:
                    rhs = np.zeros(offs.size)
                    rhs[k] = math.factorial(k)
                    wts = np.linalg.solve(np.vander(offs, increasing=True).T, rhs)
                    fd = sum(wt * H(p0 + o * 1e-2) for wt, o in zip(wts, offs)) / 1e-2**k
                worst_l = max(worst_l, abs(fd / exact - 1))
    worst_a = 0.0
    for n in range(3, 8):
        ref = 2 * math.pi
        for k in range(1, n - 3):
            ref *= integrate.quad(lambda t: math.sin(t) ** k, 0, math.pi, epsabs=0, epsrel=1e-13)[0]
        worst_a = max(worst_a, abs(alpha_n(n) / ref - 1) if n > 3 else abs(alpha_n(3) / 2 - 1))
    ok = worst_l <= 1e-5 and worst_a <= 1e-10
    acceptance_report("7 Leibniz coefficients vs FD, alpha_n vs quadrature", ok,
                      f"leibniz {worst_l:.1e}, alpha_n {worst_a:.1e}")
    assert ok


# -------------------------------------------------------- 8. solver contracts

class _Dense:
    def __init__(self, M):
        self.M, self.shape = M, M.shape

    def matvec(self, x):
        return self.M @ x

    def rmatvec(self, y):
        return self.M.T @ y


def test_c8_solver_contracts(acceptance_report):
    detail = {}
    worst_adj = 0.0
    for j in (0, 1):
        op = _op(j, 65, True)
        rng = np.random.default_rng(80 + j)
        x, y = rng.standard_normal(op.shape[1]), rng.standard_normal(op.shape[0])
        Ax = op.matvec(x)
        worst_adj = max(worst_adj, abs(Ax @ y - x @ op.rmatvec(y)) / (np.linalg.norm(Ax) * np.linalg.norm(y)))
    detail["adjoint"] = worst_adj

    rng = np.random.default_rng(81)
    M = sparse.random(50, 50, density=0.2, random_state=rng).toarray() + np.eye(50)
    b = rng.standard_normal(50)
    ref = np.linalg.solve(M.T @ M + 0.1 * np.eye(50), M.T @ b)
    x = cgls_tikhonov(_Dense(M), b, ReconConfig(lam=0.1, max_iters=500, tol=1e-14)).x
    detail["cgls"] = np.linalg.norm(x - ref) / np.linalg.norm(ref)

    A = _Dense(rng.standard_normal((60, 64)))
    bb = rng.standard_normal(60)
    cfg = ReconConfig(lam=0.5, beta_smooth=0.1)
    x0 = rng.standard_normal(64)
    g = tv_gradient(A, bb, x0, cfg)
    worst_g = 0.0
    for k in rng.choice(64, 20, replace=False):
        e = np.zeros(64)
        h = 1e-6 * max(1.0, abs(x0[k]))
        e[k] = h
        fd = (tv_objective(A, bb, x0 + e, cfg) - tv_objective(A, bb, x0 - e, cfg)) / (2 * h)
        worst_g = max(worst_g, abs(fd - g[k]) / max(abs(g[k]), 1e-3 * np.abs(g).max()))
    detail["tv_grad"] = worst_g

    res = tv_reconstruct(A, bb, ReconConfig(lam=0.5, beta_smooth=0.1, max_iters=200))
    detail["tv_rise"] = float(max(np.max(np.diff(res.log.objectives)), 0.0))
    detail["min_x"] = float(res.x.min())
    ok = (detail["adjoint"] <= 1e-12 and detail["cgls"] <= 1e-8 and detail["tv_grad"] <= 1e-5
          and detail["tv_rise"] == 0.0 and detail["min_x"] >= 0.0)
    acceptance_report("8 solver contracts", ok, ", ".join(f"{k} {v:.1e}" for k, v in detail.items()))
    assert ok


# --------------------------------------------------------- reflection artifact

def test_reflection_artifact(acceptance_report):
    worst = 1.0
    for ps in (default_annulus(129), default_ellipses(129)):
        for j in (0, 1):
            man = ExperimentManifest(ps, CurveSpec.for_orientation(j), NoiseSpec(0.0, 0.0, 11),
                                     ReconConfig(lam=0.0, max_iters=300, tol=1e-8), "cgls", "out", False)
            sim = simulate(man)
            out = reconstruct(man, sim)
            worst = min(worst, reflection_correlation(out.image, sim.phantom))
    acceptance_report("reflection artifact: lower-half correlation with mirrored truth >= 0.5",
                      worst >= 0.5, f"min correlation {worst:.3f}")
    assert worst >= 0.5
