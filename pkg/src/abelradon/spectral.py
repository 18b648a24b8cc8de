"""Fourier-slice inversion of the ellipse/hyperbola transforms and the Abel
kernel families that arise after a Fourier transform in the centre variable.

In 2-D, transforming ``R_j f(p, y1)`` in ``y1`` gives, for every frequency
``xi``, a weakly singular Volterra equation in the depth variable::

    R_hat(p, xi) = int_{B_j(p)} 2 H_j(xi, p, x2) / sqrt((-1)^j (p - x2)) f_hat(xi, x2) dx2

with ``H_j = cos(xi sqrt(s) sqrt(Q)) sqrt(Q + s x2^2) / sqrt(p + x2)`` and
``Q = (-1)^j (p^2 - x2^2)``.  The factor 2 collects the two arc points
``x1 = +-sqrt(s Q)``.  In n dimensions the sphere integral over directions
gives a Bessel-type factor and a generalized Abel equation with
``alpha = (n-3)/2``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .abel import (AbelError, AbelKernelSpec, AbelSolveOptions, abel_solve,
                   second_kind_system, triangle_mask)
from .grids import Grid1D, Image, ImageGrid, Sinogram

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ 2-D kernel

def _q(j, p, x2):
    return (-1.0) ** j * (p * p - x2 * x2)


def H_2d(j: int, s: float, xi: float, p, x2) -> np.ndarray:
    """``H_j(xi, p, x2)``, smooth on the closed triangle including the diagonal."""
    p = np.asarray(p, float)
    x2 = np.asarray(x2, float)
    Q = np.maximum(_q(j, p, x2), 0.0)
    return np.cos(xi * math.sqrt(s) * np.sqrt(Q)) * np.sqrt(Q + s * x2 * x2) / np.sqrt(p + x2)


def dH_2d_dp(j: int, s: float, xi: float, p, x2) -> np.ndarray:
    p = np.asarray(p, float)
    x2 = np.asarray(x2, float)
    sg = (-1.0) ** j
    Q = np.maximum(_q(j, p, x2), 0.0)
    z = xi * math.sqrt(s) * np.sqrt(Q)
    G = np.sqrt(Q + s * x2 * x2)
    root = np.sqrt(p + x2)
    # d/dp cos(z) = -(-1)^j xi^2 s p sin(z)/z, finite on the diagonal
    dcos = -sg * xi * xi * s * p * np.sinc(z / np.pi)
    dG = sg * p / (G * root) - G / (2.0 * root**3)
    return dcos * G / root + np.cos(z) * dG


def kernel_2d(j: int, s: float, xi: float, p, x2) -> np.ndarray:
    """``H_j / sqrt((-1)^j (p - x2))`` evaluated off the diagonal.

    Equals ``cos(xi sqrt(s) sqrt(Q)) sqrt((-1)^j s p^2/(p^2 - x2^2) + 1 - (-1)^j s)``.
    The per-frequency equation uses twice this kernel (both arc points).
    """
    p = np.asarray(p, float)
    x2 = np.asarray(x2, float)
    u = (-1.0) ** j * (p - x2)
    if np.any(u <= 0) or np.any(p <= 0) or np.any(x2 < 0):
        raise ValueError("kernel_2d is evaluated strictly inside T_j with p > 0, x2 >= 0")
    return H_2d(j, s, xi, p, x2) / np.sqrt(u)


def ellipse_abel_spec(j: int, s: float, xi: float) -> AbelKernelSpec:
    """Per-frequency equation of the 2-D transform: ``alpha = -1/2``, ``K = 2 H_j``."""

    def dk(p, w, i):
        if i == 1:
            return 2.0 * dH_2d_dp(j, s, xi, p, w)
        raise NotImplementedError

    return AbelKernelSpec(j, -0.5, lambda p, w: 2.0 * H_2d(j, s, xi, p, w), dk,
                          name=f"ellipse2d(j={j}, s={s}, xi={xi})")


# ------------------------------------------------------------------ n-D kernels

def _sin_power_integral(k: int) -> float:
    """``int_0^pi sin^k(phi) dphi`` (Wallis)."""
    return math.sqrt(math.pi) * math.gamma((k + 1) / 2) / math.gamma(k / 2 + 1)


def alpha_n(n: int) -> float:
    """Angular factor of the (n-2)-sphere in polar coordinates about ``xi``:
    ``alpha_3 = 2``, ``alpha_4 = 2 pi``, ``alpha_n = 2 pi prod_{i<=n-4} int_0^pi sin^i``."""
    if int(n) != n or n < 3:
        raise ValueError(f"alpha_n needs an integer n >= 3, got {n}")
    if n == 3:
        return 2.0
    return 2 * math.pi * math.prod(_sin_power_integral(i) for i in range(1, n - 3))


def sphere_area(k: int) -> float:
    """Surface area of the unit k-sphere ``S^k`` in ``R^(k+1)``."""
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def sphere_cos_average(z, n: int) -> np.ndarray:
    """``alpha_n int_0^pi cos(z cos phi) sin^(n-3) phi dphi``.

    Closed form ``alpha_n sqrt(pi) Gamma(nu+1/2) (2/z)^nu J_nu(z)``, ``nu = (n-3)/2``;
    a short power series is used for small ``z``.
    """
    z = np.abs(np.asarray(z, float))
    nu = (n - 3) / 2
    pref = alpha_n(n) * math.sqrt(math.pi) * math.gamma(nu + 0.5)
    out = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    # (2/z)^nu J_nu(z) = sum_k (-z^2/4)^k / (k! Gamma(nu+k+1))
    series = sum((-(zs * zs) / 4) ** k / (math.factorial(k) * math.gamma(nu + k + 1))
                 for k in range(4))
    out[small] = series
    zb = z[~small]
    out[~small] = (2.0 / zb) ** nu * special.jv(nu, zb)
    return pref * out


def kernel_nd(j: int, s: float, xi_mag: float, n: int, p, omega):
    """Factors ``(K1, K2, K3)`` of the n-D equation; the full kernel is
    ``s^(alpha+1/2) K1 K2 K3`` against ``[(-1)^j (p - w)]^alpha``."""
    if n < 3:
        raise ValueError("kernel_nd needs n >= 3; use H_2d for n = 2")
    p = np.asarray(p, float)
    omega = np.asarray(omega, float)
    if np.any((-1.0) ** j * (p - omega) < 0) or np.any(omega < 0):
        raise ValueError("(p, omega) outside T_j")
    alpha = (n - 3) / 2
    Q = np.maximum(_q(j, p, omega), 0.0)
    K1 = sphere_cos_average(math.sqrt(s) * xi_mag * np.sqrt(Q), n)
    K2 = (p + omega) ** alpha
    K3 = np.sqrt(Q + s * omega * omega)
    return K1, K2, K3


def surface_abel_spec(j: int, s: float, xi_mag: float, n: int) -> AbelKernelSpec:
    alpha = (n - 3) / 2

    def kern(p, w):
        K1, K2, K3 = kernel_nd(j, s, xi_mag, n, p, w)
        return s ** (alpha + 0.5) * K1 * K2 * K3

    return AbelKernelSpec(j, alpha, kern, name=f"surface_nd(n={n}, j={j}, s={s}, |xi|={xi_mag})")


def generalized_kernel(q: int, nu: Callable, n: int, xi_mag: float,
                       band: tuple[float, float] | None = None,
                       nu_dw: Callable | None = None) -> AbelKernelSpec:
    """Abel equation for curves ``x1 = +-r(p, w)``, ``r = (p - w)^(q/2) nu(p, w)``.

    ``alpha = (n-3)/2`` for ``q = 1`` and ``q (n-2) / 2`` for ``q >= 2``.
    ``nu_dw`` (the w-derivative of nu) falls back to central differences.
    With ``band`` given, ``nu(p, p) != 0`` is checked on 201 points.
    """
    if int(q) != q or q < 1:
        raise ValueError("q must be a positive integer")
    if n < 2:
        raise ValueError("n must be at least 2")
    b = q / 2
    alpha = (n - 3) / 2 if q == 1 else b * (n - 2)
    if band is not None:
        pts = np.linspace(band[0], band[1], 201)
        diag = np.abs(np.asarray(nu(pts, pts), float))
        if not np.all(np.isfinite(diag)) or diag.min() <= 1e-12 * max(diag.max(), 1e-300):
            raise ValueError("nu(p, p) vanishes on the band; the curve family is not invertible")

    def dnu(p, w):
        if nu_dw is not None:
            return nu_dw(p, w)
        h = 1e-6 * np.maximum(1.0, np.abs(w))
        return (nu(p, w + h) - nu(p, w - h)) / (2 * h)

    def kern(p, w):
        p = np.asarray(p, float)
        w = np.asarray(w, float)
        d = np.maximum(p - w, 0.0)
        v = nu(p, w)
        arg = xi_mag * d**b * v
        K1 = 2 * np.cos(arg) if n == 2 else sphere_cos_average(arg, n)
        K2 = v ** (n - 2)
        inner = d * dnu(p, w)
        if q == 1:
            K3 = np.sqrt(d + (inner - 0.5 * v) ** 2)
        else:
            K3 = np.sqrt(1 + d ** (q - 2) * (inner - b * v) ** 2)
        return K1 * K2 * K3

    return AbelKernelSpec(0, alpha, kern, name=f"generalized(q={q}, n={n}, |xi|={xi_mag})")


def sar_nu(h: float = 5.0, d: float = 2.0) -> Callable:
    """``nu(p, w) = sqrt(p + w) sqrt((p^2 + h^2)/(p^2 + h^2 + d^2))``."""
    def nu(p, w):
        p = np.asarray(p, float)
        return np.sqrt(p + w) * np.sqrt((p * p + h * h) / (p * p + h * h + d * d))
    return nu


def sar_nu_dw(h: float = 5.0, d: float = 2.0) -> Callable:
    """``d nu / dw`` for :func:`sar_nu`; only the ``sqrt(p + w)`` factor depends on ``w``."""
    nu = sar_nu(h, d)

    def dw(p, w):
        return nu(p, w) / (2.0 * (np.asarray(p, float) + w))
    return dw


# ------------------------------------------------------------------ spherical means

def gegenbauer(l: int, gamma: float, x) -> np.ndarray:
    """``C_l^gamma(x)`` by the three-term recurrence.

    For ``gamma = 0`` the normalised limit ``(2/l) T_l(x)`` (``C_0 = 1``) is used.
    """
    x = np.asarray(x, float)
    if l < 0:
        raise ValueError("degree must be non-negative")
    if l == 0:
        return np.ones_like(x)
    if gamma == 0:
        return 2.0 / l * np.cos(l * np.arccos(np.clip(x, -1, 1))) if np.all(np.abs(x) <= 1) \
            else 2.0 / l * special.eval_chebyt(l, x)
    c_prev, c = np.ones_like(x), 2 * gamma * x
    for k in range(1, l):
        c_prev, c = c, (2 * x * (k + gamma) * c - (k + 2 * gamma - 1) * c_prev) / (k + 1)
    return c


def spherical_means_kernel(l: int, n: int, s_val, r) -> np.ndarray:
    """``K_l(s, r) = r^(alpha+1/2) (s+r)^alpha C_l^gamma(r/s)``, ``gamma=(n-2)/2``, ``alpha=(n-3)/2``."""
    s_val = np.asarray(s_val, float)
    r = np.asarray(r, float)
    if np.any(r > s_val * (1 + 1e-14)) or np.any(r < 0):
        raise ValueError("spherical-means kernel needs 0 <= r <= s")
    alpha, gamma = (n - 3) / 2, (n - 2) / 2
    return r ** (alpha + 0.5) * (s_val + r) ** alpha * gegenbauer(l, gamma, r / s_val)


def spherical_means_spec(l: int, n: int) -> AbelKernelSpec:
    return AbelKernelSpec(0, (n - 3) / 2, lambda s, r: spherical_means_kernel(l, n, s, r),
                          name=f"spherical_means(l={l}, n={n})")


# ------------------------------------------------------------------ families

@dataclass(frozen=True)
class SupportBand:
    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError(f"support band needs 0 < a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class SpectralKernelFamily:
    family: str
    j: int = 0
    s: float = 2.0
    n: int = 2
    xi: float = 0.0
    q: int = 1
    nu: Callable | None = None
    l: int = 0

    def spec(self, band: SupportBand | None = None) -> AbelKernelSpec:
        if self.family == "ellipse2d":
            return ellipse_abel_spec(self.j, self.s, self.xi)
        if self.family == "surface_nd":
            return surface_abel_spec(self.j, self.s, abs(self.xi), self.n)
        if self.family == "generalized":
            return generalized_kernel(self.q, self.nu, self.n, abs(self.xi),
                                      None if band is None else (band.a, band.b))
        if self.family == "spherical_means":
            return spherical_means_spec(self.l, self.n)
        raise ValueError(f"unknown kernel family {self.family!r}")


def invert_abel_nd_profile(sino_hat, family: SpectralKernelFamily, band: SupportBand,
                           grid: Grid1D, opts: AbelSolveOptions | None = None) -> np.ndarray:
    """Per-frequency profile ``f_hat(xi, .)`` on ``grid`` (which spans the band)."""
    if grid.lo < band.a - 1e-12 or grid.hi > band.b + 1e-12:
        raise ValueError("profile grid must lie inside the support band")
    return abel_solve(family.spec(band), np.asarray(sino_hat, float), grid, opts)


def dump_kernel_csv(path, spec: AbelKernelSpec, grid: Grid1D) -> None:
    """Kernel values on the ``T_j`` lattice of ``grid`` as ``p,w,K`` rows."""
    pts = grid.points
    mask = triangle_mask(grid.count, spec.j)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["p", "w", "K"])
        for i, k in zip(*np.nonzero(mask)):
            wr.writerow([repr(pts[i]), repr(pts[k]), repr(float(spec(pts[i], pts[k])))])


# ------------------------------------------------------------------ 2-D pipeline

@dataclass
class SpectralOptions:
    """Options of :func:`invert_R2d`.

    ``stability_guard``: the per-frequency Volterra solve amplifies data and
    discretisation errors roughly like ``exp(c xi^2 s b^2)``, so high
    frequencies can return garbage without any solver error.  For a
    non-negative image ``|f_hat(xi, x2)| <= f_hat(0, x2)``; the first
    frequency whose peak exceeds ``stability_guard`` times the peak of the
    zero-frequency profile, and every higher one, is zeroed and reported as
    failed.  ``gain_jump`` adds a second trigger: the solution-to-data norm
    ratio of a frequency exceeding ``gain_jump`` times the largest ratio seen
    at lower frequencies.  The exact ratio grows slowly with ``xi`` while an
    unstable solve jumps by an order of magnitude.  ``None`` disables either
    check; no frequency is solved past the first unstable one.
    ``negligible``: frequencies whose data norm is below this fraction of
    the largest one are set to zero without solving.
    """

    cutoff: float = 0.8          # fraction of the Nyquist frequency kept
    smooth: bool = True
    method: str = "substitution"
    stability_guard: float | None = 1.5
    gain_jump: float | None = 3.0
    negligible: float = 1e-10
    abel: AbelSolveOptions | None = None


@dataclass
class SpectralResult:
    image: Image
    failed_frequencies: list = field(default_factory=list)
    imag_residue: float = 0.0
    profiles: np.ndarray | None = None   # f_hat(xi, p) on the band grid
    xi: np.ndarray | None = None
    band_grid: Grid1D | None = None


def band_grid(p_axis: Grid1D, band: SupportBand) -> tuple[Grid1D, np.ndarray]:
    pts = p_axis.points
    sel = np.flatnonzero((pts >= band.a - 1e-9) & (pts <= band.b + 1e-9))
    if sel.size < 8:
        raise ValueError("support band covers fewer than 8 sinogram p samples")
    if band.b > pts[-1] + 1e-9 or band.a < pts[0] - 1e-9:
        raise ValueError("support band exceeds the sampled p range")
    return Grid1D(float(pts[sel[0]]), float(pts[sel[-1]]), sel.size), sel


def sinogram_spectrum(sino: Sinogram) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-FT approximation ``int g(y1) e^{-i xi y1} dy1`` by the DFT.

    Returns ``(xi, G)`` with ``G[k, f]`` for the non-negative frequencies.
    """
    dy = sino.y_axis.spacing
    N = sino.y_axis.count
    xi = 2 * np.pi * np.fft.rfftfreq(N, dy)
    G = dy * np.fft.rfft(sino.values, axis=1) * np.exp(-1j * xi * sino.y_axis.lo)[None, :]
    return xi, G


def invert_R2d(sino: Sinogram, band: SupportBand, img: ImageGrid,
               opts: SpectralOptions | None = None) -> SpectralResult:
    """Image from a one-sided 2-D sinogram by per-frequency Abel inversion.

    The ``y1`` samples must sit on the image's column lattice.  Rows outside
    the band are left at zero; a frequency whose solve fails is zeroed and
    listed in ``failed_frequencies``.
    """
    opts = opts or SpectralOptions()
    aopts = opts.abel or AbelSolveOptions(smooth=opts.smooth, method=opts.method)
    h = img.spacing
    if abs(sino.y_axis.spacing - h) > 1e-9 * h:
        raise ValueError("sinogram y1 spacing must equal the image pixel spacing")
    grid, sel = band_grid(sino.p_axis, band)
    xi, G = sinogram_spectrum(sino)
    nyq = np.pi / sino.y_axis.spacing
    F = np.zeros((xi.size, grid.count), complex)
    failed = []
    data = G[sel]
    norms = np.linalg.norm(data, axis=0)
    floor = opts.negligible * norms.max() if norms.size else 0.0
    peak0 = None
    gain_max = 0.0
    for f, x in enumerate(xi):
        if x > opts.cutoff * nyq or norms[f] <= floor:
            continue
        spec = ellipse_abel_spec(sino.j, sino.s, float(x))
        try:
            system = second_kind_system(spec, grid, aopts)
            re = abel_solve(spec, data[:, f].real, grid, aopts, system=system)
            im = abel_solve(spec, data[:, f].imag, grid, aopts, system=system)
            F[f] = re + 1j * im
        except (AbelError, ValueError, FloatingPointError) as exc:
            log.warning("frequency %d (xi=%.4g) failed: %s", f, x, exc)
            failed.append(f)
            F[f] = 0
            continue
        if f == 0 or opts.stability_guard is None:
            peak0 = np.abs(F[0]).max() if f == 0 else peak0
            gain_max = max(gain_max, np.linalg.norm(F[f]) / norms[f])
            continue
        peak = np.abs(F[f]).max()
        gain = np.linalg.norm(F[f]) / norms[f]
        unstable = not np.isfinite(peak) or peak > opts.stability_guard * peak0
        if opts.gain_jump is not None and gain_max > 0:
            unstable = unstable or gain > opts.gain_jump * gain_max
        if unstable:
            # instability only grows with xi: drop this and every higher frequency
            log.info("frequencies from %d (xi=%.4g) up unstable, zeroed", f, x)
            failed.extend(k for k in range(f, xi.size)
                          if xi[k] <= opts.cutoff * nyq and norms[k] > floor)
            F[f:] = 0
            break
        gain_max = max(gain_max, gain)
    failed = sorted(set(failed))
    # synthesis on the y1 lattice, then crop to image columns
    N = sino.y_axis.count
    dy = sino.y_axis.spacing
    spec_full = F * np.exp(1j * xi * sino.y_axis.lo)[:, None] / dy
    full = np.zeros((N, grid.count), complex)
    full[:xi.size] = spec_full
    # conjugate symmetry for the negative frequencies
    neg = np.arange(1, N - xi.size + 1)
    full[N - neg] = np.conj(spec_full[neg])
    rows_y = np.fft.ifft(full, axis=0)
    imag_res = float(np.linalg.norm(rows_y.imag) / max(np.linalg.norm(rows_y.real), 1e-300))
    prof = rows_y.real  # (y1 sample, p sample)
    col_idx = np.rint((img.x1 - sino.y_axis.lo) / dy).astype(int)
    if col_idx.min() < 0 or col_idx.max() >= N:
        raise ValueError("image columns fall outside the sinogram y1 range")
    prof = prof[col_idx]  # (image column, p sample)
    out = np.zeros((img.m, img.m))
    x2 = img.x2
    inside = (x2 >= grid.lo - 1e-9) & (x2 <= grid.hi + 1e-9)
    pts = grid.points
    for r in np.flatnonzero(inside):
        k = min(int(np.searchsorted(pts, x2[r], side="right")) - 1, grid.count - 2)
        k = max(k, 0)
        t = (x2[r] - pts[k]) / (pts[k + 1] - pts[k])
        out[r] = (1 - t) * prof[:, k] + t * prof[:, k + 1]
    return SpectralResult(Image(img, out), failed, imag_res, F, xi, grid)
