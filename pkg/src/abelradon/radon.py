"""Discrete ellipse / hyperbola (and generalized-curve) Radon transforms in 2-D.

A sinogram row is indexed by the curve parameter ``p`` (``t = s p^2``) and the
centre ``y1``.  Shifting ``y1`` by one pixel shifts the curve by one column,
so for every ``p`` the operator is a correlation of the image rows with a
fixed *template*: the bilinear footprint of the curve centred at ``y1 = 0``.
:class:`ShiftInvariantOperator` stores those templates and applies the
operator with FFTs along ``x1``; explicit CSR blocks are built only on
demand (small grids, the perturbed data operator).

The two-sided transform adds the curve mirrored in ``x2 = 0``.  Because the
grid rows are mirror symmetric, that is the one-sided operator applied to
``x + flip(x)``, which makes the odd-image null space exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import fft as spfft

from .grids import Grid1D, Image, ImageGrid, Sinogram, SparseOperator

PERTURB_STREAM = 1
NOISE_STREAM = 2
SAMPLES_PER_CELL = 8


@dataclass(frozen=True)
class CurveSpec:
    """Curve family.  ``kind`` is ``ellipse`` (j=0), ``hyperbola`` (j=1) or
    ``generalized`` (``x1 = +-r(p, w)``, ``x2 = w`` for ``0 <= w <= p`` with
    ``r = (p - w)^(q/2) nu(p, w)``).

    ``truncation`` bounds ``|x1 - y1|`` on the hyperbola's infinite arms; the
    arms are always cut where they leave the image (``x2 > m/2``).
    """

    kind: str = "ellipse"
    s: float = 2.0
    q: int = 1
    nu: Callable | None = None
    truncation: float | None = None

    def __post_init__(self):
        if self.kind not in ("ellipse", "hyperbola", "generalized"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if self.kind != "generalized" and not self.s > 0:
            raise ValueError(f"shape constant s must be positive, got {self.s}")
        if self.kind == "generalized":
            if self.nu is None or int(self.q) != self.q or self.q < 1:
                raise ValueError("generalized curves need an integer q >= 1 and a callable nu")

    @property
    def j(self) -> int:
        return 1 if self.kind == "hyperbola" else 0

    @classmethod
    def for_orientation(cls, j: int, s: float = 2.0) -> "CurveSpec":
        return cls("ellipse" if j == 0 else "hyperbola", s)


@dataclass(frozen=True)
class NoiseSpec:
    gamma: float = 0.0
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma", "epsilon"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        if self.epsilon >= 1:
            raise ValueError("epsilon must lie in [0, 1)")


# ------------------------------------------------------------ curve geometry

def _midpoints(lo, hi, n):
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5), h


def _nu_dw(nu, p, w, h=1e-6):
    scale = max(1.0, abs(p))
    return (nu(p, w + h * scale) - nu(p, w - h * scale)) / (2 * h * scale)


def curve_points(c: CurveSpec, p: float, y1: float, samples: int,
                 x2_max: float | None = None):
    """Quadrature nodes ``(x1, x2, weight)`` on the curve with parameter ``p``.

    Weights are arc-length elements, so ``sum(weight * f(x1, x2))``
    approximates the line integral of ``f``.  Nodes are midpoints of a
    uniform split of the curve parameter (angle for the ellipse, hyperbolic
    angle for the hyperbola, ``v = sqrt(p - w)`` for generalized curves),
    which keeps every weight finite.  ``x2_max`` cuts the hyperbola's arms.
    """
    if not p > 0:
        raise ValueError(f"curve parameter p must be positive, got {p}")
    if samples < 2:
        raise ValueError("need at least two samples")
    if c.kind == "ellipse":
        t = c.s * p * p
        th, h = _midpoints(0.0, np.pi, samples)
        x1 = math.sqrt(t) * np.cos(th)
        x2 = p * np.sin(th)
        w = np.sqrt(t * np.sin(th) ** 2 + p * p * np.cos(th) ** 2) * h
    elif c.kind == "hyperbola":
        t = c.s * p * p
        umax = _hyperbola_extent(c, p, x2_max)
        u, h = _midpoints(-umax, umax, samples)
        x1 = math.sqrt(t) * np.sinh(u)
        x2 = p * np.cosh(u)
        w = np.sqrt(t * np.cosh(u) ** 2 + p * p * np.sinh(u) ** 2) * h
    else:
        half = samples // 2 if samples >= 4 else 2
        v, h = _midpoints(0.0, math.sqrt(p), half)
        om = p - v * v
        nu = np.asarray(c.nu(p, om), float)
        r = v**c.q * nu
        drdv = c.q * v ** (c.q - 1) * nu - 2 * v ** (c.q + 1) * _nu_dw(c.nu, p, om)
        wv = np.sqrt(drdv**2 + 4 * v * v) * h
        x1 = np.concatenate([-r[::-1], r])
        x2 = np.concatenate([om[::-1], om])
        w = np.concatenate([wv[::-1], wv])
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(w))):
        raise ValueError(f"curve evaluation failed at p={p}")
    return x1 + y1, x2, w


def _hyperbola_extent(c: CurveSpec, p, x2_max):
    umax = np.inf
    if x2_max is not None:
        if x2_max <= p:
            return 0.0
        umax = math.acosh(x2_max / p)
    if c.truncation is not None:
        umax = min(umax, math.asinh(c.truncation / math.sqrt(c.s * p * p)))
    if not np.isfinite(umax):
        raise ValueError("hyperbola arms need a truncation or an x2 bound")
    return umax


def curve_length(c: CurveSpec, p: float, x2_max: float | None = None) -> float:
    return float(curve_points(c, p, 0.0, 2048, x2_max)[2].sum())


# ------------------------------------------------------------ templates

@dataclass(frozen=True)
class Template:
    """Bilinear footprint of one curve at ``y1 = 0``.

    ``values[k, d - dmin]`` is the weight deposited into image row
    ``rows[k]`` and column ``d``, where column indices are those of the curve
    centred at ``y1 = 0`` and may fall outside ``0..m-1``.
    """

    rows: np.ndarray
    dmin: int
    values: np.ndarray

    @property
    def dmax(self) -> int:
        return self.dmin + self.values.shape[1] - 1


def build_template(c: CurveSpec, img: ImageGrid, p: float) -> Template:
    m, h = img.m, img.spacing
    x2_max = m / 2 + h
    length = curve_length(c, p, x2_max)
    if length == 0:
        return Template(np.zeros(0, int), 0, np.zeros((0, 1)))
    samples = max(16, math.ceil(SAMPLES_PER_CELL * length / h))
    x1, x2, w = curve_points(c, p, 0.0, samples, x2_max)
    col = img.center + x1 / h
    row = img.center - x2 / h
    c0 = np.floor(col).astype(np.int64)
    r0 = np.floor(row).astype(np.int64)
    fc = col - c0
    fr = row - r0
    rr = np.concatenate([r0, r0, r0 + 1, r0 + 1])
    cc = np.concatenate([c0, c0 + 1, c0, c0 + 1])
    ww = np.concatenate([w * (1 - fr) * (1 - fc), w * (1 - fr) * fc,
                         w * fr * (1 - fc), w * fr * fc])
    keep = (rr >= 0) & (rr < m) & (ww != 0)
    rr, cc, ww = rr[keep], cc[keep], ww[keep]
    if rr.size == 0:
        return Template(np.zeros(0, int), 0, np.zeros((0, 1)))
    rows, rinv = np.unique(rr, return_inverse=True)
    dmin = int(cc.min())
    vals = np.zeros((rows.size, int(cc.max()) - dmin + 1))
    np.add.at(vals, (rinv, cc - dmin), ww)
    return Template(rows, dmin, vals)


def default_axes(m: int) -> tuple[Grid1D, Grid1D]:
    """``p`` in ``{1, ..., (m+1)/2}`` and ``y1`` on the pixel lattice over ``[-m, m]``."""
    img = ImageGrid(m)
    pmax = (m + 1) // 2
    p_axis = Grid1D(1.0, float(pmax), pmax)
    ext = (m - 1) * img.spacing
    return p_axis, Grid1D(-ext, ext, 2 * m - 1)


class ShiftInvariantOperator:
    """Forward map ``image -> sinogram`` for one curve family.

    Rows are ordered ``p``-major: row ``k * Y + l`` holds ``(p_k, y1_l)``.
    Image vectors are row-major as in :class:`abelradon.grids.Image`.
    """

    def __init__(self, curve: CurveSpec, img: ImageGrid, p_axis: Grid1D, y_axis: Grid1D,
                 two_sided: bool = True):
        h = img.spacing
        shift0 = y_axis.lo / h
        if abs(y_axis.spacing - h) > 1e-9 * h or abs(shift0 - round(shift0)) > 1e-9:
            raise ValueError("y1 samples must lie on the pixel lattice (spacing m/(m-1))")
        self.curve, self.img = curve, img
        self.p_axis, self.y_axis = p_axis, y_axis
        self.two_sided = two_sided
        self.u0 = int(round(shift0))
        self.templates = [build_template(curve, img, p) for p in p_axis.points]
        m, Y = img.m, y_axis.count
        live = [t for t in self.templates if t.rows.size]
        dmin = min((t.dmin for t in live), default=0)
        dmax = max((t.dmax for t in live), default=0)
        u_lo, u_hi = self.u0, self.u0 + Y - 1
        # circular length free of wrap-around for the forward correlation
        # (support [-dmax, m-1-dmin], read at u) and the adjoint (read at 0..m-1)
        fwd = max(m - 1 - dmin, u_hi) - min(-dmax, u_lo)
        adj = max(u_hi + dmax, m - 1) - min(u_lo + dmin, 0)
        self.L = spfft.next_fast_len(int(max(fwd, adj)) + 1, real=True)
        self._spec = []
        for t in self.templates:
            if not t.rows.size:
                self._spec.append(None)
                continue
            buf = np.zeros((t.rows.size, self.L))
            # place T[d] at index -d (mod L): correlation becomes convolution
            idx = (-(t.dmin + np.arange(t.values.shape[1]))) % self.L
            buf[:, idx] = t.values
            self._spec.append(spfft.rfft(buf, axis=1))
        self._u_idx = (self.u0 + np.arange(Y)) % self.L
        self.shape = (p_axis.count * Y, m * m)

    # -- dense-free application
    def _fold(self, x):
        x = np.asarray(x, float).reshape(self.img.m, self.img.m)
        return x + x[::-1] if self.two_sided else x

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, float).ravel()
        if x.size != self.shape[1]:
            raise ValueError(f"operand length {x.size} != operator columns {self.shape[1]}")
        X = spfft.rfft(self._fold(x), n=self.L, axis=1)
        Yh = np.zeros((self.p_axis.count, X.shape[1]), complex)
        for k, (t, T) in enumerate(zip(self.templates, self._spec)):
            if T is not None:
                Yh[k] = np.einsum("rf,rf->f", T, X[t.rows])
        y = spfft.irfft(Yh, n=self.L, axis=1)[:, self._u_idx]
        return y.ravel()

    def rmatvec(self, y) -> np.ndarray:
        y = np.asarray(y, float).ravel()
        if y.size != self.shape[0]:
            raise ValueError(f"operand length {y.size} != operator rows {self.shape[0]}")
        m = self.img.m
        buf = np.zeros((self.p_axis.count, self.L))
        buf[:, self._u_idx] = y.reshape(self.p_axis.count, -1)
        Yh = spfft.rfft(buf, axis=1)
        Xh = np.zeros((m, Yh.shape[1]), complex)
        for k, (t, T) in enumerate(zip(self.templates, self._spec)):
            if T is not None:
                Xh[t.rows] += np.conj(T) * Yh[k]
        x = spfft.irfft(Xh, n=self.L, axis=1)[:, :m]
        if self.two_sided:
            x = x + x[::-1]
        return x.ravel()

    # -- explicit blocks
    def block(self, k: int) -> sp.csr_matrix:
        """Explicit rows of ``p_k`` as a ``Y x m^2`` CSR matrix."""
        m, Y = self.img.m, self.y_axis.count
        t = self.templates[k]
        if not t.rows.size:
            return sp.csr_matrix((Y, m * m))
        nd = t.values.shape[1]
        ls = np.arange(Y)[:, None, None]
        cols = t.dmin + np.arange(nd)[None, None, :] + self.u0 + ls
        cols = np.broadcast_to(cols, (Y, t.rows.size, nd))
        rows_img = np.broadcast_to(t.rows[None, :, None], cols.shape)
        vals = np.broadcast_to(t.values[None], cols.shape)
        out_rows = np.broadcast_to(ls, cols.shape)
        keep = (cols >= 0) & (cols < m) & (vals != 0)
        r_out, r_img, c, v = out_rows[keep], rows_img[keep], cols[keep], vals[keep]
        if self.two_sided:
            r_out = np.concatenate([r_out, r_out])
            c = np.concatenate([c, c])
            r_img = np.concatenate([r_img, m - 1 - r_img])
            v = np.concatenate([v, v])
        mat = sp.csr_matrix((v, (r_out, r_img * m + c)), shape=(Y, m * m))
        mat.sum_duplicates()
        mat.sort_indices()
        return mat

    def to_sparse(self) -> SparseOperator:
        mat = sp.vstack([self.block(k) for k in range(self.p_axis.count)], format="csr")
        return SparseOperator(mat, block_rows=self.y_axis.count)

    def perturbed(self, epsilon: float, seed: int) -> "PerturbedOperator":
        return PerturbedOperator(self, epsilon, seed)

    def sinogram(self, image: Image) -> Sinogram:
        vals = self.matvec(image.vector).reshape(self.p_axis.count, self.y_axis.count)
        return Sinogram(self.p_axis, self.y_axis, vals, self.curve.j,
                        self.curve.s if self.curve.kind != "generalized" else 1.0)


def build_forward_matrix(c: CurveSpec, img: ImageGrid, sino_axes=None,
                         two_sided: bool = True) -> SparseOperator:
    """Explicit CSR forward matrix; one block of rows per ``p`` sample."""
    p_axis, y_axis = sino_axes if sino_axes is not None else default_axes(img.m)
    return ShiftInvariantOperator(c, img, p_axis, y_axis, two_sided).to_sparse()


# ------------------------------------------------------------ perturbation and noise

def _block_factors(seed: int, block: int, n: int, epsilon: float) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(PERTURB_STREAM, block))
    return np.random.Generator(np.random.PCG64(ss)).uniform(1 - epsilon, 1 + epsilon, n)


def perturb_csr_block(mat: sp.csr_matrix, epsilon: float, seed: int, block: int) -> sp.csr_matrix:
    """Multiply each stored weight by an independent ``U(1-eps, 1+eps)`` draw.

    Stream rule: block ``b`` draws from ``PCG64(SeedSequence(seed,
    spawn_key=(1, b)))`` in canonical CSR order (rows ascending, columns
    ascending within a row).
    """
    out = mat.copy()
    out.data = out.data * _block_factors(seed, block, out.nnz, epsilon)
    return out


def perturb_matrix(A: SparseOperator, epsilon: float, seed: int) -> SparseOperator:
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if epsilon == 0:
        return A
    mat = A.matrix
    br = A.block_rows
    blocks = [perturb_csr_block(mat[i:i + br], epsilon, seed, b)
              for b, i in enumerate(range(0, mat.shape[0], br))]
    return SparseOperator(sp.vstack(blocks, format="csr"), block_rows=br)


class PerturbedOperator:
    """``A_eps`` for a shift-invariant ``A``, applied block by block.

    Uses the same stream rule as :func:`perturb_matrix`, so it equals
    ``perturb_matrix(A.to_sparse(), epsilon, seed)`` without ever holding
    the full matrix.
    """

    def __init__(self, base: ShiftInvariantOperator, epsilon: float, seed: int):
        if not 0 <= epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        self.base, self.epsilon, self.seed = base, epsilon, seed
        self.shape = base.shape

    def matvec(self, x) -> np.ndarray:
        if self.epsilon == 0:
            return self.base.matvec(x)
        x = np.asarray(x, float).ravel()
        return np.concatenate([
            perturb_csr_block(self.base.block(k), self.epsilon, self.seed, k) @ x
            for k in range(self.base.p_axis.count)
        ])

    def rmatvec(self, y) -> np.ndarray:
        if self.epsilon == 0:
            return self.base.rmatvec(y)
        y = np.asarray(y, float).reshape(self.base.p_axis.count, -1)
        out = np.zeros(self.shape[1])
        for k in range(self.base.p_axis.count):
            out += perturb_csr_block(self.base.block(k), self.epsilon, self.seed, k).T @ y[k]
        return out


def noise_generator(seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(NOISE_STREAM,))
    return np.random.Generator(np.random.PCG64(ss))


def simulate_data(A_eps, x, noise: NoiseSpec) -> np.ndarray:
    """``b = A_eps x + gamma * ||A_eps x|| / sqrt(l) * eta``, ``eta`` standard normal."""
    vec = x.vector if isinstance(x, Image) else np.asarray(x, float).ravel()
    if vec.size != A_eps.shape[1]:
        raise ValueError(f"image has {vec.size} pixels, operator expects {A_eps.shape[1]}")
    clean = A_eps.matvec(vec)
    if noise.gamma == 0:
        return clean
    eta = noise_generator(noise.seed).standard_normal(clean.size)
    return clean + noise.gamma * np.linalg.norm(clean) / math.sqrt(clean.size) * eta
