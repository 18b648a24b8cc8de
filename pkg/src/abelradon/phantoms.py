"""Test images and the relative error metric used to score reconstructions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Image, ImageGrid


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class AnnulusParams:
    center: tuple[float, float]
    r_inner: float
    r_outer: float


@dataclass(frozen=True)
class EllipseParams:
    count: int = 20
    seed: int = 0
    # (x1_lo, x1_hi, x2_lo, x2_hi) for the centres
    center_box: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    axis_range: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SmoothParams:
    """Separable Gaussian bump, cut to zero outside ``|x2 - c2| <= cut * width``."""

    center: tuple[float, float]
    widths: tuple[float, float]
    cut: float = 3.0


@dataclass(frozen=True)
class PhantomSpec:
    kind: str
    m: int
    annulus: AnnulusParams | None = None
    ellipses: EllipseParams | None = None
    smooth: SmoothParams | None = None

    def __post_init__(self):
        ImageGrid(self.m)
        if self.kind not in ("annulus", "ellipses", "smooth", "empty"):
            raise PhantomError(f"unknown phantom kind {self.kind!r}")
        if self.kind == "annulus":
            a = self.annulus
            if a is None:
                raise PhantomError("annulus phantom needs annulus parameters")
            if not 0 <= a.r_inner < a.r_outer:
                raise PhantomError(f"need 0 <= r_inner < r_outer, got {a.r_inner}, {a.r_outer}")
            if a.center[1] - a.r_outer <= 0:
                raise PhantomError("annulus reaches the x2 <= 0 half plane")
        elif self.kind == "ellipses":
            e = self.ellipses
            if e is None:
                raise PhantomError("ellipse phantom needs ellipse parameters")
            if e.count < 0:
                raise PhantomError("ellipse count must be >= 0")
            lo, hi = e.axis_range
            if not 0 < lo <= hi:
                raise PhantomError(f"bad semi-axis range {e.axis_range}")
            if e.center_box[2] <= 0:
                raise PhantomError("ellipse centres must lie in x2 > 0")
        elif self.kind == "smooth":
            sm = self.smooth
            if sm is None:
                raise PhantomError("smooth phantom needs smooth parameters")
            if min(sm.widths) <= 0 or sm.cut <= 0:
                raise PhantomError("smooth phantom widths and cut must be positive")
            if sm.center[1] - sm.cut * sm.widths[1] <= 0:
                raise PhantomError("smooth phantom reaches the x2 <= 0 half plane")

    @property
    def support_x2(self) -> tuple[float, float]:
        """Closed ``x2`` interval containing the support."""
        if self.kind == "annulus":
            a = self.annulus
            return a.center[1] - a.r_outer, a.center[1] + a.r_outer
        if self.kind == "ellipses":
            e = self.ellipses
            return (max(e.center_box[2] - e.axis_range[1], 0.0),
                    e.center_box[3] + e.axis_range[1])
        if self.kind == "smooth":
            sm = self.smooth
            return sm.center[1] - sm.cut * sm.widths[1], sm.center[1] + sm.cut * sm.widths[1]
        return 0.0, 0.0


def default_annulus(m: int) -> PhantomSpec:
    return PhantomSpec("annulus", m, annulus=AnnulusParams((0.0, m / 5), m / 12, m / 6))


def default_ellipses(m: int, seed: int = 20240515) -> PhantomSpec:
    box = (-m / 3, m / 3, m / 12, 5 * m / 12)
    return PhantomSpec("ellipses", m, ellipses=EllipseParams(20, seed, box, (m / 60, m / 12)))


def default_smooth(m: int) -> PhantomSpec:
    """Smooth bump, wide along ``x1`` so its ``y1`` spectrum is concentrated
    at the low frequencies the slice inversion resolves reliably."""
    return PhantomSpec("smooth", m, smooth=SmoothParams((0.0, m / 4), (m / 5, m / 14)))


def ellipse_list(p: EllipseParams, spacing: float = 1.0) -> np.ndarray:
    """Rows ``(c1, c2, a1, a2)`` drawn from ``default_rng(seed)``.

    The vertical semi-axis is capped at ``c2 - spacing`` so no ellipse
    reaches the row ``x2 = 0``.
    """
    rng = np.random.default_rng(p.seed)
    x1lo, x1hi, x2lo, x2hi = p.center_box
    c1 = rng.uniform(x1lo, x1hi, p.count)
    c2 = rng.uniform(x2lo, x2hi, p.count)
    ax = rng.uniform(p.axis_range[0], p.axis_range[1], (p.count, 2))
    ax[:, 1] = np.minimum(ax[:, 1], c2 - spacing)
    return np.column_stack([c1, c2, ax])


def make_phantom(spec: PhantomSpec) -> Image:
    grid = ImageGrid(spec.m)
    X1, X2 = np.meshgrid(grid.x1, grid.x2)
    vals = np.zeros((spec.m, spec.m))
    if spec.kind == "annulus":
        a = spec.annulus
        r = np.hypot(X1 - a.center[0], X2 - a.center[1])
        vals = ((r <= a.r_outer) & (r >= a.r_inner)).astype(float)
    elif spec.kind == "ellipses":
        for c1, c2, a1, a2 in ellipse_list(spec.ellipses, grid.spacing):
            vals += (((X1 - c1) / a1) ** 2 + ((X2 - c2) / a2) ** 2 <= 1.0)
    elif spec.kind == "smooth":
        sm = spec.smooth
        u = (X1 - sm.center[0]) / sm.widths[0]
        v = (X2 - sm.center[1]) / sm.widths[1]
        vals = np.exp(-0.5 * (u**2 + v**2))
        vals[np.abs(v) > sm.cut] = 0.0
    if np.any(vals[grid.center:] != 0):
        raise PhantomError("phantom support spills onto x2 <= 0")
    return Image(grid, vals)


def delta_error(x_rec: Image, x_true: Image) -> float:
    """Relative L2 error on the rows with ``x2 > 0`` after scaling both images
    to unit maximum."""
    if x_rec.grid != x_true.grid:
        raise ValueError("images live on different grids")
    up = x_true.grid.upper_rows
    a = x_rec.values[up]
    b = x_true.values[up]
    bmax = np.abs(x_true.values).max()
    if bmax == 0 or not np.any(b):
        raise ValueError("reference image vanishes on x2 > 0; relative error undefined")
    amax = np.abs(x_rec.values).max()
    a = a / amax if amax > 0 else a
    b = b / bmax
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def reflection_correlation(x_rec: Image, x_true: Image) -> float:
    """Pearson correlation between the reconstruction's lower half and the
    true image mirrored across ``x2 = 0``."""
    c = x_true.grid.center
    lower = x_rec.values[c + 1:]
    mirrored = x_true.values[:c][::-1]
    a = lower.ravel() - lower.mean()
    b = mirrored.ravel() - mirrored.mean()
    den = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / den) if den > 0 else 0.0


def spec_to_manifest(spec: PhantomSpec, prefix: str = "phantom.") -> dict[str, str]:
    out = {f"{prefix}kind": spec.kind, f"{prefix}m": str(spec.m)}
    if spec.annulus is not None:
        a = spec.annulus
        out.update({
            f"{prefix}center": f"{a.center[0]!r},{a.center[1]!r}",
            f"{prefix}r_inner": repr(a.r_inner),
            f"{prefix}r_outer": repr(a.r_outer),
        })
    if spec.ellipses is not None:
        e = spec.ellipses
        out.update({
            f"{prefix}count": str(e.count),
            f"{prefix}seed": str(e.seed),
            f"{prefix}center_box": ",".join(repr(float(v)) for v in e.center_box),
            f"{prefix}axis_range": ",".join(repr(float(v)) for v in e.axis_range),
        })
    if spec.smooth is not None:
        sm = spec.smooth
        out.update({
            f"{prefix}center": f"{sm.center[0]!r},{sm.center[1]!r}",
            f"{prefix}widths": f"{sm.widths[0]!r},{sm.widths[1]!r}",
            f"{prefix}cut": repr(sm.cut),
        })
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def spec_from_manifest(entries: dict[str, str], prefix: str = "phantom.") -> PhantomSpec:
    """Build a spec from ``prefix``-keyed entries; missing geometry falls back
    to the defaults for the given size."""
    get = lambda k: entries.get(prefix + k)  # noqa: E731
    kind = get("kind") or "annulus"
    m = int(get("m") or 257)
    if kind == "annulus":
        base = default_annulus(m).annulus
        a = AnnulusParams(
            _floats(get("center")) if get("center") else base.center,
            float(get("r_inner") or base.r_inner),
            float(get("r_outer") or base.r_outer),
        )
        return PhantomSpec(kind, m, annulus=a)
    if kind == "ellipses":
        base = default_ellipses(m).ellipses
        e = EllipseParams(
            int(get("count") or base.count),
            int(get("seed") or base.seed),
            _floats(get("center_box")) if get("center_box") else base.center_box,
            _floats(get("axis_range")) if get("axis_range") else base.axis_range,
        )
        return PhantomSpec(kind, m, ellipses=e)
    if kind == "smooth":
        base = default_smooth(m).smooth
        sm = SmoothParams(
            _floats(get("center")) if get("center") else base.center,
            _floats(get("widths")) if get("widths") else base.widths,
            float(get("cut") or base.cut),
        )
        return PhantomSpec(kind, m, smooth=sm)
    return PhantomSpec(kind, m)
