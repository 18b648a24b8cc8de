"""Value types shared by every module: sample grids, images, sinograms and
sparse operators.

Image layout convention: an ``m x m`` image is stored as a 2-D array whose
row 0 is the *top* row (largest ``x2``) and whose column 0 is the leftmost
column (smallest ``x1``).  Flattening is row-major, so ``x2`` varies slowest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid1D:
    """Uniform samples ``lo, lo + h, ..., hi`` with ``count`` points."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("grid endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"need an integer count >= 2, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def sample(self, i: int) -> float:
        if not 0 <= i < self.count:
            raise IndexError(f"sample index {i} outside [0, {self.count})")
        if i == self.count - 1:
            return float(self.hi)
        return self.lo + i * self.spacing

    @property
    def points(self) -> np.ndarray:
        pts = self.lo + self.spacing * np.arange(self.count)
        pts[-1] = self.hi
        return pts


@dataclass(frozen=True)
class ImageGrid:
    """Pixel-centre coordinates of an odd ``m x m`` grid on ``[-m/2, m/2]^2``.

    Per axis the samples are ``-m/2 + m/(m-1) * i`` for ``i = 0..m-1``.  They
    are computed as ``spacing * (i - (m-1)/2)`` so that the coordinate set is
    exactly symmetric about 0 and contains 0.
    """

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 3 or self.m % 2 == 0:
            raise ValueError(f"image side must be an odd integer >= 3, got {self.m}")

    @property
    def spacing(self) -> float:
        return self.m / (self.m - 1)

    @property
    def center(self) -> int:
        return (self.m - 1) // 2

    @property
    def coords(self) -> np.ndarray:
        return self.spacing * (np.arange(self.m) - self.center)

    @property
    def x1(self) -> np.ndarray:
        """Column coordinates, left to right."""
        return self.coords

    @property
    def x2(self) -> np.ndarray:
        """Row coordinates, top (row 0) to bottom."""
        return self.coords[::-1].copy()

    @property
    def upper_rows(self) -> slice:
        """Rows with ``x2 > 0``."""
        return slice(0, self.center)


@dataclass(frozen=True)
class Image:
    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size != self.grid.m**2:
            raise ValueError(f"expected {self.grid.m**2} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", vals.reshape(self.grid.m, self.grid.m))

    @property
    def vector(self) -> np.ndarray:
        return self.values.ravel()

    @classmethod
    def zeros(cls, m: int) -> "Image":
        return cls(ImageGrid(m), np.zeros((m, m)))


@dataclass(frozen=True)
class Sinogram:
    """Transform samples indexed by (semi-axis ``p``, centre ``y1``)."""

    p_axis: Grid1D
    y_axis: Grid1D
    values: np.ndarray
    j: int
    s: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.p_axis.count, self.y_axis.count):
            raise ValueError(
                f"values shape {vals.shape} does not match axes "
                f"({self.p_axis.count}, {self.y_axis.count})"
            )
        if self.j not in (0, 1):
            raise ValueError(f"orientation j must be 0 or 1, got {self.j}")
        if not self.s > 0:
            raise ValueError(f"shape constant s must be positive, got {self.s}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SparseOperator:
    """A discretised forward map in compressed sparse row form.

    ``block_rows`` groups consecutive rows for the random-stream splitting
    used by :func:`abelradon.radon.perturb_matrix`; forward matrices set it
    to the number of ``y1`` samples so each ``p`` value owns one block.
    """

    matrix: sp.csr_matrix
    block_rows: int | None = field(default=None)

    def __post_init__(self):
        mat = sp.csr_matrix(self.matrix, dtype=np.float64)
        mat.sort_indices()
        if not np.all(np.diff(mat.indptr) >= 0):
            raise ValueError("row offsets must be non-decreasing")
        if mat.nnz and mat.indices.max() >= mat.shape[1]:
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(mat.data)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "matrix", mat)
        if self.block_rows is None:
            object.__setattr__(self, "block_rows", max(mat.shape[0], 1))

    @classmethod
    def from_csr(cls, rows, cols, row_offsets, col_indices, weights, block_rows=None):
        mat = sp.csr_matrix(
            (np.asarray(weights, float), np.asarray(col_indices), np.asarray(row_offsets)),
            shape=(rows, cols),
        )
        return cls(mat, block_rows)

    @classmethod
    def from_dense(cls, dense) -> "SparseOperator":
        return cls(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def weights(self) -> np.ndarray:
        return self.matrix.data

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size != self.cols:
            raise ValueError(f"operand length {x.size} != operator columns {self.cols}")
        return self.matrix @ x

    def rmatvec(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != self.rows:
            raise ValueError(f"operand length {y.size} != operator rows {self.rows}")
        return self.matrix.T @ y

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def grid_sample(g: Grid1D, i: int) -> float:
    return g.sample(i)


def sparse_apply(A, x) -> np.ndarray:
    return A.matvec(x)


def sparse_apply_adjoint(A, y) -> np.ndarray:
    return A.rmatvec(y)
