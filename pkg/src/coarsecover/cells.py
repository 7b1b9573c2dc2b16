"""Dense bitsets over dyadic grid windows.

The partition machinery works on CellSets: boolean arrays over a
rectangular delta-grid.  All metric operations use the sup (chessboard)
metric, where grid distances are exact integer step counts times delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from .dyadic import Dyadic, dy
from .errors import InputError, check_guard
from .geometry import Interval

_UNREACHABLE = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class Grid:
    """Rectangular delta-grid: points origin + index * delta per axis."""

    origin: tuple
    delta: Dyadic
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(dy(o) for o in self.origin))
        object.__setattr__(self, "delta", dy(self.delta))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.delta <= Dyadic(0):
            raise InputError("grid delta must be positive")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @classmethod
    def from_window(cls, window, delta, guard=None) -> "Grid":
        delta = dy(delta)
        origin = []
        shape = []
        total = 1
        for iv in window:
            if not (iv.hi - iv.lo).is_multiple_of(delta):
                raise InputError(f"delta {delta} does not divide window extent of {iv.lo}:{iv.hi}")
            origin.append(iv.lo)
            n = (iv.hi - iv.lo).floordiv(delta) + 1
            shape.append(n)
            total *= n
        check_guard(total, "grid window", guard)
        return cls(tuple(origin), delta, tuple(shape))

    def point(self, index) -> tuple:
        return tuple(o + self.delta * int(i) for o, i in zip(self.origin, index))

    def index(self, coords) -> Optional[tuple]:
        out = []
        for o, x, n in zip(self.origin, coords, self.shape):
            off = dy(x) - o
            if not off.is_multiple_of(self.delta):
                return None
            i = off.floordiv(self.delta)
            if i < 0 or i >= n:
                return None
            out.append(i)
        return tuple(out)

    def extent(self, axis: int) -> Dyadic:
        return self.delta * (self.shape[axis] - 1)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    return dy(value).as_fraction()


def steps_lt(radius, delta) -> int:
    """Largest step count t with t * delta < radius (-1 when radius <= 0)."""
    import math

    r = _as_fraction(radius) / dy(delta).as_fraction()
    return math.ceil(r) - 1


def steps_le(radius, delta) -> int:
    """Largest step count t with t * delta <= radius."""
    import math

    r = _as_fraction(radius) / dy(delta).as_fraction()
    return math.floor(r)


class CellSet:
    """Immutable-by-convention boolean mask over a Grid."""

    __slots__ = ("grid", "bits")

    def __init__(self, grid: Grid, bits: np.ndarray):
        if tuple(bits.shape) != grid.shape:
            raise InputError("bitmask shape does not match grid")
        self.grid = grid
        self.bits = bits.astype(bool, copy=False)

    # -- constructors ---------------------------------------------------

    @classmethod
    def empty(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_points(cls, grid: Grid, points: Iterable) -> "CellSet":
        bits = np.zeros(grid.shape, dtype=bool)
        for p in points:
            idx = grid.index(p)
            if idx is None:
                raise InputError(f"point {p} is not on the grid")
            bits[idx] = True
        return cls(grid, bits)

    @classmethod
    def from_indices(cls, grid: Grid, indices: Iterable) -> "CellSet":
        bits = np.zeros(grid.shape, dtype=bool)
        for idx in indices:
            bits[tuple(idx)] = True
        return cls(grid, bits)

    # -- set algebra ------------------------------------------------------

    def _check(self, other: "CellSet"):
        if other.grid != self.grid:
            raise InputError("cell sets live on different grids")

    def union(self, other: "CellSet") -> "CellSet":
        self._check(other)
        return CellSet(self.grid, self.bits | other.bits)

    def intersect(self, other: "CellSet") -> "CellSet":
        self._check(other)
        return CellSet(self.grid, self.bits & other.bits)

    def difference(self, other: "CellSet") -> "CellSet":
        self._check(other)
        return CellSet(self.grid, self.bits & ~other.bits)

    def complement(self) -> "CellSet":
        return CellSet(self.grid, ~self.bits)

    def issubset(self, other: "CellSet") -> bool:
        self._check(other)
        return bool(np.all(~self.bits | other.bits))

    def __eq__(self, other):
        return isinstance(other, CellSet) and self.grid == other.grid and bool(
            np.array_equal(self.bits, other.bits)
        )

    def __hash__(self):
        raise TypeError("CellSet is not hashable")

    # -- queries ----------------------------------------------------------

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    def indices(self) -> np.ndarray:
        return np.argwhere(self.bits)

    def points(self):
        for idx in self.indices():
            yield self.grid.point(tuple(int(i) for i in idx))

    def first_point(self):
        idx = self.indices()
        if len(idx) == 0:
            return None
        return self.grid.point(tuple(int(i) for i in idx[0]))

    def diameter(self) -> Dyadic:
        """Exact sup-metric diameter (max per-axis index span)."""
        if self.is_empty():
            raise InputError("diameter of empty cell set")
        idx = self.indices()
        span = int((idx.max(axis=0) - idx.min(axis=0)).max())
        return self.grid.delta * span

    def axis_min(self, axis: int) -> int:
        return int(self.indices()[:, axis].min())

    def axis_max(self, axis: int) -> int:
        return int(self.indices()[:, axis].max())

    # -- sup-metric morphology ---------------------------------------------

    def _dist_steps(self) -> np.ndarray:
        """Chessboard step count from every grid cell to this set."""
        if self.is_empty():
            return np.full(self.grid.shape, _UNREACHABLE, dtype=np.int64)
        if self.bits.all():
            return np.zeros(self.grid.shape, dtype=np.int64)
        dt = ndimage.distance_transform_cdt(~self.bits, metric="chessboard")
        return dt.astype(np.int64)

    def dilate_steps(self, t: int) -> "CellSet":
        if t < 0:
            return CellSet.empty(self.grid)
        if t == 0:
            return CellSet(self.grid, self.bits.copy())
        return CellSet(self.grid, self._dist_steps() <= t)

    def dilate_lt(self, radius) -> "CellSet":
        """Open neighborhood: cells at sup distance strictly below radius."""
        return self.dilate_steps(steps_lt(radius, self.grid.delta))

    def dilate_le(self, radius) -> "CellSet":
        return self.dilate_steps(steps_le(radius, self.grid.delta))

    def erode_gt(self, radius) -> "CellSet":
        """Cells whose sup distance to the complement exceeds radius."""
        comp = self.complement()
        t = steps_le(radius, self.grid.delta)
        return CellSet(self.grid, comp._dist_steps() > t)

    def distance_to(self, other: "CellSet") -> Optional[Dyadic]:
        """Exact sup-metric distance between the two sets (None if one empty)."""
        self._check(other)
        if self.is_empty() or other.is_empty():
            return None
        steps = int(self._dist_steps()[other.bits].min())
        return self.grid.delta * steps

    def distance_to_face(self, axis: int, positive: bool) -> Optional[Dyadic]:
        if self.is_empty():
            return None
        if positive:
            steps = self.grid.shape[axis] - 1 - self.axis_max(axis)
        else:
            steps = self.axis_min(axis)
        return self.grid.delta * steps

    def adjacent_to(self, other: "CellSet") -> bool:
        """True when some cells of self/other are equal or axis-neighbors."""
        self._check(other)
        if self.is_empty() or other.is_empty():
            return False
        if bool((self.bits & other.bits).any()):
            return True
        for axis in range(self.grid.dim):
            for shift in (1, -1):
                a = _shift(self.bits, axis, shift)
                if bool((a & other.bits).any()):
                    return True
        return False


def _shift(bits: np.ndarray, axis: int, shift: int) -> np.ndarray:
    out = np.zeros_like(bits)
    src = [slice(None)] * bits.ndim
    dst = [slice(None)] * bits.ndim
    if shift > 0:
        src[axis] = slice(0, bits.shape[axis] - shift)
        dst[axis] = slice(shift, None)
    else:
        src[axis] = slice(-shift, None)
        dst[axis] = slice(0, bits.shape[axis] + shift)
    out[tuple(dst)] = bits[tuple(src)]
    return out


def face_set(grid: Grid, axis: int, positive: bool) -> CellSet:
    bits = np.zeros(grid.shape, dtype=bool)
    sel = [slice(None)] * grid.dim
    sel[axis] = grid.shape[axis] - 1 if positive else 0
    bits[tuple(sel)] = True
    return CellSet(grid, bits)


def rasterize_box_on_grid(box, grid: Grid) -> CellSet:
    """Exact delta-grid rasterization of a Box (endpoint flags respected)."""
    from .geometry import Box  # local import to avoid cycle in typing

    axis_masks = []
    for j in range(box.dim):
        iv = box.factors[j]
        n = grid.shape[j]
        o = grid.origin[j]
        lo_steps = (iv.lo - o).ceildiv(grid.delta)
        if not iv.lo_closed and o + grid.delta * lo_steps == iv.lo:
            lo_steps += 1
        hi_steps = (iv.hi - o).floordiv(grid.delta)
        if not iv.hi_closed and o + grid.delta * hi_steps == iv.hi:
            hi_steps -= 1
        mask = np.zeros(n, dtype=bool)
        lo_steps = max(lo_steps, 0)
        hi_steps = min(hi_steps, n - 1)
        if lo_steps <= hi_steps:
            mask[lo_steps : hi_steps + 1] = True
        axis_masks.append(mask)
    bits = axis_masks[0]
    for m in axis_masks[1:]:
        bits = bits[..., None] & m
    c = box.constraint
    if c is not None:
        dev_total = np.zeros(grid.shape, dtype=np.int16)
        for j in range(box.dim):
            n = grid.shape[j]
            dev = np.ones(n, dtype=bool)
            for i in range(n):
                x = grid.origin[j] + grid.delta * i
                if c.lattice_scale is not None:
                    dev[i] = not x.is_multiple_of(c.lattice_scale)
                else:
                    core = c.cores[j]
                    dev[i] = core is None or not core.contains(x)
            shape = [1] * grid.dim
            shape[j] = n
            dev_total = dev_total + dev.astype(np.int16).reshape(shape)
        bits = bits & (dev_total <= c.max_deviating)
    return CellSet(grid, bits)
