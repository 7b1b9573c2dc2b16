"""Finite descriptions and window enumeration of the lattice-type spaces.

Three space kinds:

* ``LatticePower``: (s * Z)^dim under the sup metric.
* ``DeviatingLattice``: points of R^dim (or of an ambient coarse lattice)
  with at most ``max_deviating`` coordinates off the deviation lattice.
* ``AsUnion``: asymptotic union of blocks, with the additive inter-block
  offset l + (l+1) + ... + (k-1); blocks may themselves be unions.

Every spec may carry a per-axis evaluation window and a grid granularity
delta; enumeration is exact and deterministic (lexicographic).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .cells import CellSet, Grid
from .dyadic import Dyadic, dy
from .errors import GuardError, InputError, check_guard
from .geometry import Box, Interval, TaggedPoint, asunion_distance, sup_distance

ZERO = Dyadic(0)


@dataclass(frozen=True)
class LatticePower:
    scale: Dyadic
    dim: int
    window: Optional[tuple] = None
    delta: Optional[Dyadic] = None

    def __post_init__(self):
        object.__setattr__(self, "scale", dy(self.scale))
        if self.scale <= ZERO:
            raise InputError("lattice scale must be positive")
        if self.delta is not None:
            object.__setattr__(self, "delta", dy(self.delta))
        if self.window is not None:
            object.__setattr__(self, "window", tuple(self.window))


@dataclass(frozen=True)
class DeviatingLattice:
    """At most ``max_deviating`` coordinates off ``lattice * Z``.

    With ``ambient`` set, all coordinates are additionally restricted to
    multiples of the ambient scale (the coarse-lattice variant).  A budget
    of ``max_deviating >= dim`` is allowed and makes the constraint
    vacuous.
    """

    dim: int
    lattice: Dyadic
    max_deviating: int
    ambient: Optional[Dyadic] = None
    window: Optional[tuple] = None
    delta: Optional[Dyadic] = None

    def __post_init__(self):
        object.__setattr__(self, "lattice", dy(self.lattice))
        if self.ambient is not None:
            object.__setattr__(self, "ambient", dy(self.ambient))
        if self.delta is not None:
            object.__setattr__(self, "delta", dy(self.delta))
        if self.window is not None:
            object.__setattr__(self, "window", tuple(self.window))
        if self.max_deviating < 0:
            raise InputError("max_deviating must be >= 0")


@dataclass(frozen=True)
class AsUnion:
    blocks: tuple
    start: int = 1

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.start < 1:
            raise InputError("asymptotic union block indices start at 1")

    def block_index(self, idx: int):
        pos = idx - self.start
        if pos < 0 or pos >= len(self.blocks):
            raise InputError(f"no block with index {idx}")
        return self.blocks[pos]

    def indices(self):
        return range(self.start, self.start + len(self.blocks))


SpaceSpec = Union[LatticePower, DeviatingLattice, AsUnion]


# ---------------------------------------------------------------------------
# membership


def leaf_dim(spec) -> int:
    if isinstance(spec, (LatticePower, DeviatingLattice)):
        return spec.dim
    raise InputError("leaf_dim applies to leaf specs only")


def contains(spec: SpaceSpec, x: TaggedPoint) -> bool:
    """Exact membership; the window plays no role here."""
    if isinstance(spec, AsUnion):
        if not x.block:
            return False
        head, rest = x.block[0], x.block[1:]
        try:
            sub = spec.block_index(head)
        except InputError:
            return False
        return contains(sub, TaggedPoint(rest, x.coords))
    if x.block:
        return False
    if len(x.coords) != spec.dim:
        raise InputError(f"point dimension {len(x.coords)} != space dimension {spec.dim}")
    if isinstance(spec, LatticePower):
        return all(c.is_multiple_of(spec.scale) for c in x.coords)
    deviating = 0
    for c in x.coords:
        if spec.ambient is not None and not c.is_multiple_of(spec.ambient):
            return False
        if not c.is_multiple_of(spec.lattice):
            deviating += 1
    return deviating <= spec.max_deviating


def space_distance(spec: SpaceSpec, x: TaggedPoint, y: TaggedPoint) -> Dyadic:
    """asunion metric with membership validation against the spec."""
    for p in (x, y):
        if not contains(spec, p):
            raise InputError(f"point {p} is outside the declared space")
    if isinstance(spec, AsUnion):
        return asunion_distance(x, y)
    return sup_distance(x.coords, y.coords)


# ---------------------------------------------------------------------------
# windows, positions, cardinality


def _axis_positions(iv: Interval, step: Dyadic):
    """Grid positions of ``step * Z`` inside the interval, ascending."""
    k_lo = iv.lo.ceildiv(step)
    if not iv.contains(step * k_lo):
        k_lo += 1
    k_hi = iv.hi.floordiv(step)
    if not iv.contains(step * k_hi):
        k_hi -= 1
    return [step * k for k in range(k_lo, k_hi + 1)]


def _leaf_axis_sets(spec, window=None, delta=None):
    """Per axis: (lattice positions, deviating positions)."""
    window = window if window is not None else spec.window
    if window is None:
        raise InputError("space has no evaluation window")
    if len(window) != spec.dim:
        raise InputError("window arity does not match space dimension")
    if isinstance(spec, LatticePower):
        return [(_axis_positions(iv, spec.scale), []) for iv in window]
    if spec.ambient is not None:
        base_step = spec.ambient
    else:
        base_step = delta if delta is not None else spec.delta
        if base_step is None:
            raise InputError("deviating lattice over R needs a delta granularity")
        base_step = dy(base_step)
    out = []
    for iv in window:
        base = _axis_positions(iv, base_step)
        lat = [p for p in base if p.is_multiple_of(spec.lattice)]
        devs = [p for p in base if not p.is_multiple_of(spec.lattice)]
        out.append((lat, devs))
    return out


def cardinality(spec: SpaceSpec, window=None, delta=None) -> int:
    """Exact number of enumerable points in the window."""
    if isinstance(spec, AsUnion):
        return sum(cardinality(b) for b in spec.blocks)
    axes = _leaf_axis_sets(spec, window, delta)
    k = spec.max_deviating if isinstance(spec, DeviatingLattice) else 0
    k = min(k, spec.dim)
    # Polynomial DP in the number of deviating coordinates.
    coeffs = [1] + [0] * k
    for lat, devs in axes:
        nxt = [0] * (k + 1)
        for t, c in enumerate(coeffs):
            if c == 0:
                continue
            nxt[t] += c * len(lat)
            if t + 1 <= k:
                nxt[t + 1] += c * len(devs)
        coeffs = nxt
    return sum(coeffs)


def enumerate_window(spec: SpaceSpec, window=None, delta=None, guard=None):
    """All window points of the space, lexicographic per block."""
    if isinstance(spec, AsUnion):
        total = cardinality(spec)
        check_guard(total, "asymptotic union enumeration", guard)
        out = []
        for idx in spec.indices():
            sub = spec.block_index(idx)
            for p in enumerate_window(sub, guard=guard):
                out.append(TaggedPoint((idx,) + p.block, p.coords))
        return out
    total = cardinality(spec, window, delta)
    check_guard(total, "window enumeration", guard)
    axes = _leaf_axis_sets(spec, window, delta)
    k = spec.max_deviating if isinstance(spec, DeviatingLattice) else 0
    k = min(k, spec.dim)
    points = []
    dims = range(spec.dim)
    for size in range(0, k + 1):
        for dev_axes in itertools.combinations(dims, size):
            dev_set = set(dev_axes)
            choices = [
                axes[j][1] if j in dev_set else axes[j][0] for j in dims
            ]
            if any(len(c) == 0 for c in choices):
                continue
            for combo in itertools.product(*choices):
                points.append(TaggedPoint((), combo))
    points.sort(key=lambda p: p.coords)
    return points


def rasterize_space(spec, window=None, delta=None, guard=None) -> CellSet:
    """Exact delta-grid indicator of a leaf space on its window."""
    if isinstance(spec, AsUnion):
        raise InputError("rasterize applies to leaf spaces; enumerate unions instead")
    window = window if window is not None else spec.window
    delta = dy(delta) if delta is not None else spec.delta
    if window is None or delta is None:
        raise InputError("rasterization needs a window and a delta")
    grid = Grid.from_window(window, delta, guard=guard)
    if isinstance(spec, LatticePower):
        constraint_scale = spec.scale
        budget = 0
    else:
        constraint_scale = spec.lattice
        budget = spec.max_deviating
    dev_total = np.zeros(grid.shape, dtype=np.int16)
    valid = np.ones(grid.shape, dtype=bool)
    for j in range(spec.dim):
        n = grid.shape[j]
        dev = np.zeros(n, dtype=bool)
        ok = np.ones(n, dtype=bool)
        for i in range(n):
            x = grid.origin[j] + grid.delta * i
            if isinstance(spec, DeviatingLattice) and spec.ambient is not None:
                if not x.is_multiple_of(spec.ambient):
                    ok[i] = False
                    continue
            dev[i] = not x.is_multiple_of(constraint_scale)
        shape = [1] * grid.dim
        shape[j] = n
        dev_total = dev_total + dev.astype(np.int16).reshape(shape)
        valid = valid & ok.reshape(shape)
    bits = valid & (dev_total <= budget)
    return CellSet(grid, bits)


# ---------------------------------------------------------------------------
# cube grids and skeleta


@dataclass(frozen=True)
class CubeGrid:
    """Decomposition of [0, side]^dim into cells of edge length ``edge``."""

    side: Dyadic
    dim: int
    edge: Dyadic

    def __post_init__(self):
        object.__setattr__(self, "side", dy(self.side))
        object.__setattr__(self, "edge", dy(self.edge))
        if not self.side.is_multiple_of(self.edge):
            raise InputError(
                f"cube side {self.side} is not an integer multiple of edge {self.edge}"
            )

    @property
    def p(self) -> int:
        return self.side.floordiv(self.edge)

    @property
    def cell_count(self) -> int:
        return self.p ** self.dim

    def psi(self, t: int) -> tuple:
        """Bijection {1..p^dim} -> {0..p-1}^dim (row major)."""
        if t < 1 or t > self.cell_count:
            raise InputError(f"cell index {t} out of range")
        t -= 1
        digits = []
        for _ in range(self.dim):
            digits.append(t % self.p)
            t //= self.p
        return tuple(reversed(digits))

    def psi_inv(self, cell: Sequence[int]) -> int:
        t = 0
        for c in cell:
            if c < 0 or c >= self.p:
                raise InputError(f"cell coordinate {c} out of range")
            t = t * self.p + c
        return t + 1

    def cell_box(self, cell: Sequence[int]) -> Box:
        return Box(
            tuple(
                Interval(self.edge * c, self.edge * (c + 1)) for c in cell
            )
        )

    def cells(self):
        return itertools.product(range(self.p), repeat=self.dim)

    def window(self) -> tuple:
        return tuple(Interval(ZERO, self.side) for _ in range(self.dim))


def cube_grid(B, m: int, k: int) -> CubeGrid:
    """Grid of edge 2^(m+k) over [0, 6B]^(m+k); 6B must be divisible."""
    B = dy(B)
    dim = m + k
    return CubeGrid(B * 6, dim, Dyadic.two_pow(dim))


def skeleton(grid: CubeGrid, cells: Iterable, k: int, delta) -> CellSet:
    """Union of k-faces of the selected cells, rasterized at delta.

    A grid point belongs to a k-face of a cell iff it lies in the closed
    cell and at least dim - k of its coordinates sit on the cell's face
    hyperplanes.
    """
    if k < 0 or k > grid.dim:
        raise InputError(f"skeleton order {k} out of range 0..{grid.dim}")
    delta = dy(delta)
    if not grid.edge.is_multiple_of(delta):
        raise InputError("delta must divide the cell edge")
    g = Grid.from_window(grid.window(), delta)
    q = grid.edge.floordiv(delta)  # steps per cell edge
    bits = np.zeros(g.shape, dtype=bool)
    need = grid.dim - k
    for cell in cells:
        ranges = []
        for c in cell:
            lo = c * q
            ranges.append((lo, lo + q))
        counts = np.zeros([hi - lo + 1 for lo, hi in ranges], dtype=np.int8)
        for axis, (lo, hi) in enumerate(ranges):
            n = hi - lo + 1
            onface = np.zeros(n, dtype=bool)
            onface[0] = True
            onface[-1] = True
            shape = [1] * grid.dim
            shape[axis] = n
            counts = counts + onface.astype(np.int8).reshape(shape)
        sel = tuple(slice(lo, hi + 1) for lo, hi in ranges)
        bits[sel] |= counts >= need
    return CellSet(g, bits)


# ---------------------------------------------------------------------------
# serialization


def window_to_json(window):
    if window is None:
        return None
    return [iv.to_json() for iv in window]


def window_from_json(doc):
    if doc is None:
        return None
    return tuple(Interval.from_json(d) for d in doc)


def space_to_json(spec: SpaceSpec):
    if isinstance(spec, LatticePower):
        return {
            "kind": "lattice_power",
            "scale": str(spec.scale),
            "dim": spec.dim,
            "window": window_to_json(spec.window),
            "delta": str(spec.delta) if spec.delta is not None else None,
        }
    if isinstance(spec, DeviatingLattice):
        return {
            "kind": "deviating_lattice",
            "dim": spec.dim,
            "lattice": str(spec.lattice),
            "max_deviating": spec.max_deviating,
            "ambient": str(spec.ambient) if spec.ambient is not None else None,
            "window": window_to_json(spec.window),
            "delta": str(spec.delta) if spec.delta is not None else None,
        }
    if isinstance(spec, AsUnion):
        return {
            "kind": "as_union",
            "start": spec.start,
            "blocks": [space_to_json(b) for b in spec.blocks],
        }
    raise InputError(f"unknown space spec {spec!r}")


def space_from_json(doc) -> SpaceSpec:
    kind = doc.get("kind")
    if kind == "lattice_power":
        return LatticePower(
            Dyadic.parse(doc["scale"]),
            int(doc["dim"]),
            window_from_json(doc.get("window")),
            Dyadic.parse(doc["delta"]) if doc.get("delta") else None,
        )
    if kind == "deviating_lattice":
        return DeviatingLattice(
            int(doc["dim"]),
            Dyadic.parse(doc["lattice"]),
            int(doc["max_deviating"]),
            Dyadic.parse(doc["ambient"]) if doc.get("ambient") else None,
            window_from_json(doc.get("window")),
            Dyadic.parse(doc["delta"]) if doc.get("delta") else None,
        )
    if kind == "as_union":
        return AsUnion(
            tuple(space_from_json(b) for b in doc["blocks"]),
            int(doc.get("start", 1)),
        )
    raise InputError(f"unknown space kind {kind!r}")


def xwk_space(i: int, n: int, k: int, window=None, delta=None) -> DeviatingLattice:
    """R^i points with at most k coordinates off the 2^n lattice."""
    return DeviatingLattice(i, Dyadic.two_pow(n), k, None, window, delta)


def ywk_space(i: int, k: int, window=None, delta=None) -> DeviatingLattice:
    """(2^k Z)^i points with at most k coordinates off the 2^i lattice."""
    return DeviatingLattice(
        i, Dyadic.two_pow(i), k, Dyadic.two_pow(k), window, delta
    )
