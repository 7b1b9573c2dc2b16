"""Symbolic geometry under the sup metric.

Intervals carry open/closed endpoint flags.  A Box is a product of
intervals, optionally intersected with a deviation constraint ("at most k
coordinates off a lattice", or after exact fattening, "at most k
coordinates outside a per-axis core interval").  Distances and diameters
are computed as exact inf/sup values over closures; no point enumeration
is involved.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dyadic import Dyadic, dy
from .errors import EmptySetError, InputError

ZERO = Dyadic(0)


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class Interval:
    lo: Dyadic
    hi: Dyadic
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", dy(self.lo))
        object.__setattr__(self, "hi", dy(self.hi))
        if self.lo > self.hi:
            raise EmptySetError(f"interval with lo {self.lo} > hi {self.hi}")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise EmptySetError("degenerate interval must be closed on both ends")

    @property
    def length(self) -> Dyadic:
        return self.hi - self.lo

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x) -> bool:
        x = dy(x)
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def gap(self, other: "Interval") -> Dyadic:
        """Exact distance between the two interval hulls (0 if they meet)."""
        return max(ZERO, other.lo - self.hi, self.lo - other.hi)

    def span(self, other: "Interval") -> Dyadic:
        """sup |x - y| over the closures."""
        return max(other.hi - self.lo, self.hi - other.lo)

    def shift(self, dx) -> "Interval":
        dx = dy(dx)
        return Interval(self.lo + dx, self.hi + dx, self.lo_closed, self.hi_closed)

    def fatten(self, eps) -> "Interval":
        eps = dy(eps)
        if eps == ZERO:
            if self.is_point():
                return self
            return Interval(self.lo, self.hi, False, False)
        return Interval(self.lo - eps, self.hi + eps, False, False)

    def intersects(self, other: "Interval") -> bool:
        if self.hi < other.lo or other.hi < self.lo:
            return False
        if self.hi == other.lo:
            return self.hi_closed and other.lo_closed
        if other.hi == self.lo:
            return other.hi_closed and self.lo_closed
        return True

    def to_json(self):
        return {
            "lo": str(self.lo),
            "hi": str(self.hi),
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }

    @classmethod
    def from_json(cls, doc) -> "Interval":
        return cls(
            Dyadic.parse(doc["lo"]),
            Dyadic.parse(doc["hi"]),
            bool(doc.get("lo_closed", True)),
            bool(doc.get("hi_closed", True)),
        )

    @classmethod
    def point(cls, x) -> "Interval":
        x = dy(x)
        return cls(x, x)


def window_from_ranges(ranges: Sequence[tuple]) -> tuple:
    return tuple(Interval(dy(a), dy(b)) for a, b in ranges)


# ---------------------------------------------------------------------------
# lattice slices (internal helper for the constrained case analysis)


@dataclass(frozen=True)
class _Slice:
    """Nonempty arithmetic progression first, first+step, ..., last."""

    first: Dyadic
    last: Dyadic
    step: Dyadic

    @property
    def count(self) -> int:
        if self.step == ZERO:
            return 1
        return (self.last - self.first).floordiv(self.step) + 1

    def hull(self) -> Interval:
        return Interval(self.first, self.last)


def lattice_slice(interval: Interval, scale: Dyadic) -> Optional[_Slice]:
    """Multiples of ``scale`` inside the interval, or None when empty."""
    scale = dy(scale)
    if scale <= ZERO:
        raise InputError("lattice scale must be positive")
    k_lo = interval.lo.ceildiv(scale)
    if not interval.contains(scale * k_lo):
        k_lo += 1
    k_hi = interval.hi.floordiv(scale)
    if not interval.contains(scale * k_hi):
        k_hi -= 1
    if k_lo > k_hi:
        return None
    return _Slice(scale * k_lo, scale * k_hi, scale)


def _slice_interval_gap(sl: _Slice, iv: Interval) -> Dyadic:
    """Exact distance between a slice and an interval hull."""
    if sl.step == ZERO or sl.count == 1:
        p = sl.first
        return max(ZERO, iv.lo - p, p - iv.hi)
    # Nearest slice point to the interval.
    if sl.last < iv.lo:
        return iv.lo - sl.last
    if sl.first > iv.hi:
        return sl.first - iv.hi
    # Hulls overlap; check whether a slice point lands inside [lo, hi].
    k = (iv.lo - sl.first).ceildiv(sl.step)
    k = max(0, min(k, sl.count - 1))
    cand = sl.first + sl.step * k
    if cand <= iv.hi:
        return ZERO
    below = sl.first + sl.step * (k - 1) if k >= 1 else None
    d = cand - iv.hi
    if below is not None and below >= sl.first:
        d = min(d, iv.lo - below)
    return d


def _slice_slice_gap(a: _Slice, b: _Slice) -> Dyadic:
    if a.step == b.step and a.step != ZERO and \
            (a.first - b.first).is_multiple_of(a.step):
        # Aligned progressions: they share a point iff the hulls overlap.
        if a.last < b.first:
            return b.first - a.last
        if b.last < a.first:
            return a.first - b.last
        return ZERO
    small, big = (a, b) if a.count <= b.count else (b, a)
    if small.count > 4096:
        raise InputError("lattice slice too large for exact case analysis")
    best = None
    for t in range(small.count):
        p = small.first + small.step * t
        d = _slice_interval_gap(big, Interval.point(p))
        if best is None or d < best:
            best = d
            if best == ZERO:
                break
    return best


# ---------------------------------------------------------------------------
# deviation constraints


@dataclass(frozen=True)
class Constraint:
    """At most ``max_deviating`` coordinates may deviate.

    lattice mode: a coordinate deviates iff it is not a multiple of
    ``lattice_scale``.  core mode: a coordinate deviates iff it lies
    outside its per-axis core interval (None core = always deviates).
    """

    max_deviating: int
    lattice_scale: Optional[Dyadic] = None
    cores: Optional[tuple] = None

    def __post_init__(self):
        if (self.lattice_scale is None) == (self.cores is None):
            raise InputError("constraint needs exactly one of lattice_scale / cores")
        if self.max_deviating < 0:
            raise InputError("max_deviating must be >= 0")
        if self.lattice_scale is not None:
            object.__setattr__(self, "lattice_scale", dy(self.lattice_scale))

    def to_json(self):
        doc = {"max_deviating": self.max_deviating}
        if self.lattice_scale is not None:
            doc["lattice_scale"] = str(self.lattice_scale)
        else:
            doc["cores"] = [c.to_json() if c is not None else None for c in self.cores]
        return doc

    @classmethod
    def from_json(cls, doc) -> "Constraint":
        if "lattice_scale" in doc:
            return cls(doc["max_deviating"], lattice_scale=Dyadic.parse(doc["lattice_scale"]))
        cores = tuple(
            Interval.from_json(c) if c is not None else None for c in doc["cores"]
        )
        return cls(doc["max_deviating"], cores=cores)


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class Box:
    factors: tuple
    constraint: Optional[Constraint] = None
    overapprox: bool = False

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        c = self.constraint
        if c is not None:
            if c.cores is not None and len(c.cores) != len(self.factors):
                raise InputError("core constraint arity does not match box dimension")
            if len(self._pinnable_axes()) < len(self.factors) - c.max_deviating:
                raise EmptySetError("deviation constraint leaves the box empty")

    @property
    def dim(self) -> int:
        return len(self.factors)

    def _axis_option(self, j: int):
        """Pinned-position set for axis j: ('interval', iv) | ('slice', sl) | None."""
        c = self.constraint
        if c is None:
            return ("interval", self.factors[j])
        if c.lattice_scale is not None:
            sl = lattice_slice(self.factors[j], c.lattice_scale)
            return None if sl is None else ("slice", sl)
        core = c.cores[j]
        return None if core is None else ("interval", core)

    def _pinnable_axes(self):
        if self.constraint is None:
            return list(range(self.dim))
        return [j for j in range(self.dim) if self._axis_option(j) is not None]

    def pieces(self):
        """Per-axis option tuples whose union is the box set (exact)."""
        c = self.constraint
        free = [("interval", f) for f in self.factors]
        if c is None or c.max_deviating >= self.dim:
            yield tuple(free)
            return
        pinnable = self._pinnable_axes()
        need = self.dim - c.max_deviating
        for pinned in itertools.combinations(pinnable, need):
            piece = list(free)
            for j in pinned:
                piece[j] = self._axis_option(j)
            yield tuple(piece)

    def contains(self, coords: Sequence) -> bool:
        coords = tuple(dy(x) for x in coords)
        if len(coords) != self.dim:
            return False
        deviating = 0
        for j, x in enumerate(coords):
            if not self.factors[j].contains(x):
                return False
            c = self.constraint
            if c is None:
                continue
            if c.lattice_scale is not None:
                if not x.is_multiple_of(c.lattice_scale):
                    deviating += 1
            else:
                core = c.cores[j]
                if core is None or not core.contains(x):
                    deviating += 1
        if self.constraint is not None and deviating > self.constraint.max_deviating:
            return False
        return True

    def translate(self, vector: Sequence) -> "Box":
        vector = tuple(dy(v) for v in vector)
        factors = tuple(f.shift(v) for f, v in zip(self.factors, vector))
        c = self.constraint
        if c is not None and c.cores is not None:
            cores = tuple(
                core.shift(v) if core is not None else None
                for core, v in zip(c.cores, vector)
            )
            c = Constraint(c.max_deviating, cores=cores)
        return Box(factors, c, self.overapprox)

    def hull(self) -> "Box":
        return Box(self.factors)

    def to_json(self):
        doc = {"factors": [f.to_json() for f in self.factors]}
        if self.constraint is not None:
            doc["constraint"] = self.constraint.to_json()
        if self.overapprox:
            doc["overapprox"] = True
        return doc

    @classmethod
    def from_json(cls, doc) -> "Box":
        return cls(
            tuple(Interval.from_json(f) for f in doc["factors"]),
            Constraint.from_json(doc["constraint"]) if "constraint" in doc else None,
            bool(doc.get("overapprox", False)),
        )

    @classmethod
    def cube(cls, lo, hi, dim, closed=True, constraint=None) -> "Box":
        iv = Interval(dy(lo), dy(hi), closed, closed)
        return cls((iv,) * dim, constraint)

    @classmethod
    def point_box(cls, coords) -> "Box":
        return cls(tuple(Interval.point(x) for x in coords))


def _axis_gap(a, b) -> Dyadic:
    ka, va = a
    kb, vb = b
    if ka == "interval" and kb == "interval":
        return va.gap(vb)
    if ka == "slice" and kb == "interval":
        return _slice_interval_gap(va, vb)
    if ka == "interval" and kb == "slice":
        return _slice_interval_gap(vb, va)
    return _slice_slice_gap(va, vb)


def _axis_span(a, b) -> Dyadic:
    va = a[1].hull() if a[0] == "slice" else a[1]
    vb = b[1].hull() if b[0] == "slice" else b[1]
    return va.span(vb)


def box_distance(a: Box, b: Box) -> Dyadic:
    """Exact inf of sup-metric distance between the two box sets."""
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch {a.dim} != {b.dim}")
    if a.constraint is None and b.constraint is None:
        best = ZERO
        for fa, fb in zip(a.factors, b.factors):
            g = fa.gap(fb)
            if g > best:
                best = g
        return best
    best = None
    for pa in a.pieces():
        for pb in b.pieces():
            d = ZERO
            for ja in range(a.dim):
                g = _axis_gap(pa[ja], pb[ja])
                if g > d:
                    d = g
                if best is not None and d >= best:
                    break
            if best is None or d < best:
                best = d
                if best == ZERO:
                    return best
    if best is None:
        raise EmptySetError("box has no feasible piece")
    return best


def box_distance_lower(a: Box, b: Box) -> Dyadic:
    """Cheap lower bound: the unconstrained hull distance."""
    return box_distance(a.hull(), b.hull())


def box_diameter(a: Box) -> Dyadic:
    """Exact sup of sup-metric distance over the box set."""
    if a.constraint is None:
        best = ZERO
        for f in a.factors:
            if f.length > best:
                best = f.length
        return best
    pieces = list(a.pieces())
    if not pieces:
        raise EmptySetError("box has no feasible piece")
    best = ZERO
    for i, pa in enumerate(pieces):
        for pb in pieces[i:]:
            d = ZERO
            for j in range(a.dim):
                s = _axis_span(pa[j], pb[j])
                if s > d:
                    d = s
            if d > best:
                best = d
    return best


def fatten(a: Box, eps) -> Box:
    """Open eps-enlargement of the box set in the sup metric.

    Lattice constraints whose per-axis slices are single points fatten
    exactly into core constraints; multi-point slices force dropping the
    constraint, flagged as an over-approximation.
    """
    eps = dy(eps)
    if eps < ZERO:
        raise InputError("fatten needs eps >= 0")
    factors = tuple(f.fatten(eps) for f in a.factors)
    if eps == ZERO:
        return Box(factors, a.constraint, a.overapprox)
    c = a.constraint
    if c is None:
        return Box(factors, None, a.overapprox)
    if c.cores is not None:
        cores = tuple(
            core.fatten(eps) if core is not None else None for core in c.cores
        )
        return Box(factors, Constraint(c.max_deviating, cores=cores), a.overapprox)
    cores = []
    exact = True
    for j in range(a.dim):
        sl = lattice_slice(a.factors[j], c.lattice_scale)
        if sl is None:
            cores.append(None)
        elif sl.count == 1:
            cores.append(Interval(sl.first - eps, sl.first + eps, False, False))
        else:
            exact = False
            break
    if exact:
        return Box(factors, Constraint(c.max_deviating, cores=tuple(cores)), a.overapprox)
    return Box(factors, None, True)


# ---------------------------------------------------------------------------
# points and metrics


def sup_distance(p: Sequence, q: Sequence) -> Dyadic:
    if len(p) != len(q):
        raise InputError(f"length mismatch {len(p)} != {len(q)}")
    best = ZERO
    for a, b in zip(p, q):
        d = abs(dy(a) - dy(b))
        if d > best:
            best = d
    return best


def asunion_offset(l: int, k: int) -> Dyadic:
    """Additive constant between block l and block k (l <= k)."""
    if l > k:
        raise InputError(f"asunion_offset needs l <= k, got {l} > {k}")
    if l < 1:
        raise InputError("block indices start at 1")
    return Dyadic(sum(range(l, k)))


@dataclass(frozen=True)
class TaggedPoint:
    """Point of an asymptotic union: block path plus coordinates.

    The block path is a tuple of indices, one per nesting level; plain
    (non-union) spaces use the empty path.
    """

    block: tuple
    coords: tuple

    def __post_init__(self):
        blk = self.block
        if isinstance(blk, int):
            blk = (blk,)
        object.__setattr__(self, "block", tuple(blk))
        object.__setattr__(self, "coords", tuple(dy(x) for x in self.coords))

    def to_json(self):
        return {"block": list(self.block), "coords": [str(x) for x in self.coords]}

    @classmethod
    def from_json(cls, doc) -> "TaggedPoint":
        return cls(tuple(doc["block"]), tuple(Dyadic.parse(c) for c in doc["coords"]))


def _pad(coords: tuple, n: int) -> tuple:
    return coords + (ZERO,) * (n - len(coords))


def asunion_distance(x: TaggedPoint, y: TaggedPoint) -> Dyadic:
    """Metric of the (possibly nested) asymptotic union.

    Blocks embed into the common ambient sup-metric space by zero padding;
    each nesting level where the block indices differ contributes the
    additive offset l + (l+1) + ... + (k-1).
    """
    if len(x.block) != len(y.block):
        raise InputError("points come from unions of different nesting depth")
    n = max(len(x.coords), len(y.coords))
    d = sup_distance(_pad(x.coords, n), _pad(y.coords, n))
    for l, k in zip(x.block, y.block):
        if l != k:
            d = d + asunion_offset(min(l, k), max(l, k))
    return d


def asunion_box_distance(a: Box, path_a: tuple, b: Box, path_b: tuple) -> Dyadic:
    """Exact distance between box sets living in as-union blocks."""
    if len(path_a) != len(path_b):
        raise InputError("blocks come from unions of different nesting depth")
    n = max(a.dim, b.dim)

    def pad_box(box: Box) -> Box:
        if box.dim == n:
            return box
        extra = n - box.dim
        factors = box.factors + (Interval.point(ZERO),) * extra
        c = box.constraint
        if c is not None and c.cores is not None:
            c = Constraint(c.max_deviating, cores=c.cores + (Interval.point(ZERO),) * extra)
        return Box(factors, c, box.overapprox)

    d = box_distance(pad_box(a), pad_box(b))
    for l, k in zip(path_a, path_b):
        if l != k:
            d = d + asunion_offset(min(l, k), max(l, k))
    return d
