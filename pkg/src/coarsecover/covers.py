"""Builders for the explicit periodic cover families.

A PeriodicFamily describes an infinite r-disjoint family finitely: a list
of prototype boxes plus a per-coordinate translation period.  Families
whose members live in blocks of an asymptotic union carry per-prototype
block paths.  The builders here emit:

* the two-family cover of the one-deviation lattice space,
* the inductive (k+1)-family cover at scale 2^(3^(k-1) r),
* singleton tail families for asymptotic unions,
* the composite bundle giving the Lebesgue/multiplicity upper-bound
  datapoint, and
* the as-union of lattice powers driven by a tabulated growth function,
  with its scale decomposition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dyadic import Dyadic, dy
from .errors import InputError, check_guard
from .geometry import Box, Constraint, Interval, box_diameter, fatten
from .spaces import (
    AsUnion,
    DeviatingLattice,
    LatticePower,
    SpaceSpec,
    enumerate_window,
    space_from_json,
    space_to_json,
    xwk_space,
    ywk_space,
)

ZERO = Dyadic(0)


@dataclass(frozen=True)
class PeriodicFamily:
    label: str
    prototypes: tuple
    period: tuple
    blocks: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "prototypes", tuple(self.prototypes))
        object.__setattr__(self, "period", tuple(dy(p) for p in self.period))
        if self.blocks is not None:
            object.__setattr__(
                self, "blocks", tuple(tuple(b) for b in self.blocks)
            )
            if len(self.blocks) != len(self.prototypes):
                raise InputError("per-prototype block list arity mismatch")
            if self.period and len(set(self.blocks)) > 1:
                raise InputError("periodic families must stay within one block")
        if self.period:
            for p in self.prototypes:
                if p.dim != len(self.period):
                    raise InputError("prototype dimension != period arity")

    @property
    def periodic(self) -> bool:
        return bool(self.period)

    def block_of(self, proto_index: int) -> tuple:
        if self.blocks is None:
            return ()
        return self.blocks[proto_index]

    def to_json(self):
        doc = {
            "label": self.label,
            "prototypes": [p.to_json() for p in self.prototypes],
            "period": [str(p) for p in self.period],
        }
        if self.blocks is not None:
            doc["blocks"] = [list(b) for b in self.blocks]
        return doc

    @classmethod
    def from_json(cls, doc) -> "PeriodicFamily":
        return cls(
            doc["label"],
            tuple(Box.from_json(p) for p in doc["prototypes"]),
            tuple(Dyadic.parse(p) for p in doc["period"]),
            tuple(tuple(b) for b in doc["blocks"]) if "blocks" in doc else None,
        )


@dataclass(frozen=True)
class InstantiatedBlock:
    box: Box
    block: tuple
    proto_index: int
    shifts: tuple


def instantiate(family: PeriodicFamily, window=None, margin=None, guard=None):
    """Concrete member boxes whose hulls meet the window plus margin.

    Non-periodic families return their prototypes as-is.  The default
    margin is one period per axis.
    """
    if not family.periodic:
        return [
            InstantiatedBlock(p, family.block_of(i), i, ())
            for i, p in enumerate(family.prototypes)
        ]
    if window is None:
        raise InputError("periodic family instantiation needs a window")
    out = []
    total = 0
    for pi, proto in enumerate(family.prototypes):
        ranges = []
        for j, (iv, T) in enumerate(zip(window, family.period)):
            f = proto.factors[j]
            m = dy(margin) if margin is not None else T
            if T == ZERO:
                ranges.append([0])
                continue
            lo = (iv.lo - m - f.hi).ceildiv(T)
            hi = (iv.hi + m - f.lo).floordiv(T)
            ranges.append(list(range(lo, hi + 1)))
        est = 1
        for rg in ranges:
            est *= len(rg)
        total += est
        check_guard(total, "family instantiation", guard)
        for shifts in itertools.product(*ranges):
            vec = tuple(T * s for T, s in zip(family.period, shifts))
            out.append(
                InstantiatedBlock(
                    proto.translate(vec), family.block_of(pi), pi, shifts
                )
            )
    return out


@dataclass
class CoverBundle:
    families: tuple
    claimed_disjointness: Dyadic
    claimed_bound: Dyadic
    target: Optional[SpaceSpec] = None
    provenance: tuple = ()
    per_family_bounds: Optional[tuple] = None
    partial: bool = False
    stub_family_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.families = tuple(self.families)
        self.claimed_disjointness = dy(self.claimed_disjointness)
        self.claimed_bound = dy(self.claimed_bound)
        if not self.families and self.stub_family_count == 0:
            raise InputError("cover bundle needs at least one family")
        if self.claimed_disjointness <= ZERO or self.claimed_bound <= ZERO:
            raise InputError("claims must be positive")

    @property
    def family_count(self) -> int:
        return len(self.families) + self.stub_family_count

    def to_json(self):
        return {
            "schema": 1,
            "families": [f.to_json() for f in self.families],
            "claimed_disjointness": str(self.claimed_disjointness),
            "claimed_bound": str(self.claimed_bound),
            "target": space_to_json(self.target) if self.target else None,
            "provenance": list(self.provenance),
            "per_family_bounds": [str(b) for b in self.per_family_bounds]
            if self.per_family_bounds
            else None,
            "partial": self.partial,
            "stub_family_count": self.stub_family_count,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, doc) -> "CoverBundle":
        return cls(
            tuple(PeriodicFamily.from_json(f) for f in doc["families"]),
            Dyadic.parse(doc["claimed_disjointness"]),
            Dyadic.parse(doc["claimed_bound"]),
            space_from_json(doc["target"]) if doc.get("target") else None,
            tuple(doc.get("provenance", ())),
            tuple(Dyadic.parse(b) for b in doc["per_family_bounds"])
            if doc.get("per_family_bounds")
            else None,
            bool(doc.get("partial", False)),
            int(doc.get("stub_family_count", 0)),
            doc.get("meta", {}),
        )


# ---------------------------------------------------------------------------
# the lattice cover families


def _open_cube(center_halfwidth: Dyadic, dim: int) -> tuple:
    return tuple(
        Interval(-center_halfwidth, center_halfwidth, False, False)
        for _ in range(dim)
    )


def _stage_families(r: int, k: int, i: int, pool=None):
    """Families U_0..U_k at scale 2^(3^(k-1) r), already fattened.

    ``pool`` restricts slab-axis choices to the given axes (used to
    materialize windows over very high-dimensional blocks); None means all
    axes.  Returned entries are (label, [prototype boxes], tight_bound).
    """
    n_exp = 3 ** (k - 1) * r
    scale = Dyadic.two_pow(n_exp)
    axes = list(range(i)) if pool is None else [a for a in pool if a < i]
    out = []
    for j in range(0, k + 1):
        if j <= 1:
            margin = Dyadic(3 ** (k - 1) * r)
            fat = Dyadic((3 ** (k - 1) - 1) // 2 * r)
        else:
            margin = Dyadic(3 ** (k - j) * r)
            fat = Dyadic((3 ** (k - j) - 1) // 2 * r)
        if j == 0:
            protos = [
                Box(_open_cube(margin, i), Constraint(1, lattice_scale=scale))
            ]
            label = "cube"
        elif j == 1:
            slab = Interval(margin, scale - margin)
            protos = []
            for a in axes:
                factors = list(_open_cube(margin, i))
                factors[a] = slab
                protos.append(
                    Box(tuple(factors), Constraint(1, lattice_scale=scale))
                )
            label = "slab-1"
        else:
            slab = Interval(margin, scale - margin)
            protos = []
            for T in itertools.combinations(axes, j):
                factors = [Interval.point(ZERO)] * i
                for a in T:
                    factors[a] = slab
                protos.append(Box(tuple(factors)))
            label = f"slab-{j}"
        if fat > ZERO:
            protos = [fatten(p, fat) for p in protos]
            for p in protos:
                if p.overapprox:
                    raise InputError("builder fattening lost exactness")
        bound = max((box_diameter(p) for p in protos), default=ZERO)
        out.append((label, protos, bound))
    return out


def build_two_family_cover(r: int, i: int) -> CoverBundle:
    """Two r-disjoint 2^r-bounded families covering the one-deviation space.

    Family 0: open cubes of side 2r around the 2^r lattice.  Family 1: one
    closed slab factor per axis.  Requires r >= 4 so that adjacent cube
    translates stay r-separated.
    """
    if r < 4:
        raise InputError(f"two-family cover requires r >= 4, got {r}")
    if i < r:
        raise InputError(f"two-family cover requires i >= r, got i={i} < r={r}")
    scale = Dyadic.two_pow(r)
    stage = _stage_families(r, 1, i)
    fams = tuple(
        PeriodicFamily(label, tuple(protos), (scale,) * i)
        for label, protos, _ in stage
    )
    return CoverBundle(
        fams,
        Dyadic(r),
        scale,
        target=xwk_space(i, r, 1),
        provenance=("two-family lattice cover",) * len(fams),
        per_family_bounds=tuple(b for _, _, b in stage),
    )


def build_k_family_cover(r: int, k: int, i: int, pool=None) -> CoverBundle:
    """k+1 families, r-disjoint and 2^n-bounded with n = 3^(k-1) r.

    Families born at earlier induction stages are carried over by exact
    fattening; the top family has k closed slab factors and lattice-point
    coordinates elsewhere.
    """
    if r <= 1:
        raise InputError(f"inductive cover requires r > 1, got {r}")
    if k < 1:
        raise InputError(f"inductive cover requires k >= 1, got {k}")
    if k == 1 and r < 4:
        raise InputError("the base case (k = 1) requires r >= 4")
    n_exp = 3 ** (k - 1) * r
    if i < n_exp:
        raise InputError(
            f"inductive cover requires i >= 3^(k-1) r = {n_exp}, got {i}"
        )
    scale = Dyadic.two_pow(n_exp)
    stage = _stage_families(r, k, i, pool=pool)
    fams = tuple(
        PeriodicFamily(label, tuple(protos), (scale,) * i)
        for label, protos, _ in stage
    )
    return CoverBundle(
        fams,
        Dyadic(r),
        scale,
        target=xwk_space(i, n_exp, k),
        provenance=tuple(f"inductive stage family {lab}" for lab, _, _ in stage),
        per_family_bounds=tuple(b for _, _, b in stage),
    )


# ---------------------------------------------------------------------------
# tail singletons


def build_tail_singletons(ambient: AsUnion, threshold: int, guard=None):
    """Singleton family over window points of blocks with index > threshold.

    Pairwise distances are at least the inter-block offset, so the family
    is threshold-disjoint; returns (family, empty_flag).
    """
    if not isinstance(ambient, AsUnion):
        raise InputError("tail singletons need an asymptotic union spec")
    protos = []
    paths = []
    for idx in ambient.indices():
        if idx <= threshold:
            continue
        sub = ambient.block_index(idx)
        for p in enumerate_window(sub, guard=guard):
            protos.append(Box.point_box(p.coords))
            paths.append((idx,) + p.block)
    fam = PeriodicFamily(
        "tail-singletons",
        tuple(protos),
        (),
        blocks=tuple(paths) if protos else None,
    )
    return fam, len(protos) == 0


# ---------------------------------------------------------------------------
# the composite bundle


def y2omega_window_spec(
    r: int, window_axes: int = 2, window_periods: int = 2, tail_blocks: int = 1
) -> AsUnion:
    """Thin evaluation window for the nested union of coarse lattice blocks.

    Outer block k <= r holds the single inner block i = 3^(k-1) r with a
    window spanning ``window_periods`` lattice periods on the first
    ``window_axes`` axes and pinned to 0 elsewhere; tail blocks carry a
    one-dimensional window.
    """
    outer = []
    for k in range(1, r + 1):
        i_k = 3 ** (k - 1) * r
        scale = Dyadic.two_pow(i_k)
        window = tuple(
            Interval(ZERO, scale * window_periods)
            if a < window_axes
            else Interval.point(ZERO)
            for a in range(i_k)
        )
        inner = ywk_space(i_k, k, window=window, delta=Dyadic(1))
        outer.append(AsUnion((inner,), start=i_k))
    for t in range(r + 1, r + 1 + tail_blocks):
        scale = Dyadic.two_pow(t)
        window = (Interval(ZERO, scale * 2),)
        inner = ywk_space(1, t, window=window, delta=Dyadic(1))
        outer.append(AsUnion((inner,), start=1))
    return AsUnion(tuple(outer), start=1)


def build_y2omega_cover(
    r: int,
    window_axes: int = 2,
    window_periods: int = 2,
    tail_blocks: int = 1,
    guard=None,
) -> CoverBundle:
    """Composite bundle: tail singletons + per-k lattice families + stub.

    The finite-dimensional part (a union of blocks of dimension up to
    3^(r-1) r) is emitted as an assumed-cover stub of 3^(r-1) r + 1
    families and the bundle is marked partial.  Prototypes of the lattice
    families are materialized restricted to the thin evaluation window.
    """
    if r < 4:
        raise InputError(f"composite bundle requires r >= 4, got {r}")
    target = y2omega_window_spec(r, window_axes, window_periods, tail_blocks)
    fams = []
    provenance = []
    bounds = []

    tail, empty = build_tail_singletons(target, threshold=r, guard=guard)
    fams.append(tail)
    provenance.append(
        "tail singletons over blocks beyond the scale threshold"
        + (" (empty)" if empty else "")
    )
    bounds.append(ZERO)

    lattice_family_count = 0
    for k in range(1, r + 1):
        i_k = 3 ** (k - 1) * r
        sub = build_k_family_cover(r, k, i_k, pool=range(window_axes))
        for fam, prov, b in zip(sub.families, sub.provenance, sub.per_family_bounds):
            fams.append(
                PeriodicFamily(
                    f"k={k} {fam.label}",
                    fam.prototypes,
                    fam.period,
                    blocks=((k, i_k),) * len(fam.prototypes)
                    if fam.prototypes
                    else None,
                )
            )
            provenance.append(f"lattice cover for block {k}: {prov}")
            bounds.append(b)
            lattice_family_count += 1

    stub_count = 3 ** (r - 1) * r + 1
    count_bound = r * (r + 3) // 2 + 3 ** (r - 1) * r + 2
    bundle = CoverBundle(
        tuple(fams),
        Dyadic(r),
        Dyadic.two_pow(3 ** (r - 1) * r),
        target=target,
        provenance=tuple(provenance),
        per_family_bounds=tuple(bounds),
        partial=True,
        stub_family_count=stub_count,
        meta={
            "family_count_bound": count_bound,
            "lattice_family_count": lattice_family_count,
            "stub": "finite-dimensional part assumed (brick decomposition witness not materialized)",
            "fatten_for_datapoint": str(Dyadic(r, 1)),
            "ad_datapoint": {
                "lambda": str(Dyadic(r, 1)),
                "ad_upper": count_bound - 1,
            },
        },
    )
    if bundle.family_count > count_bound:
        raise InputError("family accounting exceeded the composite bound")
    return bundle


# ---------------------------------------------------------------------------
# growth-function unions


def g_tilde_low(i: int) -> int:
    """Certified lower surrogate max(1, floor(log2 i) - 1)."""
    if i < 1:
        raise InputError("block index must be >= 1")
    return max(1, i.bit_length() - 2)


def build_x_omega_g(
    g_table: Sequence[int], window_periods: int = 2, delta=Dyadic(1)
) -> AsUnion:
    """As-union of lattice powers (2^gl(i) Z)^g(i) for i = 1..len(table)."""
    if not g_table:
        raise InputError("empty growth table")
    prev = None
    for v in g_table:
        if prev is not None and v < prev:
            raise InputError("growth table must be non-decreasing")
        prev = v
    blocks = []
    for i, g_i in enumerate(g_table, start=1):
        scale = Dyadic.two_pow(g_tilde_low(i))
        window = tuple(
            Interval(ZERO, scale * window_periods) if a == 0 else Interval.point(ZERO)
            for a in range(g_i)
        )
        blocks.append(LatticePower(scale, g_i, window=window, delta=dy(delta)))
    return AsUnion(tuple(blocks), start=1)


def decompose_x_omega_g(g_table: Sequence[int], r: int, guard=None):
    """Scale-r decomposition: singleton tail + finite-dimensional remainder."""
    spec = build_x_omega_g(g_table)
    M = None
    for i in range(1, len(g_table) + 1):
        if g_tilde_low(i) > r:
            M = i
            break
    if M is None:
        raise InputError(
            f"growth table too short: no block index with surrogate scale > {r}"
        )
    singletons, empty = build_tail_singletons(spec, threshold=M - 1, guard=guard)
    remainder = AsUnion(spec.blocks[: M - 1], start=1)
    return {
        "spec": spec,
        "M": M,
        "singletons": singletons,
        "singletons_empty": empty,
        "remainder": remainder,
        "remainder_max_dim": max(g_table[: M - 1]),
    }


def g_tilde_exact(r: int, g_r: int, k_max=None, B=None, window_cells: int = 15,
                  node_guard=None):
    """Largest k <= k_max whose lattice certifies ad >= g_r at radius r.

    Exact decision is exponential; only dimensions 1 and 2 are allowed.
    The certified surrogate is the fallback for anything larger.
    """
    from .refuter import ad_lower_search

    if g_r > 2:
        raise InputError("exact mode is limited to dimension <= 2; use g_tilde_low")
    if k_max is None:
        k_max = max(1, r.bit_length() - 1)
    results = {}
    best = None
    for k in range(k_max, 0, -1):
        scale = Dyadic.two_pow(k)
        mesh = B if B is not None else scale * 6
        res = ad_lower_search(
            k=k,
            n=g_r,
            B=mesh,
            window_cells=window_cells,
            lam=Dyadic(r),
            node_guard=node_guard,
        )
        results[k] = res
        if res["certified"] and best is None:
            best = k
            break
    if best is None:
        raise InputError(
            f"no lattice exponent <= {k_max} certified ad >= {g_r} at radius {r}"
        )
    return best, results
