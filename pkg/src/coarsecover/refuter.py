"""Grid-discretized partition machinery and lower-bound certifiers.

Everything here operates on CellSets over a delta-grid of a closed cube.
Open sets become grid sets separated by at least one grid step; all
threshold radii (eps/3, 4 eps/3, ...) are converted to exact integer step
counts via Fractions, so no inequality ever suffers rounding.

Disjointness hypotheses are validated as min pairwise distance >= eps
(matching the cover validators); every validation failure surfaces as a
HypothesisFailure outcome carrying the offending pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .cells import CellSet, Grid, face_set, rasterize_box_on_grid, steps_lt
from .dyadic import Dyadic, dy
from .errors import GuardError, HypothesisError, InputError, check_guard
from .geometry import Interval
from .spaces import CubeGrid, cube_grid, skeleton

ZERO = Dyadic(0)


# ---------------------------------------------------------------------------
# epsilon partitions


@dataclass
class PartitionResult:
    L: CellSet
    sideA: CellSet  # contains the negative face of the axis
    sideB: CellSet  # contains the positive face
    axis: int
    epsilon: Dyadic
    checks: dict = field(default_factory=dict)

    def invariants_ok(self) -> bool:
        return all(self.checks.values())


def _axis_collar(grid: Grid, axis: int, positive: bool, radius: Fraction) -> CellSet:
    """Open collar: cells whose axis distance to the face is < radius."""
    t = steps_lt(radius, grid.delta)
    bits = np.zeros(grid.shape, dtype=bool)
    if t >= 0:
        sel = [slice(None)] * grid.dim
        n = grid.shape[axis]
        if positive:
            sel[axis] = slice(max(0, n - 1 - t), n)
        else:
            sel[axis] = slice(0, min(n, t + 1))
        bits[tuple(sel)] = True
    return CellSet(grid, bits)


def _validate_family(carrier: CellSet, family, epsilon: Dyadic, bound: Dyadic):
    """Members restricted to the carrier; pairwise >= eps, diam <= bound."""
    members = []
    for idx, m in enumerate(family):
        mm = m.intersect(carrier)
        if not mm.is_empty():
            members.append((idx, mm))
    for (ia, ma), (ib, mb) in itertools.combinations(members, 2):
        d = ma.distance_to(mb)
        if d is not None and d < epsilon:
            raise HypothesisError(
                f"family members {ia} and {ib} at distance {d} < {epsilon}",
                evidence={
                    "violated": "disjoint",
                    "member_a": ia,
                    "member_b": ib,
                    "distance": str(d),
                    "required": str(epsilon),
                },
            )
    for idx, m in members:
        d = m.diameter()
        if d.as_fraction() > bound:
            raise HypothesisError(
                f"family member {idx} has diameter {d} > {bound}",
                evidence={
                    "violated": "bounded",
                    "member": idx,
                    "diameter": str(d),
                    "required": str(bound),
                },
            )
    return members


def epsilon_partition(
    carrier: CellSet,
    family: Sequence[CellSet],
    axis: int,
    epsilon,
    B=None,
) -> PartitionResult:
    """Separator between the two axis faces avoiding the fattened family.

    Members within 2 eps of the positive face join the positive side, the
    rest join the negative side; each side is fattened by eps/3 and padded
    with a (4 eps/3)-collar of its face.  L is the carrier minus both
    sides.  Preconditions (eps <= B/6, family eps-disjoint and
    B/3-bounded on the carrier) raise HypothesisError.
    """
    grid = carrier.grid
    eps = dy(epsilon)
    if eps <= ZERO:
        raise InputError("epsilon must be positive")
    if axis < 0 or axis >= grid.dim:
        raise InputError(f"axis {axis} out of range")
    side = dy(B) if B is not None else min(grid.extent(a) for a in range(grid.dim))
    if eps * 6 > side:
        raise HypothesisError(
            f"epsilon {eps} exceeds one sixth of the cube side {side}",
            evidence={"violated": "epsilon", "epsilon": str(eps), "side": str(side)},
        )
    third = eps.as_fraction() / 3
    members = _validate_family(carrier, family, eps, side.as_fraction() / 3)

    near, far = [], []
    for idx, m in members:
        d_plus = m.distance_to_face(axis, True)
        (near if d_plus <= eps * 2 else far).append((idx, m))

    side_b = _axis_collar(grid, axis, True, 4 * third)
    for _, m in near:
        side_b = side_b.union(m.dilate_lt(third))
    side_b = side_b.intersect(carrier)

    side_a = _axis_collar(grid, axis, False, 4 * third)
    for _, m in far:
        side_a = side_a.union(m.dilate_lt(third))
    side_a = side_a.intersect(carrier)

    overlap = side_a.intersect(side_b)
    L = carrier.difference(side_a).difference(side_b)

    fat_all = CellSet.empty(grid)
    for _, m in members:
        fat_all = fat_all.union(m.dilate_lt(third))

    checks = {
        "sides_disjoint": overlap.is_empty(),
        "faces_in_sides": (
            face_set(grid, axis, False).intersect(carrier).issubset(side_a)
            and face_set(grid, axis, True).intersect(carrier).issubset(side_b)
        ),
        "separator_avoids_family": L.intersect(fat_all).is_empty(),
        "separator_face_distance": (
            L.is_empty()
            or (
                L.distance_to_face(axis, False) > eps
                and L.distance_to_face(axis, True) > eps
            )
        ),
        "sides_not_adjacent": not side_a.adjacent_to(side_b),
    }
    return PartitionResult(L, side_a, side_b, axis, eps, checks)


def check_nested(chain: Sequence[CellSet], grid: Optional[CubeGrid] = None) -> bool:
    """True iff a decreasing chain ends nonempty; raises if not decreasing."""
    for prev, cur in zip(chain, chain[1:]):
        if not cur.issubset(prev):
            raise InputError("chain is not decreasing")
    return not chain[-1].is_empty()


# ---------------------------------------------------------------------------
# refutation outcomes


@dataclass
class WitnessPoint:
    point: tuple
    uncovered_by: tuple

    def to_json(self):
        return {
            "kind": "witness_point",
            "point": [str(c) for c in self.point],
            "uncovered_by": list(self.uncovered_by),
        }


@dataclass
class HypothesisFailure:
    family: str
    violated: str
    evidence: dict

    def to_json(self):
        return {
            "kind": "hypothesis_failure",
            "family": self.family,
            "violated": self.violated,
            "evidence": self.evidence,
        }


@dataclass
class DescentComplete:
    message: str

    def to_json(self):
        return {"kind": "descent_complete", "message": self.message}


@dataclass
class Refutation:
    outcome: object
    trace: list

    def to_json(self):
        return {"schema": 1, "outcome": self.outcome.to_json(), "trace": self.trace}


# ---------------------------------------------------------------------------
# the descent


def _cells_meeting(cube: CubeGrid, cells, L: CellSet, q: int):
    out = []
    for cell in cells:
        sel = tuple(slice(c * q, (c + 1) * q + 1) for c in cell)
        if bool(L.bits[sel].any()):
            out.append(cell)
    return out


def _pairwise_report(family, epsilon: Dyadic, bound: Dyadic):
    """Claim validation on the full window; returns evidence or None."""
    for (ia, a), (ib, b) in itertools.combinations(list(enumerate(family)), 2):
        d = a.distance_to(b)
        if d is not None and d < epsilon:
            return {
                "violated": "disjoint",
                "member_a": ia,
                "member_b": ib,
                "distance": str(d),
                "required": str(epsilon),
            }
    for idx, m in enumerate(family):
        if m.is_empty():
            continue
        d = m.diameter()
        if d > bound:
            return {
                "violated": "bounded",
                "member": idx,
                "diameter": str(d),
                "required": str(bound),
            }
    return None


def partition_descent(
    B,
    m: int,
    k: int,
    neg_families: Sequence[Sequence[CellSet]],
    pos_families: Sequence[Sequence[CellSet]],
    delta,
    neg_disjoint,
    guard=None,
) -> Refutation:
    """Execute the nested-partition descent over [0, 6B]^(m+k).

    Phase 1 (m steps) partitions against the coarse families fattened by
    the cell edge 2^(m+k) and snaps to the cube grid, keeping the
    (m+k-j)-skeleton of the cells that meet the separator.  Phase 2 (k
    steps) partitions the surviving skeleton against the fine families.
    An empty final set refutes the joint cover claim; a surviving point is
    covered by no family and is returned as the witness.
    """
    B = dy(B)
    delta = dy(delta)
    neg_disjoint = dy(neg_disjoint)
    dim = m + k
    if dim < 1 or dim > 3:
        raise InputError("descent supports 1 <= m + k <= 3")
    if len(pos_families) != m or len(neg_families) != k:
        raise InputError("family counts must match m and k")
    cube = cube_grid(B, m, k)
    edge = cube.edge
    if not edge.is_multiple_of(delta):
        raise InputError(f"delta {delta} does not divide the cell edge {edge}")
    grid = Grid.from_window(cube.window(), delta, guard=guard)
    q = edge.floordiv(delta)

    def _check_grid(fams, tag):
        for fi, fam in enumerate(fams):
            for member in fam:
                if member.grid != grid:
                    raise InputError(f"{tag} family {fi} member off the descent grid")

    _check_grid(pos_families, "coarse")
    _check_grid(neg_families, "fine")

    pos_claim = Dyadic.two_pow(dim + 2)
    trace = []
    for fi, fam in enumerate(pos_families):
        ev = _pairwise_report(fam, pos_claim, B)
        if ev is not None:
            return Refutation(
                HypothesisFailure(f"coarse-{fi + 1}", ev["violated"], ev), trace
            )
    bound_fine = B * 2  # one third of the cube side
    for fi, fam in enumerate(neg_families):
        ev = _pairwise_report(fam, neg_disjoint, bound_fine)
        if ev is not None:
            return Refutation(
                HypothesisFailure(f"fine-{fi + 1}", ev["violated"], ev), trace
            )

    carrier = CellSet.full(grid)
    kept = list(cube.cells())
    all_members = [
        (f"coarse-{i + 1}", fam) for i, fam in enumerate(pos_families)
    ] + [(f"fine-{i + 1}", fam) for i, fam in enumerate(neg_families)]

    raw_so_far = CellSet.empty(grid)
    for j in range(1, m + 1):
        fam = pos_families[j - 1]
        fattened = [member.dilate_lt(edge) for member in fam]
        try:
            pr = epsilon_partition(carrier, fattened, j - 1, edge, B=cube.side)
        except HypothesisError as e:
            return Refutation(
                HypothesisFailure(
                    f"coarse-{j} (fattened)", e.evidence.get("violated", "epsilon"), e.evidence
                ),
                trace,
            )
        kept = _cells_meeting(cube, kept, pr.L, q)
        skel = skeleton(cube, kept, dim - j, delta)
        new_carrier = skel
        for member in fam:
            raw_so_far = raw_so_far.union(member)
        trace.append(
            {
                "step": j,
                "phase": "coarse",
                "axis": j - 1,
                "epsilon": str(edge),
                "separator_cells": pr.L.count,
                "cells_kept": len(kept),
                "skeleton_order": dim - j,
                "carrier_cells": new_carrier.count,
                "avoids_families_so_far": new_carrier.intersect(raw_so_far).is_empty(),
                "invariants": pr.checks,
            }
        )
        carrier = new_carrier

    lattice_check = True
    if not carrier.is_empty():
        idx = carrier.indices()
        on_lattice = (idx % q == 0).sum(axis=1)
        lattice_check = bool((on_lattice >= m).all())

    for j in range(1, k + 1):
        fam = neg_families[j - 1]
        axis = m + j - 1
        try:
            pr = epsilon_partition(carrier, list(fam), axis, neg_disjoint, B=cube.side)
        except HypothesisError as e:
            return Refutation(
                HypothesisFailure(
                    f"fine-{j}", e.evidence.get("violated", "epsilon"), e.evidence
                ),
                trace,
            )
        trace.append(
            {
                "step": m + j,
                "phase": "fine",
                "axis": axis,
                "epsilon": str(neg_disjoint),
                "carrier_cells": pr.L.count,
                "invariants": pr.checks,
            }
        )
        carrier = pr.L

    trace.append({"skeleton_membership_ok": lattice_check})
    if carrier.is_empty():
        return Refutation(
            DescentComplete(
                "final separator is empty although nested partitions of a cube "
                "must end nonempty; the joint cover claim is refuted"
            ),
            trace,
        )
    # Any surviving point avoids every family by construction; verify.
    for idx in carrier.indices():
        pt_idx = tuple(int(i) for i in idx)
        covered = [
            label
            for label, fam in all_members
            if any(member.bits[pt_idx] for member in fam)
        ]
        if not covered:
            return Refutation(
                WitnessPoint(
                    grid.point(pt_idx),
                    tuple(label for label, _ in all_members),
                ),
                trace,
            )
    raise InputError("surviving separator is covered; descent bookkeeping broken")


def rasterize_family(family, grid: Grid, window=None, margin=None, guard=None):
    """PeriodicFamily -> list of CellSets on a descent grid."""
    from .covers import instantiate

    win = window
    if win is None:
        win = tuple(
            Interval(o, o + grid.delta * (s - 1))
            for o, s in zip(grid.origin, grid.shape)
        )
    out = []
    for blk in instantiate(family, window=win, margin=margin, guard=guard):
        cs = rasterize_box_on_grid(blk.box, grid)
        if not cs.is_empty():
            out.append(cs)
    return out


# ---------------------------------------------------------------------------
# cube lemma checker


def cube_lemma_check(cover: Sequence[CellSet], n: Optional[int] = None):
    """Face-spanning member, else a grid point of depth n + 1.

    The cover must be a cover of the full grid cube by grid-closed sets;
    dimension at most 3.
    """
    if not cover:
        raise InputError("empty cover")
    grid = cover[0].grid
    if n is None:
        n = grid.dim
    if grid.dim > 3:
        raise InputError("cube lemma checker supports dimension <= 3")
    union = CellSet.empty(grid)
    for m in cover:
        if m.grid != grid:
            raise InputError("cover members live on different grids")
        union = union.union(m)
    if not union.bits.all():
        missing = CellSet(grid, ~union.bits).first_point()
        raise InputError(f"not a cover: point {missing} is uncovered")
    for idx, m in enumerate(cover):
        if m.is_empty():
            continue
        for axis in range(grid.dim):
            if m.axis_min(axis) == 0 and m.axis_max(axis) == grid.shape[axis] - 1:
                return {"kind": "face_spanning_member", "member": idx, "axis": axis}
    depth = np.zeros(grid.shape, dtype=np.int32)
    for m in cover:
        depth += m.bits.astype(np.int32)
    best = int(depth.max())
    if best >= n + 1:
        pt_idx = tuple(int(i) for i in np.argwhere(depth == best)[0])
        members = [i for i, m in enumerate(cover) if m.bits[pt_idx]]
        return {
            "kind": "common_point",
            "point": [str(c) for c in grid.point(pt_idx)],
            "depth": best,
            "members": members[: n + 1],
        }
    raise HypothesisError(
        f"no member spans and max depth {best} <= {n}; the cover is not the "
        "grid trace of a closed cover of the solid cube",
        evidence={"max_depth": best},
    )


# ---------------------------------------------------------------------------
# ad lower bound: refute mode


def lattice_cover_refute(k: int, n: int, B, members, window_hi=None):
    """Run the shrink / restrict / fatten pipeline against a candidate cover.

    ``members`` are lists of lattice points of (2^k Z)^n given on the
    restriction window fattened by 2^(k+1) per side.  Returns a verdict
    dict: a shrink gap (refuting the Lebesgue claim), a spanning member
    (refuting the mesh claim), or a depth witness of n + 1 members sharing
    a lattice point (refuting multiplicity <= n).
    """
    B = dy(B)
    step = Dyadic.two_pow(k)
    lam = Dyadic.two_pow(k + 1)
    hi = dy(window_hi) if window_hi is not None else B + lam
    ext = lam  # margin so shrink sees the true complement near the window
    lat_window = tuple(Interval(ZERO - ext, hi + ext) for _ in range(n))
    lat_grid = Grid.from_window(lat_window, step)
    sets = [CellSet.from_points(lat_grid, pts) for pts in members]

    shrunk = []
    for s in sets:
        comp = s.complement()
        dist = comp._dist_steps()
        shrunk.append(CellSet(lat_grid, dist >= 2))  # d(x, comp) > 2^k
    covered = CellSet.empty(lat_grid)
    for s in shrunk:
        covered = covered.union(s)
    core_window = tuple(Interval(ZERO, hi) for _ in range(n))
    core_grid = Grid.from_window(core_window, step)
    for idx in np.ndindex(core_grid.shape):
        pt = core_grid.point(idx)
        lat_idx = lat_grid.index(pt)
        if not covered.bits[lat_idx]:
            return {
                "kind": "shrink_gap",
                "point": [str(c) for c in pt],
                "meaning": "after the 2^k shrink the family no longer covers; "
                "the Lebesgue claim L >= 2^(k+1) fails",
            }

    half = Dyadic.two_pow(k - 1)
    fine_grid = Grid.from_window(core_window, half)
    fat = []
    keep = []
    for i, s in enumerate(shrunk):
        pts = [p for p in s.points() if all(ZERO <= c <= hi for c in p)]
        if not pts:
            continue
        cs = CellSet.from_points(fine_grid, pts).dilate_le(half)
        fat.append(cs)
        keep.append(i)
    verdict = cube_lemma_check(fat, n)
    if verdict["kind"] == "face_spanning_member":
        return {
            "kind": "span_witness",
            "member": keep[verdict["member"]],
            "axis": verdict["axis"],
            "meaning": "a fattened member meets opposite faces; the mesh claim fails",
        }
    # Snap the common point to a lattice point of the first involved member.
    pt = tuple(Dyadic.parse(c) for c in verdict["point"])
    involved = [keep[i] for i in verdict["members"]]
    first = shrunk[involved[0]]
    snap = None
    for p in first.points():
        if all(abs(a - b) <= half for a, b in zip(p, pt)):
            snap = p
            break
    if snap is None:
        raise InputError("depth witness could not be snapped to the lattice")
    for i in involved:
        if not sets[i].bits[lat_grid.index(snap)]:
            raise InputError("snapped witness escaped an original member")
    return {
        "kind": "depth_witness",
        "point": [str(c) for c in snap],
        "members": involved,
        "depth": len(involved),
        "meaning": f"{n + 1} members share a lattice point; multiplicity <= {n} fails",
    }


# ---------------------------------------------------------------------------
# ad lower bound: exhaustive search mode


def ad_lower_search(
    k: int,
    n: int,
    B,
    window_cells: int = 15,
    lam=None,
    node_guard=None,
):
    """Exhaustively refute covers with Lebesgue >= lam, mesh <= B, depth <= n.

    Search space: canonical labelings h of the lattice window where member
    ``h(x)`` must contain the c-cell neighborhood of x (c cells are what an
    open lam-ball traps on the lattice).  Any qualifying cover induces such
    a labeling, so exhausting labelings certifies the lower bound
    ad >= n at lambda = lam for mesh <= B on the window.
    """
    import math

    B = dy(B)
    step = Dyadic.two_pow(k)
    lam = dy(lam) if lam is not None else Dyadic.two_pow(k + 1)
    if n > 2:
        raise InputError("exhaustive search supports n <= 2")
    c = math.ceil(lam.as_fraction() / step.as_fraction()) - 1
    b_cells = B.floordiv(step)
    limit = node_guard if node_guard is not None else 50_000_000
    base = {
        "schema": 1,
        "k": k,
        "n": n,
        "B": str(B),
        "lambda": str(lam),
        "window_cells": window_cells,
        "neighborhood_cells": c,
        "max_fattened_span_cells": b_cells,
    }
    if c <= 0:
        return {
            **base,
            "certified": False,
            "nodes": 0,
            "counterexample": "singleton cover qualifies: the open lambda-ball "
            "traps no lattice neighbors at this scale",
        }
    max_raw_span = b_cells - 2 * c
    if max_raw_span < 0:
        return {
            **base,
            "certified": True,
            "nodes": 0,
            "reason": "mesh bound below one neighborhood diameter; no member "
            "can contain any point's trapped ball",
        }

    shape = (window_cells,) * n
    points = list(np.ndindex(shape))
    flat = {p: i for i, p in enumerate(points)}
    neigh = []
    for p in points:
        lo = [max(0, p[a] - c) for a in range(n)]
        hi = [min(shape[a] - 1, p[a] + c) for a in range(n)]
        neigh.append(
            [
                flat[q]
                for q in itertools.product(
                    *[range(lo[a], hi[a] + 1) for a in range(n)]
                )
            ]
        )
    total = len(points)
    labels = [-1] * total
    class_min = []
    class_max = []
    nodes = 0
    found = None

    def neighborhood_labels(pt_flat: int, extra_label: int) -> int:
        seen = set()
        for q in neigh[pt_flat]:
            l = labels[q]
            if l >= 0:
                seen.add(l)
        seen.add(extra_label)
        return len(seen)

    def feasible(i: int, label: int) -> bool:
        p = points[i]
        if label < len(class_min):
            for a in range(n):
                lo = min(class_min[label][a], p[a])
                hi = max(class_max[label][a], p[a])
                if hi - lo > max_raw_span:
                    return False
        for q in neigh[i]:
            if neighborhood_labels(q, label) > n:
                return False
        return True

    def assign(i: int, label: int):
        p = points[i]
        labels[i] = label
        if label == len(class_min):
            class_min.append(list(p))
            class_max.append(list(p))
            return None
        old = (list(class_min[label]), list(class_max[label]))
        for a in range(n):
            class_min[label][a] = min(class_min[label][a], p[a])
            class_max[label][a] = max(class_max[label][a], p[a])
        return old

    def unassign(i: int, label: int, saved):
        labels[i] = -1
        if saved is None:
            class_min.pop()
            class_max.pop()
        else:
            class_min[label][:] = saved[0]
            class_max[label][:] = saved[1]

    def dfs(i: int) -> bool:
        nonlocal nodes, found
        if i == total:
            found = [list() for _ in class_min]
            for j, p in enumerate(points):
                found[labels[j]].append(p)
            return True
        nodes += 1
        if nodes > limit:
            raise GuardError(
                f"search node guard exceeded at {nodes}", estimate=nodes, guard=limit
            )
        for label in range(len(class_min) + 1):
            if not feasible(i, label):
                continue
            saved = assign(i, label)
            if dfs(i + 1):
                return True
            unassign(i, label, saved)
        return False

    got = dfs(0)
    if got:
        members = []
        for cls in found:
            pts = set()
            for p in cls:
                for q in itertools.product(
                    *[
                        range(max(0, p[a] - c), min(shape[a] - 1, p[a] + c) + 1)
                        for a in range(n)
                    ]
                ):
                    pts.add(q)
            members.append(sorted(pts))
        return {
            **base,
            "certified": False,
            "nodes": nodes,
            "counterexample_members": [
                [[str(step * c_) for c_ in q] for q in mem] for mem in members
            ],
        }
    return {**base, "certified": True, "nodes": nodes}
