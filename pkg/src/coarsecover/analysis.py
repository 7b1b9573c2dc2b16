"""Exact validation of cover claims and cover statistics.

Disjointness convention: a family passes an r-disjointness check when
every pair of distinct members has distance >= r; certificates record the
attained minimum and whether the strict inequality d > r also holds (the
shipped slab families attain d = r at perpendicular pairs).
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from .covers import CoverBundle, InstantiatedBlock, PeriodicFamily, instantiate
from .dyadic import Dyadic, dy
from .errors import GuardError, InputError, check_guard
from .geometry import (
    Box,
    Interval,
    TaggedPoint,
    asunion_box_distance,
    box_diameter,
    box_distance,
    box_distance_lower,
)
from .spaces import AsUnion, SpaceSpec, cardinality, contains, enumerate_window

ZERO = Dyadic(0)
_BIG = Dyadic(1) * (1 << 62)


@dataclass
class DisjointReport:
    ok: bool
    claim: Dyadic
    min_distance: Optional[Dyadic]
    strict: Optional[bool]
    witness: Optional[dict]
    mode: str
    pairs_checked: int

    def to_json(self):
        return {
            "check": "disjoint",
            "ok": self.ok,
            "claim": str(self.claim),
            "min_distance": str(self.min_distance) if self.min_distance is not None else None,
            "strict": self.strict,
            "witness": self.witness,
            "mode": self.mode,
            "pairs_checked": self.pairs_checked,
        }


@dataclass
class BoundedReport:
    ok: bool
    claim: Dyadic
    max_diameter: Dyadic
    witness: Optional[dict]

    def to_json(self):
        return {
            "check": "bounded",
            "ok": self.ok,
            "claim": str(self.claim),
            "max_diameter": str(self.max_diameter),
            "witness": self.witness,
        }


@dataclass
class CoverageReport:
    ok: bool
    mode: str
    tested: int
    uncovered: Optional[TaggedPoint]
    seed: Optional[int] = None

    def to_json(self):
        return {
            "check": "coverage",
            "ok": self.ok,
            "mode": self.mode,
            "tested": self.tested,
            "uncovered": self.uncovered.to_json() if self.uncovered else None,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# disjointness


def _pair_distance(a: InstantiatedBlock, b: InstantiatedBlock) -> Dyadic:
    if a.block or b.block:
        return asunion_box_distance(a.box, a.block, b.box, b.block)
    return box_distance(a.box, b.box)


def validate_disjoint(
    family: PeriodicFamily,
    r,
    window=None,
    margin=None,
    guard=None,
) -> DisjointReport:
    """Exact pairwise family disjointness at claim r.

    Periodic families without a window are checked in canonical mode: all
    prototype pairs under translate offsets in {-1, 0, 1} per axis, which
    is exhaustive whenever two periods minus the largest cross-span still
    exceed the claim (verified, else the offset range is widened).
    """
    r = dy(r)
    best = None
    witness = None
    pairs = 0
    if family.periodic and window is None:
        protos = family.prototypes
        period = family.period
        reach = 1
        # Offsets beyond ``reach`` periods must already clear the claim.
        while True:
            margin_ok = True
            for j, T in enumerate(period):
                span = max(
                    (pb.factors[j].hi - pa.factors[j].lo)
                    for pa in protos
                    for pb in protos
                )
                if T * (reach + 1) - span < r:
                    margin_ok = False
                    break
            if margin_ok or reach >= 4:
                break
            reach += 1
        if not margin_ok:
            raise InputError(
                "periodic canonical check inapplicable; pass a window instead"
            )
        offsets = itertools.product(range(-reach, reach + 1), repeat=len(period))
        offset_list = list(offsets)
        for ia, pa in enumerate(protos):
            for ib, pb in enumerate(protos):
                if ib < ia:
                    continue
                for off in offset_list:
                    if ia == ib and all(o == 0 for o in off):
                        continue
                    if ia == ib and any(o != 0 for o in off):
                        # same prototype pair: offsets come in +/- pairs
                        first_nz = next(o for o in off if o != 0)
                        if first_nz < 0:
                            continue
                    vec = tuple(T * o for T, o in zip(period, off))
                    d = box_distance(pa, pb.translate(vec))
                    pairs += 1
                    if best is None or d < best:
                        best = d
                        witness = {
                            "proto_a": ia,
                            "proto_b": ib,
                            "offset": list(off),
                            "distance": str(d),
                        }
        mode = f"periodic-canonical(reach={reach})"
    else:
        inst = instantiate(family, window=window, margin=margin, guard=guard)
        check_guard(len(inst) * (len(inst) - 1) // 2, "pairwise distance checks", guard)
        for a, b in itertools.combinations(inst, 2):
            lower = (
                box_distance_lower(a.box, b.box)
                if not a.block and not b.block
                else None
            )
            if lower is not None and lower >= r and best is not None and lower >= best:
                continue
            d = _pair_distance(a, b)
            pairs += 1
            if best is None or d < best:
                best = d
                witness = {
                    "block_a": {"proto": a.proto_index, "shifts": list(a.shifts), "path": list(a.block)},
                    "block_b": {"proto": b.proto_index, "shifts": list(b.shifts), "path": list(b.block)},
                    "distance": str(d),
                }
        mode = "window-instantiated"
    if best is None:
        return DisjointReport(True, r, None, None, None, mode + " (fewer than two members)", pairs)
    ok = best >= r
    return DisjointReport(ok, r, best, best > r, None if ok else witness, mode, pairs)


def validate_bounded(family: PeriodicFamily, B) -> BoundedReport:
    B = dy(B)
    worst = ZERO
    witness = None
    for idx, proto in enumerate(family.prototypes):
        d = box_diameter(proto)
        if d > worst:
            worst = d
            witness = {"proto": idx, "diameter": str(d)}
    ok = worst <= B
    return BoundedReport(ok, B, worst, None if ok else witness)


# ---------------------------------------------------------------------------
# coverage


def _bundle_instances(bundle: CoverBundle, window=None, margin=None, guard=None):
    """Per family: concrete blocks near the window, keyed by block path."""
    out = []
    for fam in bundle.families:
        if fam.periodic and window is None:
            raise InputError("bundle instantiation needs a window for periodic families")
        out.append(instantiate(fam, window=window, margin=margin, guard=guard))
    return out


def _point_in_instances(point: TaggedPoint, instances) -> bool:
    for inst in instances:
        for blk in inst:
            if blk.block == point.block and blk.box.contains(point.coords):
                return True
    return False


def _target_points(bundle: CoverBundle, guard=None):
    if bundle.target is None:
        raise InputError("bundle has no target space")
    return enumerate_window(bundle.target, guard=guard)


def validate_coverage(
    bundle: CoverBundle,
    window=None,
    mode: str = "exhaustive",
    n_samples: int = 0,
    seed: int = 0,
    guard=None,
) -> CoverageReport:
    """Membership of target window points in some instantiated block.

    Exhaustive mode enumerates the window (guarded); sampled mode draws
    deterministically from the enumerated points with the recorded seed.
    """
    points = _target_points(bundle, guard=guard)
    target = bundle.target
    if isinstance(target, AsUnion):
        instances = _instances_per_block(bundle, guard=guard)
    else:
        win = window if window is not None else target.window
        instances = _bundle_instances(bundle, window=win, guard=guard)
    if mode == "sampled":
        rng = random.Random(seed)
        if n_samples <= 0:
            raise InputError("sampled mode needs n_samples > 0")
        if points:
            points = [points[rng.randrange(len(points))] for _ in range(n_samples)]
    elif mode != "exhaustive":
        raise InputError(f"unknown coverage mode {mode!r}")
    tested = 0
    for p in points:
        tested += 1
        if not _point_in_instances(p, instances):
            return CoverageReport(False, mode, tested, p, seed if mode == "sampled" else None)
    return CoverageReport(True, mode, tested, None, seed if mode == "sampled" else None)


def _instances_per_block(bundle: CoverBundle, guard=None):
    """Instantiate as-union families against their own blocks' windows."""
    target = bundle.target
    out = []
    for fam in bundle.families:
        if not fam.periodic:
            out.append(instantiate(fam, guard=guard))
            continue
        if fam.blocks is None:
            raise InputError("periodic as-union family must declare its block")
        path = fam.blocks[0]
        spec = target
        for idx in path:
            spec = spec.block_index(idx)
        if spec.window is None:
            raise InputError("block spec carries no window")
        out.append(instantiate(fam, window=spec.window, guard=guard))
    return out


# ---------------------------------------------------------------------------
# multiplicity


def _axis_candidates(blocks, window, lattice_scales):
    """Sweep coordinates per axis: endpoints, lattice points, midpoints."""
    dim = len(window)
    out = []
    for j in range(dim):
        vals = {window[j].lo, window[j].hi}
        for blk in blocks:
            f = blk.box.factors[j]
            vals.add(f.lo)
            vals.add(f.hi)
        for s in lattice_scales:
            k_lo = window[j].lo.ceildiv(s)
            k_hi = window[j].hi.floordiv(s)
            for k in range(k_lo, k_hi + 1):
                vals.add(s * k)
        vals = sorted(v for v in vals if window[j].lo <= v <= window[j].hi)
        cands = []
        for a, b in zip(vals, vals[1:]):
            cands.append(a)
            cands.append((a + b) * Dyadic(1, 1))
        if vals:
            cands.append(vals[-1])
        out.append(cands)
    return out


@dataclass
class MultiplicityReport:
    value: int
    exact: bool
    witness: Optional[dict] = None

    def to_json(self):
        return {"multiplicity": self.value, "exact": self.exact, "witness": self.witness}


def multiplicity(
    bundle: CoverBundle, window=None, guard=None, force_bound=False
) -> MultiplicityReport:
    """Max block depth: exact sweep for dim <= 3, family-count bound above.

    The bound mode requires every family to be a genuinely disjoint family
    (positive claimed disjointness, validated by the caller); each family
    then contributes depth at most one.
    """
    target = bundle.target
    if isinstance(target, AsUnion) or force_bound or target is None or target.dim > 3:
        return MultiplicityReport(bundle.family_count, False)
    win = window if window is not None else target.window
    if win is None:
        raise InputError("multiplicity sweep needs a window")
    instances = _bundle_instances(bundle, window=win, guard=guard)
    blocks = [b for inst in instances for b in inst]
    scales = set()
    for blk in blocks:
        c = blk.box.constraint
        if c is not None and c.lattice_scale is not None:
            scales.add(c.lattice_scale)
    if getattr(target, "lattice", None) is not None:
        scales.add(target.lattice)
    axes = _axis_candidates(blocks, win, scales)
    est = 1
    for a in axes:
        est *= max(1, len(a))
    check_guard(est, "multiplicity sweep", guard)
    best = 0
    witness = None
    for coords in itertools.product(*axes):
        depth = sum(1 for blk in blocks if blk.box.contains(coords))
        if depth > best:
            best = depth
            witness = {"point": [str(c) for c in coords], "depth": depth}
    return MultiplicityReport(best, True, witness)


# ---------------------------------------------------------------------------
# Lebesgue number


def _inradius(box: Box, coords) -> Dyadic:
    """Sup-metric distance from an interior point to the box-hull complement."""
    best = None
    for f, x in zip(box.factors, coords):
        d = min(x - f.lo, f.hi - x)
        if best is None or d < best:
            best = d
    return best if best is not None else ZERO


@dataclass
class LebesgueReport:
    value: Dyadic
    covered: bool
    argmin: Optional[TaggedPoint] = None

    def to_json(self):
        return {
            "lebesgue_number": str(self.value),
            "covered": self.covered,
            "argmin": self.argmin.to_json() if self.argmin else None,
        }


def lebesgue_number(bundle: CoverBundle, window=None, guard=None) -> LebesgueReport:
    """min over window points of the best containing-block inradius.

    Blocks are instantiated with a one-period margin so that members
    overhanging the window edge keep their full inradius (periodic
    interior semantics); an uncovered point yields 0.
    """
    points = _target_points(bundle, guard=guard)
    target = bundle.target
    if isinstance(target, AsUnion):
        instances = _instances_per_block(bundle, guard=guard)
    else:
        win = window if window is not None else target.window
        instances = _bundle_instances(bundle, window=win, guard=guard)
    value = None
    argmin = None
    for p in points:
        best = ZERO
        covered = False
        for inst in instances:
            for blk in inst:
                if blk.block == p.block and blk.box.contains(p.coords):
                    covered = True
                    rad = _inradius(blk.box, p.coords)
                    if rad > best:
                        best = rad
        if not covered:
            return LebesgueReport(ZERO, False, p)
        if value is None or best < value:
            value = best
            argmin = p
    if value is None:
        raise InputError("empty target window")
    return LebesgueReport(value, True, argmin)


@dataclass
class AdReport:
    lam: Dyadic
    ad_upper: int
    multiplicity_exact: bool

    def to_json(self):
        return {
            "lambda": str(self.lam),
            "ad_upper": self.ad_upper,
            "multiplicity_exact": self.multiplicity_exact,
        }


def ad_report(bundle: CoverBundle, window=None, guard=None) -> AdReport:
    """Certified upper-bound datapoint (lambda, m - 1) for the ad function."""
    cov = validate_coverage(bundle, window=window, guard=guard)
    if not cov.ok:
        raise InputError(f"bundle is not a cover: {cov.uncovered} uncovered")
    leb = lebesgue_number(bundle, window=window, guard=guard)
    mult = multiplicity(bundle, window=window, guard=guard)
    return AdReport(leb.value, mult.value - 1, mult.exact)
