"""Independent reference implementations used to cross-check the package.

Everything in this module is deliberately written from scratch against
the documented contracts, using different algorithms than the library
(parametric stepping instead of incremental grid walks, exhaustive
enumeration instead of heuristics), so agreement is meaningful.
"""
from __future__ import annotations

import itertools

import numpy as np

FREE_CLASS = 1
OCCUPIED_CLASS = 2


def march_ray_hit(occ, res, origin, direction, max_range):
    """First occupied voxel along a ray, found by fine-step marching.

    Marches in steps of res/10 and resolves each step exactly through
    the grid-plane crossings inside it (a step shorter than one voxel
    can contain at most one crossing per axis). Returns the voxel index
    tuple or None for no hit within range.
    """
    occ = np.asarray(occ)
    shape = np.array(occ.shape)
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    step = res / 10.0

    def voxel_of(t):
        return np.floor((origin + t * direction) / res).astype(int)

    def occupied_at(ijk):
        if np.any(ijk < 0) or np.any(ijk >= shape):
            return False
        return bool(occ[ijk[0], ijk[1], ijk[2]])

    n_steps = int(np.ceil(max_range / step))
    prev_t = 0.0
    for k in range(1, n_steps + 1):
        t = min(k * step, max_range)
        crossings = []
        for ax in range(3):
            if direction[ax] == 0.0:
                continue
            lo = origin[ax] + prev_t * direction[ax]
            hi = origin[ax] + t * direction[ax]
            a, b = (lo, hi) if lo < hi else (hi, lo)
            first = int(np.ceil(a / res - 1e-12))
            last = int(np.floor(b / res + 1e-12))
            for m in range(first, last + 1):
                tc = (m * res - origin[ax]) / direction[ax]
                if prev_t < tc <= t + 1e-15 and tc <= max_range:
                    crossings.append(tc)
        for tc in sorted(crossings):
            cand = voxel_of(tc + 1e-9)
            if occupied_at(cand):
                return tuple(int(v) for v in cand)
        prev_t = t
    return None


def sight_clear(classes, res, origin, target_ijk):
    """Exact line-of-sight from a point to a voxel center.

    True iff every voxel the sight line passes through strictly before
    the target is classified free; the target's own class is ignored.
    The segment is decomposed at its grid-plane crossings and each span
    is attributed to the voxel containing its midpoint.
    """
    classes = np.asarray(classes)
    shape = classes.shape
    origin = np.asarray(origin, dtype=float)
    target_ijk = tuple(int(v) for v in np.asarray(target_ijk).ravel())
    start = tuple(np.floor(origin / res).astype(int))
    if any(i < 0 or i >= s for i, s in zip(start, shape)):
        return False
    if start == target_ijk:
        return True
    if classes[start] != FREE_CLASS:
        return False
    target = (np.asarray(target_ijk, dtype=float) + 0.5) * res
    d = target - origin
    if np.linalg.norm(d) < 1e-12:
        return True
    ts = [0.0, 1.0]
    for ax in range(3):
        if d[ax] == 0.0:
            continue
        a, b = sorted((origin[ax], target[ax]))
        first = int(np.ceil(a / res - 1e-12))
        last = int(np.floor(b / res + 1e-12))
        for m in range(first, last + 1):
            t = (m * res - origin[ax]) / d[ax]
            if 0.0 < t < 1.0:
                ts.append(t)
    ts = sorted(set(ts))
    for ta, tb in zip(ts[:-1], ts[1:]):
        if tb - ta < 1e-14:
            continue
        mid = origin + (0.5 * (ta + tb)) * d
        ijk = tuple(np.floor(mid / res).astype(int))
        if ijk == target_ijk:
            return True
        if any(i < 0 or i >= s for i, s in zip(ijk, shape)):
            return False
        if classes[ijk] != FREE_CLASS:
            return False
    return True


def segment_cells_2d(p0, p1, cell):
    """2D grid cells under a segment, in order, via parametric crossings."""
    p0 = np.asarray(p0, dtype=float)[:2]
    p1 = np.asarray(p1, dtype=float)[:2]
    d = p1 - p0
    ts = [0.0, 1.0]
    for ax in range(2):
        if d[ax] == 0.0:
            continue
        a, b = sorted((p0[ax], p1[ax]))
        first = int(np.ceil(a / cell - 1e-12))
        last = int(np.floor(b / cell + 1e-12))
        for m in range(first, last + 1):
            t = (m * cell - p0[ax]) / d[ax]
            if 0.0 < t < 1.0:
                ts.append(t)
    ts = sorted(set(ts))
    cells = []
    for ta, tb in zip(ts[:-1], ts[1:]):
        if tb - ta < 1e-14:
            continue
        mid = p0 + (0.5 * (ta + tb)) * d
        ij = (int(np.floor(mid[0] / cell)), int(np.floor(mid[1] / cell)))
        if not cells or cells[-1] != ij:
            cells.append(ij)
    return cells


def _shifted(mask, axis, delta):
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if delta > 0:
        dst[axis] = slice(1, None)
        src[axis] = slice(None, -1)
    else:
        dst[axis] = slice(None, -1)
        src[axis] = slice(1, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def flood_reachable(free, start_ijk):
    """Face-connected flood fill over a boolean free grid."""
    free = np.asarray(free, dtype=bool)
    reach = np.zeros_like(free)
    start = tuple(int(v) for v in start_ijk)
    if not free[start]:
        return reach
    reach[start] = True
    frontier = reach.copy()
    while frontier.any():
        grown = np.zeros_like(free)
        for ax in range(free.ndim):
            grown |= _shifted(frontier, ax, 1)
            grown |= _shifted(frontier, ax, -1)
        frontier = grown & free & ~reach
        reach |= frontier
    return reach


def best_matching(arrivals, predicted, tol):
    """Exhaustive injective frame-to-trigger matching.

    Considers every way of pairing arrivals with predicted exposure
    times within tolerance (including leaving frames unassigned) and
    returns (count, cost, pairs) for the matching with the most pairs,
    ties broken by the smaller total absolute residual. `pairs` is a
    frozenset of (arrival index, predicted index).
    """
    arrivals = list(arrivals)
    predicted = list(predicted)
    n = len(arrivals)
    cands = [[j for j, p in enumerate(predicted) if abs(a - p) <= tol]
             for a in arrivals]
    best = {"count": -1, "cost": np.inf, "pairs": frozenset()}

    def recurse(i, used, count, cost, pairs):
        if count + (n - i) < best["count"]:
            return
        if i == n:
            if count > best["count"] or (count == best["count"]
                                         and cost < best["cost"] - 1e-15):
                best["count"] = count
                best["cost"] = cost
                best["pairs"] = frozenset(pairs)
            return
        for j in cands[i]:
            if j in used:
                continue
            used.add(j)
            pairs.append((i, j))
            recurse(i + 1, used, count + 1,
                    cost + abs(arrivals[i] - predicted[j]), pairs)
            pairs.pop()
            used.discard(j)
        recurse(i + 1, used, count, cost, pairs)

    recurse(0, set(), 0, 0.0, [])
    return best["count"], best["cost"], best["pairs"]


def min_cover_size(mask_sets):
    """Smallest number of sets whose union equals the union of them all."""
    bits = []
    full = 0
    for s in mask_sets:
        b = 0
        for e in s:
            b |= 1 << int(e)
        bits.append(b)
        full |= b
    if full == 0:
        return 0
    for k in range(1, len(bits) + 1):
        for combo in itertools.combinations(range(len(bits)), k):
            u = 0
            for i in combo:
                u |= bits[i]
            if u == full:
                return k
    return len(bits)


_PERM_CACHE: dict = {}


def open_tour_optimum(start_costs, pair_costs):
    """Best open tour over all visit orders, by full enumeration.

    `start_costs[j]` is the cost from the fixed start to stop j and
    `pair_costs` the symmetric stop-to-stop matrix. Returns the optimal
    (cost, order).
    """
    start_costs = np.asarray(start_costs, dtype=float)
    pair_costs = np.asarray(pair_costs, dtype=float)
    n = len(start_costs)
    if n == 0:
        return 0.0, ()
    perms = _PERM_CACHE.get(n)
    if perms is None:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        _PERM_CACHE[n] = perms
    total = start_costs[perms[:, 0]].copy()
    for k in range(n - 1):
        total += pair_costs[perms[:, k], perms[:, k + 1]]
    best = int(np.argmin(total))
    return float(total[best]), tuple(int(v) for v in perms[best])
