"""JIT-compiled inner loops with interchangeable pure-Python fallbacks.

Both variants of each kernel execute the same statements, so results
are bit-identical whether or not numba is importable. The pure
versions double as reference implementations in the test suite.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def greedy_allocate_py(order, indptr, cand_idx, cand_dist, n_positioners):
    """Assign each target (in the given order) to one reachable positioner.

    Winner per target: fewest currently assigned targets, then smaller
    center distance, then lower positioner index. Returns per-target
    positioner index (-1 when the target has no candidates).
    """
    counts = np.zeros(n_positioners, dtype=np.int64)
    assigned = np.full(indptr.shape[0] - 1, -1, dtype=np.int64)
    for k in range(order.shape[0]):
        t = order[k]
        best = -1
        best_count = np.int64(2**62)
        best_dist = np.inf
        for p in range(indptr[t], indptr[t + 1]):
            i = cand_idx[p]
            c = counts[i]
            dist = cand_dist[p]
            if c < best_count or (
                c == best_count
                and (dist < best_dist or (dist == best_dist and i < best))
            ):
                best = i
                best_count = c
                best_dist = dist
        if best >= 0:
            assigned[t] = best
            counts[best] += 1
    return assigned


def poisson_disk_py(prop_x, prop_y, r_min, region_radius, want):
    """Greedy dart throwing over a fixed proposal stream.

    Accepts proposals whose distance to every accepted point is at
    least r_min, using a uniform grid with cell r_min / sqrt(2) (at
    most one point per cell). Stops at `want` accepted points or when
    the proposals run out. Returns (x, y, n_accepted).
    """
    cell = r_min / np.sqrt(2.0)
    grid_n = int(2.0 * region_radius / cell) + 3
    grid = np.full((grid_n, grid_n), -1, dtype=np.int64)
    out_x = np.empty(want, dtype=np.float64)
    out_y = np.empty(want, dtype=np.float64)
    n_acc = 0
    r2 = r_min * r_min
    for k in range(prop_x.shape[0]):
        if n_acc >= want:
            break
        x = prop_x[k]
        y = prop_y[k]
        gi = int((x + region_radius) / cell) + 1
        gj = int((y + region_radius) / cell) + 1
        ok = True
        for di in range(-2, 3):
            for dj in range(-2, 3):
                ii = gi + di
                jj = gj + dj
                if ii < 0 or jj < 0 or ii >= grid_n or jj >= grid_n:
                    continue
                other = grid[ii, jj]
                if other >= 0:
                    dx = x - out_x[other]
                    dy = y - out_y[other]
                    if dx * dx + dy * dy < r2:
                        ok = False
                        break
            if not ok:
                break
        if ok:
            out_x[n_acc] = x
            out_y[n_acc] = y
            grid[gi, gj] = n_acc
            n_acc += 1
    return out_x, out_y, n_acc


def discrete_pairs_py(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y, n, out):
    """Discrete segment-pair distances, no temporaries.

    Same arithmetic, in the same order, as the numpy implementation in
    ``_segdist.discrete_distance_numpy``: sample parameter k/n, point
    a + (b - a) * t, squared distance dx*dx + dy*dy, minimum, one final
    sqrt. The equality of both paths is asserted by the test suite.
    """
    m = a1x.shape[0]
    p1x = np.empty(n + 1, dtype=np.float64)
    p1y = np.empty(n + 1, dtype=np.float64)
    p2x = np.empty(n + 1, dtype=np.float64)
    p2y = np.empty(n + 1, dtype=np.float64)
    for p in range(m):
        d1x = b1x[p] - a1x[p]
        d1y = b1y[p] - a1y[p]
        d2x = b2x[p] - a2x[p]
        d2y = b2y[p] - a2y[p]
        for k in range(n + 1):
            t = k / n
            p1x[k] = a1x[p] + d1x * t
            p1y[k] = a1y[p] + d1y * t
            p2x[k] = a2x[p] + d2x * t
            p2y[k] = a2y[p] + d2y * t
        best = np.inf
        for i in range(n + 1):
            xi = p1x[i]
            yi = p1y[i]
            for j in range(n + 1):
                dx = xi - p2x[j]
                dy = yi - p2y[j]
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
        out[p] = np.sqrt(best)
    return out


if HAVE_NUMBA:
    greedy_allocate = njit(cache=True)(greedy_allocate_py)
    poisson_disk = njit(cache=True)(poisson_disk_py)
    discrete_pairs = njit(cache=True, nogil=True)(discrete_pairs_py)
else:  # pragma: no cover
    greedy_allocate = greedy_allocate_py
    poisson_disk = poisson_disk_py
    discrete_pairs = None
