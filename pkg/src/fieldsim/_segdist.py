"""Vectorized planar segment-distance kernels.

All functions operate on flat float64 component arrays (structure of
arrays) so that the scalar wrappers in :mod:`fieldsim.geometry` and the
batch evaluator in :mod:`fieldsim.batch` share one arithmetic path and
therefore produce bit-identical values.
"""

import numpy as np

from fieldsim import _accel

# Pairs per chunk for the numpy discrete kernel; keeps the
# (m, n+1, n+1) temporaries inside the L2 cache.
_DISCRETE_CHUNK_FLOATS = 540_000


def point_segment_distance_sq(px, py, ax, ay, bx, by):
    """Squared distance from points (px, py) to segments (a, b), elementwise."""
    dx = bx - ax
    dy = by - ay
    denom = dx * dx + dy * dy
    t = (px - ax) * dx + (py - ay) * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0.0, t / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    qx = ax + t * dx
    qy = ay + t * dy
    ex = px - qx
    ey = py - qy
    return ex * ex + ey * ey


def _orient(ox, oy, px, py, qx, qy):
    return (px - ox) * (qy - oy) - (py - oy) * (qx - ox)


def _on_segment(ox, oy, px, py, qx, qy, orient):
    # Collinear point q on segment (o, p): orientation exactly zero and q
    # inside the bounding box.
    inside_x = (np.minimum(ox, px) <= qx) & (qx <= np.maximum(ox, px))
    inside_y = (np.minimum(oy, py) <= qy) & (qy <= np.maximum(oy, py))
    return (orient == 0.0) & inside_x & inside_y


def segments_intersect(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y):
    """Boolean mask of segment pairs that touch or cross."""
    o1 = _orient(a2x, a2y, b2x, b2y, a1x, a1y)
    o2 = _orient(a2x, a2y, b2x, b2y, b1x, b1y)
    o3 = _orient(a1x, a1y, b1x, b1y, a2x, a2y)
    o4 = _orient(a1x, a1y, b1x, b1y, b2x, b2y)
    proper = ((o1 > 0) != (o2 > 0)) & ((o1 < 0) != (o2 < 0)) \
        & ((o3 > 0) != (o4 > 0)) & ((o3 < 0) != (o4 < 0))
    touch = (
        _on_segment(a2x, a2y, b2x, b2y, a1x, a1y, o1)
        | _on_segment(a2x, a2y, b2x, b2y, b1x, b1y, o2)
        | _on_segment(a1x, a1y, b1x, b1y, a2x, a2y, o3)
        | _on_segment(a1x, a1y, b1x, b1y, b2x, b2y, o4)
    )
    return proper | touch


def _canonical_order(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y):
    """Swap segment roles per pair so the computation is symmetric.

    Ordering key is the lexicographic endpoint tuple; with a fixed order
    the kernel evaluates the exact same arithmetic for (s1, s2) and
    (s2, s1), making the result bit-identical under argument swap.
    """
    key1 = np.stack([a1x, a1y, b1x, b1y], axis=-1)
    key2 = np.stack([a2x, a2y, b2x, b2y], axis=-1)
    swap = np.zeros(a1x.shape, dtype=bool)
    undecided = np.ones(a1x.shape, dtype=bool)
    for k in range(4):
        less = undecided & (key2[..., k] < key1[..., k])
        swap |= less
        undecided &= key2[..., k] == key1[..., k]
    sel = np.where
    return (
        sel(swap, a2x, a1x), sel(swap, a2y, a1y),
        sel(swap, b2x, b1x), sel(swap, b2y, b1y),
        sel(swap, a1x, a2x), sel(swap, a1y, a2y),
        sel(swap, b1x, b2x), sel(swap, b1y, b2y),
    )


def exact_distance(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y):
    """Exact minimum distance between closed segments, per pair.

    For disjoint segments the minimum is attained at an endpoint of one
    of them, so the distance is the minimum of the four point-to-segment
    distances; intersecting pairs return exactly 0.
    """
    a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y = _canonical_order(
        a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y)
    d_sq = np.minimum(
        np.minimum(
            point_segment_distance_sq(a1x, a1y, a2x, a2y, b2x, b2y),
            point_segment_distance_sq(b1x, b1y, a2x, a2y, b2x, b2y),
        ),
        np.minimum(
            point_segment_distance_sq(a2x, a2y, a1x, a1y, b1x, b1y),
            point_segment_distance_sq(b2x, b2y, a1x, a1y, b1x, b1y),
        ),
    )
    hit = segments_intersect(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y)
    return np.where(hit, 0.0, np.sqrt(d_sq))


def discrete_distance_numpy(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y, n):
    """Numpy implementation of the discrete kernel (chunked broadcast)."""
    t = np.arange(n + 1, dtype=np.float64) / n
    m = a1x.shape[0]
    out = np.empty(m, dtype=np.float64)
    chunk = max(1, _DISCRETE_CHUNK_FLOATS // ((n + 1) * (n + 1)))
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        s = slice(lo, hi)
        p1x = a1x[s, None] + (b1x[s] - a1x[s])[:, None] * t
        p1y = a1y[s, None] + (b1y[s] - a1y[s])[:, None] * t
        p2x = a2x[s, None] + (b2x[s] - a2x[s])[:, None] * t
        p2y = a2y[s, None] + (b2y[s] - a2y[s])[:, None] * t
        dx = p1x[:, :, None] - p2x[:, None, :]
        dy = p1y[:, :, None] - p2y[:, None, :]
        d_sq = dx * dx
        d_sq += dy * dy
        out[s] = np.sqrt(d_sq.min(axis=(1, 2)))
    return out


def discrete_distance(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y, n):
    """Minimum distance over the (n+1) x (n+1) grid of sample points.

    Samples lie on the segments, so the result is always >= the exact
    distance; the overestimate is at most half the sample spacing of
    each segment summed. Dispatches to the JIT kernel when available;
    both implementations share the exact arithmetic, so values are
    identical either way.
    """
    if _accel.discrete_pairs is not None:
        out = np.empty(a1x.shape[0], dtype=np.float64)
        return _accel.discrete_pairs(
            np.ascontiguousarray(a1x, dtype=np.float64),
            np.ascontiguousarray(a1y, dtype=np.float64),
            np.ascontiguousarray(b1x, dtype=np.float64),
            np.ascontiguousarray(b1y, dtype=np.float64),
            np.ascontiguousarray(a2x, dtype=np.float64),
            np.ascontiguousarray(a2y, dtype=np.float64),
            np.ascontiguousarray(b2x, dtype=np.float64),
            np.ascontiguousarray(b2y, dtype=np.float64),
            n, out,
        )
    return discrete_distance_numpy(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y, n)


def separation_lower_bound(a1x, a1y, b1x, b1y, a2x, a2y, b2x, b2y):
    """Certified lower bound on pair distance from bounding circles.

    Midpoint distance minus both half-lengths; never exceeds the exact
    distance, so pruning on it can only skip pairs that cannot collide.
    """
    m1x = 0.5 * (a1x + b1x)
    m1y = 0.5 * (a1y + b1y)
    m2x = 0.5 * (a2x + b2x)
    m2y = 0.5 * (a2y + b2y)
    half1 = 0.5 * np.hypot(b1x - a1x, b1y - a1y)
    half2 = 0.5 * np.hypot(b2x - a2x, b2y - a2y)
    return np.hypot(m1x - m2x, m1y - m2y) - half1 - half2
