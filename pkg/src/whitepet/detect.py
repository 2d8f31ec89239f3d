"""Line-to-crystal intersection for Monte Carlo event generation.

An event is an annihilation point ``p``, an emission direction ``theta`` and a
gantry angle ``alpha``.  The scanner rotated by ``alpha`` is handled by
rotating the event by ``-alpha`` instead.  On each side of ``p`` the nearest
crystal segment crossed by the line is the detecting crystal; the event is
recorded when both crystals form an eligible pair.
"""

import numpy as np

from . import _accel
from ._accel import njit, prange

BATCH = 1 << 16


def event_rng(seed, stream, batch):
    """Generator for one fixed-size batch, independent of worker count."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(batch)))
    return np.random.Generator(np.random.PCG64(ss))


@njit(parallel=True)
def _trace_kernel(px, py, theta, alpha, cx, cy, ex, ey, half, index, pair, off1, off2):
    n = px.shape[0]
    nc = cx.shape[0]
    for q in prange(n):
        ca = np.cos(alpha[q])
        sa = np.sin(alpha[q])
        x = ca * px[q] + sa * py[q]
        y = -sa * px[q] + ca * py[q]
        ux = np.cos(theta[q] - alpha[q])
        uy = np.sin(theta[q] - alpha[q])
        best_p = np.inf
        best_n = np.inf
        kp = -1
        kn = -1
        tp = 0.0
        tn = 0.0
        for k in range(nc):
            det = ex[k] * uy - ux * ey[k]
            if det == 0.0:
                continue
            wx = cx[k] - x
            wy = cy[k] - y
            tau = (ux * wy - uy * wx) / det
            if tau > half or tau < -half:
                continue
            t = (ex[k] * wy - ey[k] * wx) / det
            if t > 0.0:
                if t < best_p:
                    best_p = t
                    kp = k
                    tp = tau
            elif -t < best_n:
                best_n = -t
                kn = k
                tn = tau
        pair[q] = -1
        off1[q] = np.nan
        off2[q] = np.nan
        if kp >= 0 and kn >= 0:
            pid = index[kp, kn]
            if pid >= 0:
                pair[q] = pid
                if kp < kn:
                    off1[q] = tp
                    off2[q] = tn
                else:
                    off1[q] = tn
                    off2[q] = tp


def _trace_numpy(px, py, theta, alpha, cx, cy, ex, ey, half, index):
    ca, sa = np.cos(alpha), np.sin(alpha)
    x = (ca * px + sa * py)[:, None]
    y = (-sa * px + ca * py)[:, None]
    ux = np.cos(theta - alpha)[:, None]
    uy = np.sin(theta - alpha)[:, None]
    det = ex[None, :] * uy - ux * ey[None, :]
    wx = cx[None, :] - x
    wy = cy[None, :] - y
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = (ux * wy - uy * wx) / det
        t = (ex[None, :] * wy - ey[None, :] * wx) / det
    hit = (det != 0.0) & (np.abs(tau) <= half)
    tpos = np.where(hit & (t > 0.0), t, np.inf)
    tneg = np.where(hit & (t <= 0.0), -t, np.inf)
    kp = np.argmin(tpos, axis=1)
    kn = np.argmin(tneg, axis=1)
    rows = np.arange(px.shape[0])
    ok = np.isfinite(tpos[rows, kp]) & np.isfinite(tneg[rows, kn])
    pair = np.where(ok, index[kp, kn], -1)
    ok &= pair >= 0
    op = tau[rows, kp]
    on = tau[rows, kn]
    lo_is_p = kp < kn
    off1 = np.where(ok, np.where(lo_is_p, op, on), np.nan)
    off2 = np.where(ok, np.where(lo_is_p, on, op), np.nan)
    return pair.astype(np.int64), off1, off2


def trace_events(geom, px, py, theta, alpha):
    """Detect events; returns ``(pair_id, offset1, offset2)`` arrays.

    ``pair_id`` is -1 for undetected events.  Offsets are positions along each
    crystal's tangent (lower crystal index first), in ``[-L/2, L/2]``.
    """
    cr = geom.crystals()
    pairs = geom.pairs()
    args = [np.ascontiguousarray(a, dtype=float) for a in (px, py, theta, alpha)]
    geo = (np.ascontiguousarray(cr.center[:, 0]), np.ascontiguousarray(cr.center[:, 1]),
           np.ascontiguousarray(cr.tangent[:, 0]), np.ascontiguousarray(cr.tangent[:, 1]),
           0.5 * geom.crystal_length, pairs.index)
    if _accel.use_numba():
        n = args[0].shape[0]
        pair = np.empty(n, np.int64)
        off1 = np.empty(n)
        off2 = np.empty(n)
        _trace_kernel(*args, *geo, pair, off1, off2)
        return pair, off1, off2
    return _trace_numpy(*args, *geo)
