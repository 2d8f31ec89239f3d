"""Ray-driven Radon transform, its exact adjoint, and list-mode binning.

A sinogram bin ``(k, m)`` is the line ``x cos(theta_m) + y sin(theta_m) = s_k``
with ``s_k`` the centre of radial bin ``k`` on ``[-s_max, s_max]`` and
``theta_m = m * pi / n_theta``.  The line integral is clipped to the FOV disk
and sampled at midpoints no further apart than half a pixel; image values are
bilinearly interpolated from pixel centres, with zero outside the grid.  The
back-projection scatters with exactly the same weights, so the pair is an
algebraic adjoint.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._accel import njit, prange
from .detect import event_rng
from .errors import InvalidGeometry, MismatchedShapes
from .whiteimage import GridSpec, Image

BIN_STREAM = 3
N_CHUNKS = 8
_RAY_BLOCK = 2048


@dataclass(frozen=True)
class SinogramGeometry:
    n_s: int = 256
    n_theta: int = 180
    s_max: float = 32.0

    def __post_init__(self):
        if int(self.n_s) < 1 or int(self.n_theta) < 1:
            raise ValueError("n_s and n_theta must be >= 1")
        if not (np.isfinite(self.s_max) and self.s_max > 0):
            raise ValueError("s_max must be positive")

    @property
    def ds(self):
        return 2.0 * self.s_max / self.n_s

    @property
    def s_centers(self):
        return (np.arange(self.n_s) - 0.5 * (self.n_s - 1)) * self.ds

    @property
    def thetas(self):
        return np.arange(self.n_theta) * np.pi / self.n_theta

    def check_grid(self, grid):
        if self.s_max < grid.fov_radius:
            raise MismatchedShapes("s_max must cover the FOV radius")


@dataclass
class Sinogram:
    """Counts or line integrals of shape ``(n_s, n_theta)``."""

    values: np.ndarray
    geometry: SinogramGeometry
    overflow: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        g = self.geometry
        if self.values.shape != (g.n_s, g.n_theta):
            raise MismatchedShapes(f"sinogram shape {self.values.shape} != ({g.n_s}, {g.n_theta})")


@dataclass
class EventList:
    """List-mode coincidences.

    ``offset1`` / ``offset2`` are detection positions along the tangent of the
    lower / higher indexed crystal of the pair (NaN when unknown).  ``origin``
    optionally holds the simulated annihilation points.
    """

    pair_id: np.ndarray
    gantry_angle: np.ndarray
    offset1: np.ndarray
    offset2: np.ndarray
    origin: np.ndarray = None

    def __post_init__(self):
        self.pair_id = np.asarray(self.pair_id, dtype=np.int64).ravel()
        self.gantry_angle = np.asarray(self.gantry_angle, dtype=float).ravel()
        self.offset1 = np.asarray(self.offset1, dtype=float).ravel()
        self.offset2 = np.asarray(self.offset2, dtype=float).ravel()
        n = self.pair_id.shape[0]
        if any(a.shape[0] != n for a in (self.gantry_angle, self.offset1, self.offset2)):
            raise MismatchedShapes("event columns differ in length")

    def __len__(self):
        return int(self.pair_id.shape[0])


# ------------------------------------------------------------------ kernels


@njit(parallel=True)
def _fwd_kernel(imgp, fov, pix, cos_t, sin_t, s_c, rs, rt, out):
    inv = 1.0 / pix
    for q in prange(rs.shape[0]):
        s = s_c[rs[q]]
        c = cos_t[rt[q]]
        sn = sin_t[rt[q]]
        t2 = fov * fov - s * s
        if t2 <= 0.0:
            out[q] = 0.0
            continue
        half = np.sqrt(t2)
        m = int(np.ceil(4.0 * half * inv))
        dt = 2.0 * half / m
        t0 = -half + 0.5 * dt
        fx = (s * c - t0 * sn + fov) * inv + 0.5
        fy = (s * sn + t0 * c + fov) * inv + 0.5
        dfx = -dt * sn * inv
        dfy = dt * c * inv
        acc = 0.0
        for _ in range(m):
            ix = int(fx)
            iy = int(fy)
            wx = fx - ix
            wy = fy - iy
            a = imgp[iy, ix] + wx * (imgp[iy, ix + 1] - imgp[iy, ix])
            b = imgp[iy + 1, ix] + wx * (imgp[iy + 1, ix + 1] - imgp[iy + 1, ix])
            acc += a + wy * (b - a)
            fx += dfx
            fy += dfy
        out[q] = acc * dt


@njit(parallel=True)
def _back_kernel(vals, fov, pix, cos_t, sin_t, s_c, rs, rt, bufs):
    inv = 1.0 / pix
    nch = bufs.shape[0]
    nr = rs.shape[0]
    for ch in prange(nch):
        buf = bufs[ch]
        lo = ch * nr // nch
        hi = (ch + 1) * nr // nch
        for q in range(lo, hi):
            v = vals[q]
            if v == 0.0:
                continue
            s = s_c[rs[q]]
            c = cos_t[rt[q]]
            sn = sin_t[rt[q]]
            t2 = fov * fov - s * s
            if t2 <= 0.0:
                continue
            half = np.sqrt(t2)
            m = int(np.ceil(4.0 * half * inv))
            dt = 2.0 * half / m
            t0 = -half + 0.5 * dt
            fx = (s * c - t0 * sn + fov) * inv + 0.5
            fy = (s * sn + t0 * c + fov) * inv + 0.5
            dfx = -dt * sn * inv
            dfy = dt * c * inv
            vv = v * dt
            for _ in range(m):
                ix = int(fx)
                iy = int(fy)
                wx = fx - ix
                wy = fy - iy
                buf[iy, ix] += vv * (1.0 - wx) * (1.0 - wy)
                buf[iy, ix + 1] += vv * wx * (1.0 - wy)
                buf[iy + 1, ix] += vv * (1.0 - wx) * wy
                buf[iy + 1, ix + 1] += vv * wx * wy
                fx += dfx
                fy += dfy


def _samples(fov, pix, s, c, sn):
    """Fractional padded-grid coordinates and step lengths for a ray block."""
    inv = 1.0 / pix
    t2 = fov * fov - s * s
    live = t2 > 0.0
    half = np.sqrt(np.where(live, t2, 0.0))
    m = np.where(live, np.ceil(4.0 * half * inv), 1.0).astype(np.int64)
    dt = 2.0 * half / m
    mmax = int(m.max()) if m.size else 1
    i = np.arange(mmax)
    t = (-half + 0.5 * dt)[:, None] + i[None, :] * dt[:, None]
    valid = live[:, None] & (i[None, :] < m[:, None])
    fx = (s[:, None] * c[:, None] - t * sn[:, None] + fov) * inv + 0.5
    fy = (s[:, None] * sn[:, None] + t * c[:, None] + fov) * inv + 0.5
    fx = np.where(valid, fx, 1.0)
    fy = np.where(valid, fy, 1.0)
    ix = fx.astype(np.int64)
    iy = fy.astype(np.int64)
    return ix, iy, fx - ix, fy - iy, valid, dt


def _fwd_numpy(imgp, fov, pix, cos_t, sin_t, s_c, rs, rt):
    out = np.zeros(rs.shape[0])
    for lo in range(0, rs.shape[0], _RAY_BLOCK):
        sl = slice(lo, lo + _RAY_BLOCK)
        ix, iy, wx, wy, valid, dt = _samples(fov, pix, s_c[rs[sl]], cos_t[rt[sl]], sin_t[rt[sl]])
        a = imgp[iy, ix] + wx * (imgp[iy, ix + 1] - imgp[iy, ix])
        b = imgp[iy + 1, ix] + wx * (imgp[iy + 1, ix + 1] - imgp[iy + 1, ix])
        out[sl] = np.where(valid, a + wy * (b - a), 0.0).sum(axis=1) * dt
    return out


def _back_numpy(vals, fov, pix, cos_t, sin_t, s_c, rs, rt, shape):
    flat = np.zeros(shape[0] * shape[1])
    w = shape[1]
    for lo in range(0, rs.shape[0], _RAY_BLOCK):
        sl = slice(lo, lo + _RAY_BLOCK)
        ix, iy, wx, wy, valid, dt = _samples(fov, pix, s_c[rs[sl]], cos_t[rt[sl]], sin_t[rt[sl]])
        vv = np.where(valid, (vals[sl] * dt)[:, None], 0.0)
        base = iy * w + ix
        for off, wt in ((0, (1 - wx) * (1 - wy)), (1, wx * (1 - wy)),
                        (w, (1 - wx) * wy), (w + 1, wx * wy)):
            flat += np.bincount((base + off).ravel(), (vv * wt).ravel(), minlength=flat.size)
    return flat.reshape(shape)


def _tables(sg):
    th = sg.thetas
    return np.cos(th), np.sin(th), sg.s_centers


def _all_rays(sg):
    rs, rt = np.divmod(np.arange(sg.n_s * sg.n_theta, dtype=np.int64), sg.n_theta)
    return rs, rt


def project_rays(values, grid, sg, rs, rt):
    """Line integrals of an ``n x n`` array along the listed rays."""
    n = grid.n
    imgp = np.zeros((n + 2, n + 2))
    imgp[1:-1, 1:-1] = values
    cos_t, sin_t, s_c = _tables(sg)
    fov, pix = float(grid.fov_radius), float(grid.pixel_size)
    if _accel.use_numba():
        out = np.empty(rs.shape[0])
        _fwd_kernel(imgp, fov, pix, cos_t, sin_t, s_c, rs, rt, out)
        return out
    return _fwd_numpy(imgp, fov, pix, cos_t, sin_t, s_c, rs, rt)


def backproject_rays(vals, grid, sg, rs, rt):
    """Adjoint of :func:`project_rays`; returns an ``n x n`` array."""
    n = grid.n
    cos_t, sin_t, s_c = _tables(sg)
    fov, pix = float(grid.fov_radius), float(grid.pixel_size)
    vals = np.ascontiguousarray(vals, dtype=float)
    if _accel.use_numba():
        bufs = np.zeros((N_CHUNKS, n + 2, n + 2))
        _back_kernel(vals, fov, pix, cos_t, sin_t, s_c, rs, rt, bufs)
        total = bufs[0].copy()
        for k in range(1, N_CHUNKS):
            total += bufs[k]
    else:
        total = _back_numpy(vals, fov, pix, cos_t, sin_t, s_c, rs, rt, (n + 2, n + 2))
    # the padding ring is outside the image; its weights are dropped by the
    # forward model as well
    return total[1:-1, 1:-1].copy()


def radon(img, sg):
    """Ray-driven Radon transform of an :class:`Image`."""
    sg.check_grid(img.grid)
    rs, rt = _all_rays(sg)
    vals = project_rays(img.values, img.grid, sg, rs, rt)
    return Sinogram(vals.reshape(sg.n_s, sg.n_theta), sg)


def back_project(sino, grid):
    """Exact adjoint of :func:`radon` onto ``grid``."""
    sg = sino.geometry
    sg.check_grid(grid)
    rs, rt = _all_rays(sg)
    return Image(backproject_rays(sino.values.ravel(), grid, sg, rs, rt), grid)


# ---------------------------------------------------------------- binning


def lor_endpoints(events, geom):
    """Lab-frame endpoints of each event's LOR, shape ``(n, 2)`` twice."""
    cr = geom.crystals()
    pairs = geom.pairs()
    pid = events.pair_id
    if pid.size and (pid.min() < 0 or pid.max() >= len(pairs)):
        raise InvalidGeometry("event references an unknown pair id")
    i, j = pairs.i[pid], pairs.j[pid]
    p1 = cr.center[i] + events.offset1[:, None] * cr.tangent[i]
    p2 = cr.center[j] + events.offset2[:, None] * cr.tangent[j]
    ca, sa = np.cos(events.gantry_angle), np.sin(events.gantry_angle)

    def rot(p):
        return np.stack([ca * p[:, 0] - sa * p[:, 1], sa * p[:, 0] + ca * p[:, 1]], axis=1)

    return rot(p1), rot(p2)


def lor_coordinates(p1, p2):
    """``(s, theta)`` of the lines through ``p1`` and ``p2``, theta in [0, pi)."""
    d = p2 - p1
    theta = np.arctan2(d[:, 1], d[:, 0]) + 0.5 * np.pi
    s = p1[:, 0] * np.cos(theta) + p1[:, 1] * np.sin(theta)
    flip = (theta >= np.pi) | (theta < 0.0)
    theta = np.where(flip, np.mod(theta, np.pi), theta)
    s = np.where(flip, -s, s)
    return s, theta


def bin_events(events, geom, sg, seed=0):
    """Histogram list-mode events into a sinogram.

    Missing (NaN) offsets are replaced by draws uniform over the crystal face,
    from a stream keyed by ``seed`` and the event's block.  Events whose ``s``
    falls outside ``[-s_max, s_max)`` are counted in ``Sinogram.overflow``.
    """
    n = len(events)
    off1, off2 = events.offset1.copy(), events.offset2.copy()
    half = 0.5 * geom.crystal_length
    for b, lo in enumerate(range(0, n, 1 << 16)):
        sl = slice(lo, min(n, lo + (1 << 16)))
        miss1, miss2 = np.isnan(off1[sl]), np.isnan(off2[sl])
        if miss1.any() or miss2.any():
            rng = event_rng(seed, BIN_STREAM, b)
            d = rng.uniform(-half, half, size=(2, sl.stop - sl.start))
            off1[sl] = np.where(miss1, d[0], off1[sl])
            off2[sl] = np.where(miss2, d[1], off2[sl])
    ev = EventList(events.pair_id, events.gantry_angle, off1, off2)
    p1, p2 = lor_endpoints(ev, geom)
    s, theta = lor_coordinates(p1, p2)
    m = np.rint(theta / (np.pi / sg.n_theta)).astype(np.int64)
    wrap = m >= sg.n_theta
    m = np.where(wrap, 0, m)
    s = np.where(wrap, -s, s)
    k = np.floor((s + sg.s_max) / sg.ds).astype(np.int64)
    ok = (k >= 0) & (k < sg.n_s)
    counts = np.bincount(k[ok] * sg.n_theta + m[ok], minlength=sg.n_s * sg.n_theta)
    return Sinogram(counts.reshape(sg.n_s, sg.n_theta).astype(float), sg, overflow=int((~ok).sum()))
