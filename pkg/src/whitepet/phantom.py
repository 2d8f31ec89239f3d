"""Synthetic NEMA NU 4-2008 style phantom slices and list-mode simulation.

Default dimensions follow the public image-quality phantom: a 30 mm body,
rods of 1 to 5 mm diameter on a 7 mm ring, and two 8 mm cold inserts whose
centres sit 7.5 mm from the axis.
"""

from dataclasses import dataclass

import numpy as np

from .detect import BATCH, event_rng, trace_events
from .errors import InvalidPhantom, LowAcceptance
from .projection import EventList
from .whiteimage import Image

KINDS = ("FiveRods", "TwoHoles")
SIM_STREAM = 2
_SUPERSAMPLE = 16


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "FiveRods"
    body_radius: float = 15.0
    rod_diameters: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    rod_ring_radius: float = 7.0
    hole_diameters: tuple = (8.0, 8.0)
    hole_offset: float = 7.5
    activity: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidPhantom(f"unknown phantom kind {self.kind!r}")
        if not self.activity > 0:
            raise InvalidPhantom("activity must be positive")
        if self.body_radius <= 0:
            raise InvalidPhantom("body radius must be positive")
        if any(d < 0 for d in tuple(self.rod_diameters) + tuple(self.hole_diameters)):
            raise InvalidPhantom("feature diameters must be non-negative")

    def disks(self):
        """``(x, y, radius, value)`` tuples painted in order (later wins)."""
        if self.kind == "FiveRods":
            n = len(self.rod_diameters)
            ang = 0.5 * np.pi + 2.0 * np.pi * np.arange(n) / max(n, 1)
            return [(self.rod_ring_radius * np.cos(a), self.rod_ring_radius * np.sin(a), 0.5 * d, self.activity)
                    for a, d in zip(ang, self.rod_diameters) if d > 0]
        out = [(0.0, 0.0, self.body_radius, self.activity)]
        n = len(self.hole_diameters)
        # holes evenly spaced on a circle, the first one on the +x axis
        for k, d in enumerate(self.hole_diameters):
            if d > 0:
                a = 2.0 * np.pi * k / n
                out.append((self.hole_offset * np.cos(a), self.hole_offset * np.sin(a), 0.5 * d, 0.0))
        return out


def _validate_layout(spec, grid):
    disks = spec.disks()
    for x, y, r, _ in disks:
        if np.hypot(x, y) + r > grid.fov_radius:
            raise InvalidPhantom("phantom feature extends outside the FOV")
    if spec.kind == "FiveRods":
        for a in range(len(disks)):
            for b in range(a + 1, len(disks)):
                xa, ya, ra, _ = disks[a]
                xb, yb, rb, _ = disks[b]
                if np.hypot(xa - xb, ya - yb) < ra + rb:
                    raise InvalidPhantom("rods overlap")
    else:
        for x, y, r, _ in disks[1:]:
            if np.hypot(x, y) + r > spec.body_radius:
                raise InvalidPhantom("hole extends outside the body")


def disk_coverage(grid, x0, y0, radius, sub=_SUPERSAMPLE):
    """Fraction of each pixel covered by a disk.

    Pixels clearly inside or outside are exact; boundary pixels use a
    ``sub x sub`` midpoint supersampling.
    """
    c = grid.centers
    pix = grid.pixel_size
    d = np.sqrt((c[None, :] - x0) ** 2 + (c[:, None] - y0) ** 2)
    out = (d <= radius).astype(float)
    edge = np.abs(d - radius) <= pix * np.sqrt(0.5)
    if radius <= 0:
        return np.zeros_like(out)
    ii, jj = np.nonzero(edge)
    if ii.size:
        u = (np.arange(sub) + 0.5) / sub - 0.5
        sx = c[jj][:, None, None] + pix * u[None, None, :] - x0
        sy = c[ii][:, None, None] + pix * u[None, :, None] - y0
        out[ii, jj] = np.mean(sx * sx + sy * sy <= radius * radius, axis=(1, 2))
    return out


def make_phantom(spec, grid):
    """Rasterise a phantom with area-fraction antialiasing."""
    _validate_layout(spec, grid)
    vals = np.zeros((grid.n, grid.n))
    for x, y, r, v in spec.disks():
        f = disk_coverage(grid, x, y, r)
        vals = vals * (1.0 - f) + v * f
    return Image(vals, grid, {"kind": "phantom", "phantom": spec.kind})


def simulate_events(activity, geom, n_events, seed, batch=BATCH, min_acceptance=1e-6):
    """Sample ``n_events`` detected coincidences from an activity image.

    Annihilation points are drawn pixel-wise by inverse CDF and uniformly
    inside the pixel; directions and gantry angles are uniform.  Detected
    events keep the true crossing positions on both crystals as offsets.
    Raises ``LowAcceptance`` once at least ``1 / min_acceptance`` trials show an
    acceptance rate below ``min_acceptance``.
    """
    vals = np.asarray(activity.values, dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidPhantom("activity must be finite and non-negative")
    total = vals.sum()
    if not total > 0:
        raise InvalidPhantom("activity image has no mass")
    n_events = int(n_events)
    if n_events < 0:
        raise ValueError("n_events must be non-negative")
    grid = activity.grid
    cdf = np.cumsum(vals.ravel())
    cdf /= cdf[-1]
    c = grid.centers
    pix = grid.pixel_size

    parts = []
    got = trials = 0
    b = 0
    while got < n_events:
        rng = event_rng(seed, SIM_STREAM, b)
        b += 1
        k = np.minimum(np.searchsorted(cdf, rng.random(batch), side="right"), cdf.size - 1)
        i, j = np.divmod(k, grid.n)
        x = c[j] + pix * (rng.random(batch) - 0.5)
        y = c[i] + pix * (rng.random(batch) - 0.5)
        theta = np.pi * rng.random(batch)
        alpha = 2.0 * np.pi * rng.random(batch)
        pair, o1, o2 = trace_events(geom, x, y, theta, alpha)
        ok = np.nonzero(pair >= 0)[0][: n_events - got]
        parts.append((pair[ok], alpha[ok], o1[ok], o2[ok], x[ok], y[ok]))
        got += ok.size
        trials += batch
        if trials >= 1.0 / min_acceptance and got < min_acceptance * trials:
            raise LowAcceptance(f"only {got} of {trials} simulated events were detected")
    if parts:
        cols = [np.concatenate(p) for p in zip(*parts)]
    else:
        cols = [np.zeros(0, np.int64)] + [np.zeros(0)] * 5
    return EventList(cols[0], cols[1], cols[2], cols[3], origin=np.stack([cols[4], cols[5]], axis=1))
