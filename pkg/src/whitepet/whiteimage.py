"""White image: detection probability of a point source over the FOV.

The analytic model averages the triangular rotated response of every crystal
pair, weighted by the squared effective crystal half-length.  A Monte Carlo
estimate built from the same detector model serves as an independent check.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .detect import BATCH, event_rng, trace_events
from .errors import InvalidGeometry, MismatchedShapes, NoAcceptedEventsWarning
from .metrics import nrmse
from .response import rotated_triangle

MC_STREAM = 1


@dataclass(frozen=True)
class GridSpec:
    """Square ``n x n`` pixel grid covering ``[-fov_radius, fov_radius]^2``.

    Row ``i`` is ``y = centers[i]`` (row 0 at the bottom) and column ``j`` is
    ``x = centers[j]``.
    """

    n: int = 256
    fov_radius: float = 32.0

    def __post_init__(self):
        if int(self.n) < 2:
            raise ValueError("grid needs at least 2 pixels per side")
        if not (np.isfinite(self.fov_radius) and self.fov_radius > 0):
            raise ValueError("fov_radius must be positive")

    @property
    def pixel_size(self):
        return 2.0 * self.fov_radius / self.n

    @property
    def centers(self):
        # half-integer multiples keep the grid exactly antisymmetric
        return (np.arange(self.n) - 0.5 * (self.n - 1)) * self.pixel_size

    def radius(self):
        c = self.centers
        return np.sqrt(c[None, :] ** 2 + c[:, None] ** 2)

    def disk_mask(self):
        return self.radius() <= self.fov_radius

    def interior_mask(self):
        """Pixels lying entirely inside the FOV disk."""
        return self.radius() <= self.fov_radius - self.pixel_size * np.sqrt(0.5)

    def pixel_of(self, x, y):
        """Row and column indices of points, clipped to the grid."""
        j = np.floor((np.asarray(x) + self.fov_radius) / self.pixel_size).astype(np.int64)
        i = np.floor((np.asarray(y) + self.fov_radius) / self.pixel_size).astype(np.int64)
        return np.clip(i, 0, self.n - 1), np.clip(j, 0, self.n - 1)


@dataclass
class Image:
    """Pixel values on a :class:`GridSpec` plus free-form metadata."""

    values: np.ndarray
    grid: GridSpec
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise MismatchedShapes(f"image shape {self.values.shape} does not match grid n={self.grid.n}")

    def copy(self):
        return Image(self.values.copy(), self.grid, dict(self.meta))


@dataclass(frozen=True)
class RadialProfile:
    """Sampled radial density, linearly interpolated and zero past the table."""

    r: np.ndarray
    values: np.ndarray

    def __call__(self, r):
        return np.interp(r, self.r, self.values, right=0.0)


def rasterize_radial(profile, grid):
    """Map a radial profile onto the pixel grid.

    A :class:`RadialProfile` is interpolated linearly; any other callable is
    evaluated once per distinct pixel-centre radius.
    """
    rad = grid.radius()
    if isinstance(profile, RadialProfile):
        vals = profile(rad)
    else:
        uniq, inv = np.unique(rad, return_inverse=True)
        vals = np.asarray(profile(uniq), dtype=float)[inv].reshape(rad.shape)
    return Image(vals, grid)


def radius_table(grid):
    """Radii from 0 past the farthest pixel centre, step ``pixel_size / 4``."""
    step = grid.pixel_size / 4.0
    rmax = float(grid.radius().max())
    return np.arange(int(np.ceil(rmax / step)) + 2) * step


def white_image_profile(geom, r):
    """Analytic white-image density at radii ``r`` from the scanner axis."""
    return profile_from_pairs(geom.pairs(), r)


def profile_from_pairs(pairs, r):
    """Weighted mean of the triangular rotated responses of ``pairs``.

    ``sum_k w_k P_k(r) / (N_p * sum_k w_k)``.
    """
    if len(pairs) == 0:
        raise InvalidGeometry("geometry has no eligible crystal pairs")
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    acc = np.zeros((len(pairs), flat.shape[0]))
    for k in range(len(pairs)):
        acc[k] = pairs.w[k] * rotated_triangle(flat, pairs.h[k], pairs.R[k], pairs.L_eff[k])
    total = acc.sum(axis=0)
    return (total / (len(pairs) * pairs.w.sum())).reshape(r.shape)


def white_image_analytic(geom, grid):
    """Analytic white image on ``grid`` (radially symmetric).

    The profile is evaluated once per distinct pixel-centre radius, so pixel
    values are exact rather than interpolated.
    """
    pairs = geom.pairs()
    img = rasterize_radial(lambda r: profile_from_pairs(pairs, r), grid)
    img.meta["kind"] = "white_image_analytic"
    return img


def sample_disk(rng, n, radius):
    rho = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return rho * np.cos(phi), rho * np.sin(phi)


def white_image_mc(geom, grid, n_events, seed, batch=BATCH):
    """Monte Carlo white image from ``n_events`` sampled annihilations.

    Points are uniform over the FOV disk of ``geom``, emission directions
    uniform on ``[0, pi)`` and gantry angles uniform on ``[0, 2 pi)``.  Detected
    points are histogrammed and the image is normalised to unit sum.
    ``meta`` records the number of detected events.
    """
    n_events = int(n_events)
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    counts = np.zeros(grid.n * grid.n, dtype=np.int64)
    accepted = 0
    for b, start in enumerate(range(0, n_events, batch)):
        m = min(batch, n_events - start)
        rng = event_rng(seed, MC_STREAM, b)
        x, y = sample_disk(rng, m, geom.fov_radius)
        theta = np.pi * rng.random(m)
        alpha = 2.0 * np.pi * rng.random(m)
        pair, _, _ = trace_events(geom, x, y, theta, alpha)
        ok = pair >= 0
        i, j = grid.pixel_of(x[ok], y[ok])
        counts += np.bincount(i * grid.n + j, minlength=grid.n * grid.n)
        accepted += int(ok.sum())
    vals = counts.reshape(grid.n, grid.n).astype(float)
    if accepted == 0:
        warnings.warn("Monte Carlo white image accepted no events", NoAcceptedEventsWarning, stacklevel=2)
    else:
        vals /= accepted
    return Image(vals, grid, {"kind": "white_image_mc", "accepted": accepted, "sampled": n_events})


def block_sum(values, factor):
    """Sum ``factor x factor`` pixel blocks."""
    n = values.shape[0]
    if n % factor:
        raise MismatchedShapes(f"grid size {n} is not a multiple of {factor}")
    m = n // factor
    return values.reshape(m, factor, m, factor).sum(axis=(1, 3))


def compare_white_images(analytic, mc, n_compare=32):
    """NRMSE between an analytic and a Monte Carlo white image.

    Both images are block-summed onto an ``n_compare`` grid (when finer),
    restricted to the coarse pixels lying wholly inside the FOV disk (edge
    pixels are only partly sampled by the Monte Carlo) and rescaled to unit
    sum there.
    """
    if analytic.grid != mc.grid:
        raise MismatchedShapes("white images live on different grids")
    grid = analytic.grid
    factor = max(1, grid.n // int(n_compare))
    coarse = GridSpec(grid.n // factor, grid.fov_radius)
    mask = coarse.interior_mask()
    a = np.where(mask, block_sum(analytic.values, factor), 0.0)
    m = np.where(mask, block_sum(mc.values, factor), 0.0)
    sa, sm = a.sum(), m.sum()
    if sa <= 0 or sm <= 0:
        return float("inf")
    return nrmse(m / sm, a / sa, mask)
