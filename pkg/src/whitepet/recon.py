"""White-image compensated MLEM and the two baselines.

The compensated update is

    I <- I * R^T(S / R(I)) / WI

with ``R`` the ray-driven projector of :mod:`whitepet.projection` and ``WI``
the white image in place of the usual sensitivity ``R^T 1``.  Passing
``R^T 1`` gives classical (uncompensated) MLEM.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentDataWarning, MismatchedShapes
from .projection import Sinogram, _all_rays, backproject_rays, project_rays
from .whiteimage import GridSpec, Image

BASELINES = ("Proposed", "UncompensatedMLEM", "FBP")
EPS_DIV = 1e-12
EPS_WI = 1e-12


@dataclass
class ReconConfig:
    grid: GridSpec = GridSpec()
    n_iter: int = 50
    init_value: float = 1.0
    epsilon_div: float = EPS_DIV
    white_image: Image = None
    baseline: str = "Proposed"

    def __post_init__(self):
        if int(self.n_iter) < 1:
            raise ValueError("n_iter must be >= 1")
        if not self.epsilon_div > 0:
            raise ValueError("epsilon_div must be positive")
        if not self.init_value > 0:
            raise ValueError("init_value must be positive")
        if self.baseline not in BASELINES:
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.baseline == "Proposed" and self.white_image is None:
            raise ValueError("the compensated reconstruction needs a white image")
        if self.white_image is not None and self.white_image.grid != self.grid:
            raise MismatchedShapes("white image grid differs from the reconstruction grid")


def sensitivity(sg, grid):
    """Classical sensitivity image ``R^T 1``."""
    rs, rt = _all_rays(sg)
    return Image(backproject_rays(np.ones(rs.shape[0]), grid, sg, rs, rt), grid)


def _measured_rays(S):
    flat = S.values.ravel()
    idx = np.nonzero(flat)[0]
    rs, rt = np.divmod(idx, S.geometry.n_theta)
    return rs.astype(np.int64), rt.astype(np.int64), flat[idx]


def _divisor(WI):
    w = WI.values
    keep = w > EPS_WI * w.max() if w.size and w.max() > 0 else np.zeros(w.shape, bool)
    return np.where(keep, w, 1.0), keep


def mlem_step(I, S, WI, epsilon_div=EPS_DIV, stats=None, _rays=None):
    """One multiplicative update.

    Only rays with counts are projected: elsewhere the data ratio is zero by
    the 0/0 -> 0 convention.  Rays with counts but a forward projection below
    ``epsilon_div`` also get ratio 0 and raise ``InconsistentDataWarning``;
    their number is stored in ``stats["inconsistent_rays"]`` when a dict is
    passed.  White-image pixels below ``1e-12 * max`` give 0.
    """
    if I.grid != WI.grid:
        raise MismatchedShapes("image and white image grids differ")
    S.geometry.check_grid(I.grid)
    if np.any(I.values < 0) or np.any(WI.values < 0):
        raise ValueError("MLEM needs non-negative image and white image")
    rs, rt, counts = _rays if _rays is not None else _measured_rays(S)
    if np.any(counts < 0):
        raise ValueError("sinogram must be non-negative")
    proj = project_rays(I.values, I.grid, S.geometry, rs, rt)
    bad = proj < epsilon_div
    ratio = np.where(bad, 0.0, counts / np.where(bad, 1.0, proj))
    nbad = int(bad.sum())
    if stats is not None:
        stats["inconsistent_rays"] = nbad
    if nbad:
        warnings.warn(f"{nbad} rays carry counts but have zero forward projection",
                      InconsistentDataWarning, stacklevel=2)
    back = backproject_rays(ratio, I.grid, S.geometry, rs, rt)
    div, keep = _divisor(WI)
    return Image(np.where(keep, I.values * back / div, 0.0), I.grid)


def poisson_loglik(S, I):
    """``sum(S log p - p)`` with ``p = R(I)`` over all sinogram bins."""
    rs, rt = _all_rays(S.geometry)
    p = project_rays(I.values, I.grid, S.geometry, rs, rt)
    s = S.values.ravel()
    if np.any((p <= 0) & (s > 0)):
        return -np.inf
    pos = s > 0
    return float(np.sum(s[pos] * np.log(p[pos])) - np.sum(p))


def mlem(S, cfg, callback=None):
    """Run ``cfg.n_iter`` MLEM updates from a uniform image.

    ``cfg.baseline`` selects the divisor: the configured white image for
    ``"Proposed"`` or ``R^T 1`` for ``"UncompensatedMLEM"``.  ``callback(k,
    image)`` is invoked after every iteration ``k = 1..n_iter``.
    """
    if cfg.baseline == "FBP":
        raise ValueError("use fbp() for the FBP baseline")
    grid = cfg.grid
    S.geometry.check_grid(grid)
    WI = cfg.white_image if cfg.baseline == "Proposed" else sensitivity(S.geometry, grid)
    rays = _measured_rays(S)
    img = Image(np.full((grid.n, grid.n), float(cfg.init_value)), grid)
    with warnings.catch_warnings():
        warnings.simplefilter("once", InconsistentDataWarning)
        for k in range(1, int(cfg.n_iter) + 1):
            img = mlem_step(img, S, WI, cfg.epsilon_div, _rays=rays)
            if callback is not None:
                callback(k, img)
    img.meta.update(kind="mlem", baseline=cfg.baseline, n_iter=int(cfg.n_iter))
    return img


def ramlak_filter(sino_values, ds):
    """Band-limited ramp filter along the radial axis (axis 0)."""
    n = sino_values.shape[0]
    size = 1 << int(np.ceil(np.log2(2 * n)))
    k = np.arange(-(n - 1), n)
    h = np.zeros(k.shape)
    h[k == 0] = 1.0 / (4.0 * ds * ds)
    odd = (k % 2) == 1
    h[odd] = -1.0 / (np.pi * k[odd] * ds) ** 2
    kern = np.zeros(size)
    kern[: n] = h[n - 1:]
    kern[size - (n - 1):] = h[: n - 1]
    H = np.fft.rfft(kern)
    F = np.fft.rfft(sino_values, n=size, axis=0)
    return np.fft.irfft(F * H[:, None], n=size, axis=0)[:n] * ds


def fbp(S, grid):
    """Filtered back-projection with a Ram-Lak filter.

    The filtered sinogram is back-projected with the adjoint projector and
    scaled by ``(pi / n_theta) * (ds / pixel_size^2)`` so that the result is in
    activity units.  Output is signed; clip for display.
    """
    sg = S.geometry
    sg.check_grid(grid)
    filt = ramlak_filter(S.values, sg.ds)
    rs, rt = _all_rays(sg)
    back = backproject_rays(filt.ravel(), grid, sg, rs, rt)
    scale = (np.pi / sg.n_theta) * (sg.ds / grid.pixel_size ** 2)
    return Image(back * scale, grid, {"kind": "fbp"})


def reconstruct(S, cfg, callback=None):
    """Dispatch on ``cfg.baseline``."""
    if cfg.baseline == "FBP":
        return fbp(S, cfg.grid)
    return mlem(S, cfg, callback)
