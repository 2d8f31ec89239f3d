"""Image comparison metrics."""

import numpy as np


def _arrays(a, b, mask):
    a = np.asarray(getattr(a, "values", a), dtype=float)
    b = np.asarray(getattr(b, "values", b), dtype=float)
    if a.shape != b.shape:
        raise ValueError("images differ in shape")
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        return a[m], b[m]
    return a.ravel(), b.ravel()


def nrmse(est, ref, mask=None, fit_scale=False):
    """RMSE normalised by the range of ``ref``.

    With ``fit_scale`` the estimate is first multiplied by the least-squares
    factor ``<est, ref> / <est, est>``, which removes an arbitrary global
    intensity scale.
    """
    e, r = _arrays(est, ref, mask)
    if fit_scale:
        ee = float(np.dot(e, e))
        e = e * (float(np.dot(e, r)) / ee if ee > 0 else 0.0)
    span = float(r.max() - r.min())
    if span == 0.0:
        span = abs(float(r.max())) or 1.0
    return float(np.sqrt(np.mean((e - r) ** 2)) / span)


def correlation(a, b, mask=None):
    """Pearson correlation of two images."""
    x, y = _arrays(a, b, mask)
    x = x - x.mean()
    y = y - y.mean()
    den = float(np.sqrt(np.dot(x, x) * np.dot(y, y)))
    return float(np.dot(x, y) / den) if den > 0 else 0.0
