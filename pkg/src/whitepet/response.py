"""Crystal-to-crystal response densities.

The tent PDF ``P(x, y)`` describes where the LOR between two facing crystal
segments of half-length ``L0`` and separation ``2 R0`` crosses the plane; the
rotated profiles are its average over a full gantry turn about a point at
distance ``h`` from the PDF centre.  Exact rotation has a closed form for
``h = 0`` only; for ``h > 0`` the Dirac-line, rectangular and triangular window
approximations are provided together with a quadrature oracle.

All lengths are in mm and densities in mm^-2.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit, prange

APPROXIMATIONS = ("dirac", "rect", "triangle")


@dataclass(frozen=True)
class TentParams:
    """Half separation ``R0``, half crystal length ``L0`` and shift ``h``."""

    R0: float
    L0: float
    h: float = 0.0

    def __post_init__(self):
        check_params(self.R0, self.L0, self.h)


def check_params(R0, L0, h=0.0):
    if not (np.isfinite(R0) and np.isfinite(L0) and np.isfinite(h)):
        raise ValueError("R0, L0 and h must be finite")
    if R0 <= 0 or L0 <= 0:
        raise ValueError("R0 and L0 must be positive")
    if L0 >= R0:
        raise ValueError("L0 must be smaller than R0")
    if h < 0:
        raise ValueError("h must be non-negative")


# ---------------------------------------------------------------- tent PDF


def tent_pdf(x, y, p):
    """Tent PDF (shifted by ``p.h`` along y) evaluated at ``(x, y)``."""
    R0, L0, h = float(p.R0), float(p.L0), float(p.h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax = np.abs(x)
    d = np.abs(y - h)
    inside = (ax <= R0) & (d <= L0)
    region_a = inside & (d < (L0 / R0) * ax)
    region_b = inside & ~region_a & (ax < R0)
    with np.errstate(divide="ignore", invalid="ignore"):
        va = R0 / (R0 + ax)
        vb = R0 * R0 / (R0 * R0 - x * x) * (L0 - d) / L0
    out = np.where(region_a, va, np.where(region_b, vb, 0.0)) / (2.0 * R0 * L0)
    return out if out.ndim else float(out)


@njit
def _tent_point(x, y, h, R0, L0):
    ax = abs(x)
    d = abs(y - h)
    if ax > R0 or d > L0:
        return 0.0
    c = 1.0 / (2.0 * R0 * L0)
    if d < L0 / R0 * ax:
        return c * R0 / (R0 + ax)
    if ax >= R0:
        return 0.0
    return c * R0 * R0 / (R0 * R0 - x * x) * (L0 - d) / L0


# ------------------------------------------------- exact rotation, h = 0


def _atanc(w):
    """atan(w) / w, equal to 1 at w = 0."""
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < 1e-8
    ws = np.where(small, 1.0, w)
    return np.where(small, 1.0 - w * w / 3.0, np.arctan(ws) / ws)


def _exact_inner(r, R0, L0):
    # integral of P(r cos phi, r sin phi) over phi in [0, pi/2] times 4, up to pi R0 L0
    r = np.asarray(r, dtype=float)
    D = np.hypot(R0, L0)
    C1 = R0 / L0
    C2 = D - R0
    out = np.zeros_like(r)

    b1 = r <= L0
    if np.any(b1):
        x = r[b1]
        q = np.sqrt(R0 * R0 - x * x)
        f = R0 / q
        out[b1] = (2.0 * f * np.arctan(np.sqrt((R0 - x) / (R0 + x)) * C2 / L0)
                   + 0.5 * C1 * np.log((L0 * L0 - C2 * (R0 + x)) / (L0 * L0 - C2 * (R0 - x)))
                   + f * (0.5 * np.pi - np.arctan(L0 / q)))

    b2 = (r > L0) & (r <= R0)
    if np.any(b2):
        out[b2] = _exact_branch2(r[b2], R0, L0, D, C1, C2)

    b3 = (r > R0) & (r <= D)
    if np.any(b3):
        out[b3] = _exact_branch3(r[b3], R0, L0, D, C2)
    return out


def _exact_branch2(x, R0, L0, D, C1, C2):
    s = np.sqrt(np.maximum(x * x - L0 * L0, 0.0))
    X = (L0 * L0 + C2 * (s + x)) / ((s + x) * (R0 + x) - C2 * (R0 - x))
    z = np.sqrt(np.maximum(R0 * R0 - x * x, 0.0)) / L0
    # 2 f atan(z X) written so that r -> R0 (f -> inf, z -> 0) stays finite
    return (0.5 * C1 * np.log((R0 + s) / (R0 - s) * (D - x) / (D + x))
            + 2.0 * R0 * X / L0 * _atanc(z * X))


def _exact_branch3(x, R0, L0, D, C2):
    # Difference of antiderivatives of the two region integrands between the
    # angles atan(L0/R0), asin(L0/r) and acos(R0/r), written in t = tan(phi/2).
    u = np.sqrt(x * x - R0 * R0)
    f = R0 / u
    a2 = (x + R0) / (x - R0)
    ia2 = (x - R0) / (x + R0)
    a = np.sqrt(a2)
    t1 = C2 / L0
    t2 = L0 / (x + np.sqrt(x * x - L0 * L0))
    part_a = 2.0 * f * (np.arctanh(t1 / a) - np.arctanh(ia2))

    def g(t):
        c = (1.0 - t * t) / (2.0 * f)
        return -2.0 * np.arctanh(np.minimum(t, c) / np.maximum(t, c))

    part_b = (0.5 * R0 / L0 * (np.log1p((t1 * t1 - t2 * t2) / (a2 - t1 * t1))
                               - np.log((t2 * t2 - ia2) / (t1 * t1 - ia2)))
              + 0.5 * f * (g(t2) - g(t1)))
    return part_a + part_b


def rotated_exact(r, R0, L0):
    """Rotation of the unshifted tent PDF about its centre (closed form).

    Evaluated piecewise on ``[0, L0]``, ``(L0, R0]`` and ``(R0, sqrt(R0^2+L0^2)]``
    and zero beyond.  Inside ``|r - R0| < 1e-6 R0`` the ``r = R0`` limit is
    returned to avoid cancellation.
    """
    check_params(R0, L0)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    rr = np.where(np.abs(r - R0) < 1e-6 * R0, R0, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _exact_inner(np.atleast_1d(rr), R0, L0).reshape(rr.shape) / (np.pi * R0 * L0)
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


# ----------------------------------------------------- quadrature oracle


@njit
def _simpson_piece(a, b, m, r, h, R0, L0):
    if m % 2:
        m += 1
    dx = (b - a) / m
    s = 0.0
    for i in range(m + 1):
        p = a + i * dx
        if i == 0 or i == m:
            w = 1.0
        elif i % 2:
            w = 4.0
        else:
            w = 2.0
        s += w * _tent_point(r * np.cos(p), r * np.sin(p), h, R0, L0)
    return s * dx / 3.0


@njit
def _breakpoints(r, h, R0, L0):
    hp = 0.5 * np.pi
    bp = np.empty(16)
    k = 0
    bp[k] = -hp
    k += 1
    bp[k] = hp
    k += 1
    vals = np.array([h - L0, h, h + L0])
    for v in vals:
        q = v / r
        if abs(q) < 1.0:
            bp[k] = np.arcsin(q)
            k += 1
    if r > R0:
        a = np.arccos(R0 / r)
        bp[k] = a
        k += 1
        bp[k] = -a
        k += 1
    slope = L0 / R0
    al = np.arctan(slope)
    q = h / (r * np.sqrt(1.0 + slope * slope))
    if abs(q) < 1.0:
        aq = np.arcsin(q)
        for sgn in (1.0, -1.0):
            for base in (aq, np.pi - aq):
                p = sgn * al + base
                while p > np.pi:
                    p -= 2.0 * np.pi
                while p < -np.pi:
                    p += 2.0 * np.pi
                if -hp < p < hp:
                    bp[k] = p
                    k += 1
    return np.sort(bp[:k])


@njit
def _numeric_point(r, h, R0, L0, n_steps):
    if r == 0.0:
        return _tent_point(0.0, 0.0, h, R0, L0)
    b = _breakpoints(r, h, R0, L0)
    k = b.shape[0]
    supp = 0.0
    for i in range(k - 1):
        a0 = b[i]
        a1 = b[i + 1]
        if a1 <= a0:
            continue
        pm = 0.5 * (a0 + a1)
        if _tent_point(r * np.cos(pm), r * np.sin(pm), h, R0, L0) > 0.0:
            supp += a1 - a0
    tot = 0.0
    for i in range(k - 1):
        a0 = b[i]
        a1 = b[i + 1]
        if a1 <= a0:
            continue
        pm = 0.5 * (a0 + a1)
        if _tent_point(r * np.cos(pm), r * np.sin(pm), h, R0, L0) > 0.0:
            m = max(16, int(n_steps * (a1 - a0) / supp))
            tot += _simpson_piece(a0, a1, m, r, h, R0, L0)
    # the half-turn x >= 0 covers the full turn by the x -> -x symmetry
    return tot / np.pi


@njit(parallel=True)
def _numeric_kernel(r, h, R0, L0, n_steps, out):
    for q in prange(r.shape[0]):
        out[q] = _numeric_point(r[q], h, R0, L0, n_steps)


def _tent_vec(x, y, h, R0, L0):
    return tent_pdf(x, y, _Unchecked(R0, L0, h))


@dataclass(frozen=True)
class _Unchecked:
    R0: float
    L0: float
    h: float


def _numeric_numpy(r, h, R0, L0, n_steps):
    out = np.empty_like(r)
    hp = 0.5 * np.pi
    slope = L0 / R0
    al = np.arctan(slope)
    for q, x in enumerate(r):
        if x == 0.0:
            out[q] = _tent_vec(0.0, 0.0, h, R0, L0)
            continue
        bp = [-hp, hp]
        for v in (h - L0, h, h + L0):
            if abs(v / x) < 1.0:
                bp.append(np.arcsin(v / x))
        if x > R0:
            a = np.arccos(R0 / x)
            bp += [a, -a]
        z = h / (x * np.sqrt(1.0 + slope * slope))
        if abs(z) < 1.0:
            aq = np.arcsin(z)
            for sgn in (1.0, -1.0):
                for base in (aq, np.pi - aq):
                    p = np.mod(sgn * al + base + np.pi, 2.0 * np.pi) - np.pi
                    if -hp < p < hp:
                        bp.append(p)
        b = np.sort(np.array(bp))
        a0, a1 = b[:-1], b[1:]
        pm = 0.5 * (a0 + a1)
        live = (a1 > a0) & (_tent_vec(x * np.cos(pm), x * np.sin(pm), h, R0, L0) > 0)
        supp = np.sum((a1 - a0)[live])
        tot = 0.0
        for lo, hi in zip(a0[live], a1[live]):
            m = max(16, int(n_steps * (hi - lo) / supp))
            m += m % 2
            p = np.linspace(lo, hi, m + 1)
            w = np.ones(m + 1)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            vals = _tent_vec(x * np.cos(p), x * np.sin(p), h, R0, L0)
            tot += np.dot(w, vals) * (hi - lo) / m / 3.0
        out[q] = tot / np.pi
    return out


def rotated_numeric(r, h, R0, L0, n_steps=20000):
    """Reference rotated profile by composite Simpson quadrature over angle.

    The angular range is split at every kink and support edge of the shifted
    tent PDF, so each Simpson piece integrates a smooth function.  ``n_steps``
    is distributed over the in-support pieces by length (at least 16 each).
    """
    check_params(R0, L0, h)
    if int(n_steps) < 1000:
        raise ValueError("n_steps must be at least 1000")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    flat = np.ascontiguousarray(np.atleast_1d(r).ravel())
    if _accel.use_numba():
        out = np.empty_like(flat)
        _numeric_kernel(flat, float(h), float(R0), float(L0), int(n_steps), out)
    else:
        out = _numeric_numpy(flat, float(h), float(R0), float(L0), int(n_steps))
    out = out.reshape(r.shape)
    return out if out.ndim else float(out)


# --------------------------------------------------------- approximations


def _re_asin(z):
    return np.arcsin(np.clip(z, -1.0, 1.0))


def _re_sqrt(z):
    return np.sqrt(np.maximum(z, 0.0))


def rotated_dirac(r, r0):
    """Rotation of a unit-mass line at distance ``r0`` from the origin.

    Returns ``+inf`` exactly at ``r == r0``.
    """
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = 1.0 / (np.pi * np.sqrt(r * r - r0 * r0))
    out = np.where(r > r0, v, np.where(r == r0, np.inf, 0.0))
    return out if out.ndim else float(out)


def rotated_triangle(r, h, R0, L0):
    """Rotated profile for a triangular window of half-width ``L0`` at ``h``.

    Closed form built from real parts of arcsine and square root, i.e. the
    arguments are clamped to ``[-1, 1]`` and ``[0, inf)``.  ``r = 0`` takes its
    limit value.
    """
    check_params(R0, L0, h)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    lp, lm = L0 + h, L0 - h
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = (lp * _re_asin(lp / r) - 2.0 * h * _re_asin(h / r) + lm * _re_asin(lm / r)
             + _re_sqrt(r * r - lp * lp) - 2.0 * _re_sqrt(r * r - h * h)
             + _re_sqrt(r * r - lm * lm)) / (np.pi * L0)
    at0 = max(1.0 - h / L0, 0.0)
    out = np.where(r > 0, v, at0) / (2.0 * L0 * R0)
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def rotated_rect(r, h, R0, L0):
    """Rotated profile for a rectangular window ``[h - L0, h + L0]``."""
    check_params(R0, L0, h)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = _re_asin((h + L0) / r) - _re_asin((h - L0) / r)
    at0 = np.pi if h < L0 else (0.5 * np.pi if h == L0 else 0.0)
    out = np.where(r > 0, v, at0) / (4.0 * L0 * R0 * np.pi)
    return out if out.ndim else float(out)


def approximation(name, r, h, R0, L0):
    """Evaluate one of the approximations by name.

    The Dirac model is scaled by ``1 / (2 R0)`` so that all three carry the
    same mass per unit length along the LOR.
    """
    name = name.lower()
    if name == "triangle":
        return rotated_triangle(r, h, R0, L0)
    if name == "rect":
        return rotated_rect(r, h, R0, L0)
    if name == "dirac":
        check_params(R0, L0, h)
        return rotated_dirac(r, h) / (2.0 * R0)
    raise ValueError(f"unknown approximation {name!r}")


def support_radius(name, h, R0, L0):
    """Outer radius over which a profile carries its unit mass.

    The windowed approximations spread a line that is physically cut at the
    crystal faces ``|x| = R0``; their mass is therefore counted up to
    ``sqrt(R0^2 + h^2)``.
    """
    if name == "exact":
        return float(np.hypot(R0, L0))
    if name == "numeric":
        return float(np.hypot(R0, h + L0))
    return float(np.hypot(R0, h))


# ------------------------------------------------------------ RMSE table


@dataclass(frozen=True)
class RmseTable:
    approx: str
    R0: float
    L0: float
    h: np.ndarray
    rmse: np.ndarray

    @property
    def max_rmse(self):
        return float(np.max(self.rmse))

    @property
    def argmax_h(self):
        return float(self.h[int(np.argmax(self.rmse))])


@lru_cache(maxsize=8)
def _reference(R0, L0, h_step, r_step, n_steps):
    hs = np.round(np.arange(0.0, R0 - h_step + 1e-9, h_step), 10)
    grids, refs = [], []
    for h in hs:
        rr = np.arange(h + r_step, R0 + 1e-9, r_step)
        grids.append(rr)
        refs.append(rotated_numeric(rr, h, R0, L0, n_steps))
    return hs, tuple(grids), tuple(refs)


def rmse_vs_reference(approx, R0, L0, h_step=0.1, r_step=0.1, n_steps=2000):
    """Per-shift RMSE of an approximation against :func:`rotated_numeric`.

    For each ``h`` in ``0, h_step, ...`` below ``R0`` the error is sampled on
    ``r = h + r_step, ..., R0``.  The reference profiles are cached so the
    three approximations share one quadrature sweep.
    """
    check_params(R0, L0)
    if n_steps < 1000:
        raise ValueError("n_steps must be at least 1000")
    hs, grids, refs = _reference(float(R0), float(L0), float(h_step), float(r_step), int(n_steps))
    rmse = np.empty(hs.shape[0])
    for k, h in enumerate(hs):
        est = approximation(approx, grids[k], h, R0, L0)
        rmse[k] = np.sqrt(np.mean((est - refs[k]) ** 2))
    return RmseTable(approx.lower(), float(R0), float(L0), hs, rmse)
