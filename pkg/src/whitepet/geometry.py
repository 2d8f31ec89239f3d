"""Partial-ring scanner model and enumeration of detecting crystal pairs.

Conventions
-----------
* Sector ``s`` is centred at ``sector_angles[s]`` and sits on the ring of
  radius ``ring_radii[s % len(ring_radii)]``.  Alternating radii mimic the
  staggered two-radius layout of the ClearPET-style prototype.
* Crystals inside a sector are spaced by ``crystal_pitch`` of arc length and
  each one is a segment of full length ``crystal_length`` tangent to its ring
  at its own angular position.
* Only crystals in active sectors exist.  They are indexed by ascending sector,
  then by position inside the sector.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGeometry, NoCoincidencePossible

EIGHT_ACTIVE = (0, 1, 2, 3, 10, 11, 12, 13)
FOUR_ACTIVE = (0, 2, 10, 12)
INTERSECTIONS = {"EightActive": EIGHT_ACTIVE, "FourActive": FOUR_ACTIVE}


@dataclass(frozen=True)
class ScannerGeometry:
    """Validated, immutable scanner description.

    Use :func:`build_scanner` to construct one from plain values.
    """

    sector_angles: tuple
    active_mask: tuple
    crystals_per_sector: int = 8
    crystal_pitch: float = 2.3
    crystal_length: float = 2.0
    ring_radii: tuple = (70.0, 75.0)
    fov_radius: float = 32.0
    intersection_config: str = "EightActive"
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        _validate(self)

    @property
    def n_sectors(self):
        return len(self.sector_angles)

    @property
    def active_sectors(self):
        return tuple(i for i, a in enumerate(self.active_mask) if a)

    def sector_radius(self, s):
        return float(self.ring_radii[s % len(self.ring_radii)])

    def crystals(self):
        """Return ``Crystals`` arrays for all crystals in active sectors."""
        if "crystals" not in self._cache:
            self._cache["crystals"] = _layout(self)
        return self._cache["crystals"]

    def pairs(self):
        """Cached :func:`enumerate_pairs`."""
        if "pairs" not in self._cache:
            self._cache["pairs"] = enumerate_pairs(self)
        return self._cache["pairs"]


class Crystals(NamedTuple):
    """Per-crystal arrays; ``angle`` is the angular position on the ring."""

    center: np.ndarray  # (N, 2)
    angle: np.ndarray
    radius: np.ndarray
    sector: np.ndarray
    tangent: np.ndarray  # (N, 2) unit vectors along the crystal face


class PairGeometry(NamedTuple):
    pair_id: int
    i: int
    j: int
    h: float
    R: float
    L_eff: float
    w: float


@dataclass(frozen=True)
class PairTable:
    """Column-oriented list of eligible crystal pairs.

    ``i < j`` are crystal indices; rows are sorted lexicographically by
    ``(i, j)`` and ``pair_id`` is the row number.
    """

    i: np.ndarray
    j: np.ndarray
    h: np.ndarray
    R: np.ndarray
    L_eff: np.ndarray
    w: np.ndarray
    index: np.ndarray  # (N, N) crystal-pair -> pair_id lookup, -1 if ineligible

    def __len__(self):
        return int(self.i.shape[0])

    def __getitem__(self, k):
        k = int(k)
        return PairGeometry(k, int(self.i[k]), int(self.j[k]), float(self.h[k]),
                            float(self.R[k]), float(self.L_eff[k]), float(self.w[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


def _validate(g):
    if len(g.sector_angles) < 2:
        raise InvalidGeometry("need at least two sector slots")
    if len(g.active_mask) != len(g.sector_angles):
        raise InvalidGeometry("active_mask length differs from the number of sectors")
    if int(g.crystals_per_sector) < 1:
        raise InvalidGeometry("crystals_per_sector must be positive")
    if not len(g.ring_radii):
        raise InvalidGeometry("at least one ring radius is required")
    for name in ("crystal_pitch", "crystal_length", "fov_radius"):
        v = float(getattr(g, name))
        if not np.isfinite(v) or v <= 0:
            raise InvalidGeometry(f"{name} must be positive, got {v}")
    radii = np.asarray(g.ring_radii, dtype=float)
    if np.any(~np.isfinite(radii)) or np.any(radii <= 0):
        raise InvalidGeometry("ring radii must be positive")
    if g.crystal_length >= radii.min():
        raise InvalidGeometry("crystal length must be smaller than every ring radius")
    if g.fov_radius >= radii.min():
        raise InvalidGeometry("FOV radius must be smaller than every ring radius")
    half_arc = 0.5 * (g.crystals_per_sector - 1) * g.crystal_pitch
    if half_arc / radii.min() >= np.pi / 2:
        raise InvalidGeometry("sector is wider than half the ring")
    active = [i for i, a in enumerate(g.active_mask) if a]
    if len(active) < 2:
        raise NoCoincidencePossible("fewer than two active sectors")


def build_scanner(
    n_sectors=20,
    active_sectors=EIGHT_ACTIVE,
    crystals_per_sector=8,
    crystal_pitch=2.3,
    crystal_length=2.0,
    ring_radii=(70.0, 75.0),
    fov_radius=32.0,
    sector_offset=0.0,
    sector_angles=None,
    intersection_config=None,
):
    """Build and validate a :class:`ScannerGeometry`.

    ``active_sectors`` may be an iterable of sector indices, a boolean mask or
    one of the names ``"EightActive"`` / ``"FourActive"``.  ``sector_offset``
    (rad) rotates the whole scanner.  Raises ``NoCoincidencePossible`` when no
    pair of crystals in different sectors sees the FOV.
    """
    if sector_angles is None:
        if int(n_sectors) < 2:
            raise InvalidGeometry("need at least two sector slots")
        sector_angles = sector_offset + 2.0 * np.pi * np.arange(int(n_sectors)) / int(n_sectors)
    sector_angles = tuple(float(a) for a in sector_angles)
    n = len(sector_angles)

    label = intersection_config
    if isinstance(active_sectors, str):
        if active_sectors not in INTERSECTIONS:
            raise InvalidGeometry(f"unknown intersection {active_sectors!r}")
        label = label or active_sectors
        active_sectors = INTERSECTIONS[active_sectors]
    seq = list(active_sectors)
    if len(seq) == n and all(isinstance(a, (bool, np.bool_)) for a in seq):
        mask = tuple(bool(a) for a in seq)
    else:
        idx = [int(a) for a in seq]
        if any(a < 0 or a >= n for a in idx):
            raise InvalidGeometry("active sector index out of range")
        mask = tuple(i in idx for i in range(n))
    if label is None:
        label = next((k for k, v in INTERSECTIONS.items()
                      if n == 20 and mask == tuple(i in v for i in range(n))), "Custom")

    geom = ScannerGeometry(
        sector_angles=sector_angles,
        active_mask=mask,
        crystals_per_sector=int(crystals_per_sector),
        crystal_pitch=float(crystal_pitch),
        crystal_length=float(crystal_length),
        ring_radii=tuple(float(r) for r in np.atleast_1d(ring_radii)),
        fov_radius=float(fov_radius),
        intersection_config=label,
    )
    if len(geom.pairs()) == 0:
        raise NoCoincidencePossible("no crystal pair in different sectors crosses the FOV")
    return geom


def _layout(g):
    centers, angles, radii, sectors = [], [], [], []
    c = g.crystals_per_sector
    offsets = (np.arange(c) - 0.5 * (c - 1)) * g.crystal_pitch
    for s in g.active_sectors:
        rad = g.sector_radius(s)
        phi = g.sector_angles[s] + offsets / rad
        angles.append(phi)
        radii.append(np.full(c, rad))
        sectors.append(np.full(c, s))
    angle = np.concatenate(angles) if angles else np.zeros(0)
    radius = np.concatenate(radii) if radii else np.zeros(0)
    sector = np.concatenate(sectors).astype(np.int64) if sectors else np.zeros(0, np.int64)
    center = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    tangent = np.stack([-np.sin(angle), np.cos(angle)], axis=1)
    return Crystals(center, angle, radius, sector, tangent)


def effective_half_length(h, ring_radius, crystal_length):
    """Half-length of a crystal face as seen perpendicular to a LOR.

    ``(crystal_length / 2) * sqrt(1 - h**2 / ring_radius**2)``; ``h`` is the
    distance of the LOR from the ring centre.  Works on arrays.
    """
    h = np.asarray(h, dtype=float)
    ring_radius = np.asarray(ring_radius, dtype=float)
    if np.any(h < 0) or np.any(h >= ring_radius):
        raise InvalidGeometry("LOR distance h must satisfy 0 <= h < ring radius")
    out = 0.5 * crystal_length * np.sqrt(1.0 - (h / ring_radius) ** 2)
    return out if out.ndim else float(out)


def pair_weight(L_eff):
    """Detection weight of a pair: the square of its effective half-length."""
    L_eff = np.asarray(L_eff, dtype=float)
    if np.any(L_eff < 0):
        raise InvalidGeometry("effective length must be non-negative")
    out = L_eff * L_eff
    return out if out.ndim else float(out)


def enumerate_pairs(geom):
    """All eligible crystal pairs with their ``(h, R, L_eff, w)``.

    A pair is eligible when its crystals lie in different sectors and the line
    through their centres passes strictly inside the FOV disk.
    """
    cr = geom.crystals()
    n = cr.center.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    keep = cr.sector[ii] != cr.sector[jj]
    ii, jj = ii[keep], jj[keep]
    a = cr.center[ii]
    b = cr.center[jj]
    d = b - a
    dist = np.hypot(d[:, 0], d[:, 1])
    h = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) / dist
    keep = h < geom.fov_radius
    ii, jj, h, dist = ii[keep], jj[keep], h[keep], dist[keep]
    L = 0.5 * (effective_half_length(h, cr.radius[ii], geom.crystal_length)
               + effective_half_length(h, cr.radius[jj], geom.crystal_length))
    L = np.asarray(L, dtype=float)
    index = np.full((n, n), -1, dtype=np.int64)
    ids = np.arange(ii.shape[0], dtype=np.int64)
    index[ii, jj] = ids
    index[jj, ii] = ids
    return PairTable(ii.astype(np.int64), jj.astype(np.int64), h, 0.5 * dist, L,
                     np.asarray(pair_weight(L), dtype=float), index)
