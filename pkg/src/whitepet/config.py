"""INI configuration shared by all commands.

Sections and keys (all optional, defaults shown by ``whitepet --print-config``)::

    [geometry]  n_sectors, active_sectors, crystals_per_sector, crystal_pitch,
                crystal_length, ring_radii, fov_radius, sector_offset_deg
    [grid]      n
    [sinogram]  n_s, n_theta, s_max
    [phantom]   kind, body_radius, rod_diameters, rod_ring_radius,
                hole_diameters, hole_offset, activity
    [recon]     n_iter, init_value, epsilon_div, white_image, mc_events
    [run]       seed, n_events

Lists are comma separated.  ``active_sectors`` is either ``EightActive``,
``FourActive`` or a list of sector indices.
"""

import configparser
import copy
import hashlib
import json

import numpy as np

from .errors import InvalidGeometry, InvalidPhantom
from .geometry import build_scanner
from .phantom import PhantomSpec
from .projection import SinogramGeometry
from .whiteimage import GridSpec

DEFAULTS = {
    "geometry": {
        "n_sectors": 20,
        "active_sectors": "EightActive",
        "crystals_per_sector": 8,
        "crystal_pitch": 2.3,
        "crystal_length": 2.0,
        "ring_radii": [70.0, 75.0],
        "fov_radius": 32.0,
        "sector_offset_deg": 0.0,
    },
    "grid": {"n": 256},
    "sinogram": {"n_s": 256, "n_theta": 180, "s_max": None},
    "phantom": {
        "kind": "FiveRods",
        "body_radius": 15.0,
        "rod_diameters": [1.0, 2.0, 3.0, 4.0, 5.0],
        "rod_ring_radius": 7.0,
        "hole_diameters": [8.0, 8.0],
        "hole_offset": 7.5,
        "activity": 1.0,
    },
    "recon": {"n_iter": 50, "init_value": 1.0, "epsilon_div": 1e-12,
              "white_image": "analytic", "mc_events": 10_000_000},
    "run": {"seed": 0, "n_events": 50_000},
}


class ConfigError(ValueError):
    """Configuration file or flag values are invalid."""


def _convert(value, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(float(value))
    if isinstance(default, float) or default is None:
        return float(value)
    if isinstance(default, list):
        return [float(v) for v in value.split(",") if v.strip()]
    return value.strip()


def load_config(path=None):
    """Defaults merged with an optional INI file; returns a nested dict."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for section in parser.sections():
        if section not in cfg:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in cfg[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            if section == "geometry" and key == "active_sectors":
                v = value.strip()
                cfg[section][key] = v if v in ("EightActive", "FourActive") else \
                    [int(x) for x in v.split(",") if x.strip()]
                continue
            try:
                cfg[section][key] = _convert(value, DEFAULTS[section][key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {value!r}") from exc
    return cfg


def config_hash(cfg):
    """SHA-256 of the canonical JSON form of a configuration."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def make_geometry(cfg, intersection=None):
    g = cfg["geometry"]
    try:
        return build_scanner(
            n_sectors=g["n_sectors"],
            active_sectors=intersection or g["active_sectors"],
            crystals_per_sector=g["crystals_per_sector"],
            crystal_pitch=g["crystal_pitch"],
            crystal_length=g["crystal_length"],
            ring_radii=tuple(g["ring_radii"]),
            fov_radius=g["fov_radius"],
            sector_offset=np.deg2rad(g["sector_offset_deg"]),
        )
    except (InvalidGeometry, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid geometry: {exc}") from exc


def make_grid(cfg):
    try:
        return GridSpec(int(cfg["grid"]["n"]), float(cfg["geometry"]["fov_radius"]))
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def make_sinogram_geometry(cfg):
    s = cfg["sinogram"]
    fov = float(cfg["geometry"]["fov_radius"])
    s_max = fov if s["s_max"] is None else float(s["s_max"])
    try:
        sg = SinogramGeometry(int(s["n_s"]), int(s["n_theta"]), s_max)
    except ValueError as exc:
        raise ConfigError(f"invalid sinogram geometry: {exc}") from exc
    if s_max < fov:
        raise ConfigError("sinogram s_max must be at least the FOV radius")
    return sg


def make_phantom_spec(cfg, kind=None):
    p = cfg["phantom"]
    try:
        return PhantomSpec(
            kind=kind or p["kind"],
            body_radius=p["body_radius"],
            rod_diameters=tuple(p["rod_diameters"]),
            rod_ring_radius=p["rod_ring_radius"],
            hole_diameters=tuple(p["hole_diameters"]),
            hole_offset=p["hole_offset"],
            activity=p["activity"],
        )
    except InvalidPhantom as exc:
        raise ConfigError(f"invalid phantom: {exc}") from exc


def render(cfg):
    """INI text for a configuration (``None`` values omitted)."""
    lines = []
    for section, items in cfg.items():
        lines.append(f"[{section}]")
        for key, value in items.items():
            if value is None:
                continue
            if isinstance(value, (list, tuple)):
                value = ", ".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
