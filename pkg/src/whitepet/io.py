"""File formats.

* Images: raw little-endian float32, row-major with row 0 at ``y = -fov``,
  plus a text sidecar ``<name>.hdr`` holding ``width,height,fov_radius``.
* Viewing images: 16-bit binary PGM, min-max scaled, top row at ``y = +fov``.
* Sinograms: raw float32 ``(n_s, n_theta)`` with sidecar ``n_s,n_theta,s_max``.
* Events: CSV ``pair_id,gantry_angle_rad,offset1_mm,offset2_mm``.
* Profiles: CSV ``r,value``.

Every write goes to a temporary file in the target directory and is renamed
into place.  Sidecars and PGM headers carry ``# key: value`` provenance lines.
"""

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .projection import EventList, Sinogram, SinogramGeometry
from .whiteimage import GridSpec, Image

EVENT_HEADER = ("pair_id", "gantry_angle_rad", "offset1_mm", "offset2_mm")


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _comment_lines(provenance):
    return "".join(f"# {k}: {v}\n" for k, v in (provenance or {}).items())


def _sidecar(path):
    return Path(str(path) + ".hdr") if not str(path).endswith(".raw") else Path(str(path)[:-4] + ".hdr")


def _read_sidecar(path, fields):
    side = _sidecar(path)
    try:
        lines = [ln.strip() for ln in side.read_text().splitlines()]
    except OSError as exc:
        raise DataFormatError(f"cannot read sidecar {side}: {exc}") from exc
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(body) != 2 or body[0].split(",") != list(fields):
        raise DataFormatError(f"sidecar {side} must hold the header {','.join(fields)} and one row")
    return body[1].split(",")


def _read_raw(path, count):
    try:
        data = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if data.size != count:
        raise DataFormatError(f"{path} holds {data.size} values, expected {count}")
    return data.astype(float)


def write_image_raw(path, img, provenance=None):
    g = img.grid
    atomic_write(path, np.ascontiguousarray(img.values, dtype="<f4").tobytes())
    atomic_write(_sidecar(path), _comment_lines(provenance)
                 + f"width,height,fov_radius\n{g.n},{g.n},{g.fov_radius!r}\n")


def read_image_raw(path):
    w, h, fov = _read_sidecar(path, ("width", "height", "fov_radius"))
    try:
        w, h, fov = int(w), int(h), float(fov)
    except ValueError as exc:
        raise DataFormatError(f"bad sidecar values for {path}") from exc
    if w != h:
        raise DataFormatError("only square images are supported")
    return Image(_read_raw(path, w * h).reshape(h, w), GridSpec(w, fov))


def pgm_bytes(values, provenance=None):
    """16-bit P5 PGM of ``values`` (min-max scaled, flipped so +y is up)."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    scaled = np.zeros(v.shape) if hi <= lo else (v - lo) / (hi - lo)
    pix = np.rint(np.flipud(scaled) * 65535.0).astype(">u2")
    head = "P5\n" + _comment_lines(provenance) + f"{v.shape[1]} {v.shape[0]}\n65535\n"
    return head.encode("ascii") + pix.tobytes()


def write_pgm(path, img, provenance=None):
    atomic_write(path, pgm_bytes(img.values, provenance))


def read_pgm(path):
    """Read a 16-bit P5 PGM written by :func:`write_pgm` (rows top to bottom)."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise DataFormatError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw[pos + 1:], dtype=dtype, count=w * h).reshape(h, w)


def write_image(stem, img, provenance=None):
    """Write ``<stem>.raw`` + ``<stem>.hdr`` and ``<stem>.pgm``."""
    stem = str(stem)
    write_image_raw(stem + ".raw", img, provenance)
    write_pgm(stem + ".pgm", img, provenance)


def write_sinogram(path, sino, provenance=None):
    g = sino.geometry
    prov = dict(provenance or {})
    prov["overflow"] = sino.overflow
    atomic_write(path, np.ascontiguousarray(sino.values, dtype="<f4").tobytes())
    atomic_write(_sidecar(path), _comment_lines(prov)
                 + f"n_s,n_theta,s_max\n{g.n_s},{g.n_theta},{g.s_max!r}\n")


def read_sinogram(path):
    n_s, n_t, s_max = _read_sidecar(path, ("n_s", "n_theta", "s_max"))
    try:
        sg = SinogramGeometry(int(n_s), int(n_t), float(s_max))
    except ValueError as exc:
        raise DataFormatError(f"bad sidecar values for {path}") from exc
    return Sinogram(_read_raw(path, sg.n_s * sg.n_theta).reshape(sg.n_s, sg.n_theta), sg)


def _csv_text(header, columns, fmts):
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(f % v for f, v in zip(fmts, row)) + "\n")
    return buf.getvalue()


def write_events(path, events):
    atomic_write(path, _csv_text(EVENT_HEADER,
                                 (events.pair_id, events.gantry_angle, events.offset1, events.offset2),
                                 ("%d", "%.17g", "%.17g", "%.17g")))


def read_events(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != EVENT_HEADER:
        raise DataFormatError(f"{path} lacks the header {','.join(EVENT_HEADER)}")
    try:
        cols = list(zip(*rows[1:])) if len(rows) > 1 else [(), (), (), ()]
        return EventList(np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=float),
                         np.array(cols[2], dtype=float), np.array(cols[3], dtype=float))
    except (ValueError, IndexError) as exc:
        raise DataFormatError(f"malformed event row in {path}") from exc


def write_csv(path, header, columns, fmts=None):
    fmts = fmts or ["%.17g"] * len(header)
    atomic_write(path, _csv_text(header, columns, fmts))


def write_provenance(directory, entries):
    """Merge ``{filename: provenance}`` into ``<directory>/provenance.json``."""
    path = Path(directory) / "provenance.json"
    data = {}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except ValueError:
            data = {}
    data.update(entries)
    atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
