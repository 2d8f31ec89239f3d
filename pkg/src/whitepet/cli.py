"""Command-line interface.

Exit status: 0 on success, 2 for configuration errors, 3 for data errors.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as wio
from ._accel import set_threads
from .config import (ConfigError, config_hash, load_config, make_geometry, make_grid,
                     make_phantom_spec, make_sinogram_geometry, render)
from .errors import (DataFormatError, InvalidGeometry, InvalidPhantom, LowAcceptance,
                     MismatchedShapes)
from .geometry import INTERSECTIONS
from .metrics import correlation, nrmse
from .phantom import make_phantom, simulate_events
from .projection import bin_events
from .recon import ReconConfig, fbp, mlem, poisson_loglik
from .response import (APPROXIMATIONS, approximation, rmse_vs_reference, rotated_exact,
                       rotated_numeric)
from .whiteimage import (compare_white_images, radius_table, white_image_analytic,
                         white_image_mc, white_image_profile)

EXIT_CONFIG = 2
EXIT_DATA = 3
TAGS = {"EightActive": "eight", "FourActive": "four"}
METHODS = {"proposed": "Proposed", "uncompensated": "UncompensatedMLEM", "fbp": "FBP"}
TABLE_CONFIGS = ((50.0, 1.0), (100.0, 1.0))


class Run:
    """Effective configuration, output directory and provenance for a command."""

    def __init__(self, command, args):
        self.command = command
        self.cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            self.cfg["run"]["seed"] = int(args.seed)
        if getattr(args, "grid", None) is not None:
            self.cfg["grid"]["n"] = int(args.grid)
        self.out = Path(args.out)
        self.prov_csv = {}

    def finalize_config(self):
        self.hash = config_hash({"command": self.command, **self.cfg})

    @property
    def seed(self):
        return int(self.cfg["run"]["seed"])

    def provenance(self):
        return {"tool": f"whitepet {__version__}", "command": self.command,
                "config_sha256": self.hash, "seed": self.seed}

    def image(self, stem, img):
        wio.write_image(self.out / stem, img, self.provenance())

    def csv(self, name, header, columns, fmts=None):
        wio.write_csv(self.out / name, header, columns, fmts)
        self.prov_csv[name] = self.provenance()

    def close(self):
        if self.prov_csv:
            wio.write_provenance(self.out, self.prov_csv)


def _positive(kind):
    def conv(text):
        try:
            v = kind(float(text))
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _intersections(choice, cfg):
    if choice == "both":
        return ["EightActive", "FourActive"]
    if choice is None:
        a = cfg["geometry"]["active_sectors"]
        return [a if isinstance(a, str) else "Custom"]
    return [choice]


def _geometry_for(run, name):
    return make_geometry(run.cfg, None if name == "Custom" else name)


def _tag(name):
    return TAGS.get(name, "custom")


# ------------------------------------------------------------------ commands


def cmd_white_image(args):
    run = Run("white-image", args)
    if args.events is not None:
        run.cfg["recon"]["mc_events"] = int(args.events)
    grid = make_grid(run.cfg)
    names = _intersections(args.intersection, run.cfg)
    geoms = {n: _geometry_for(run, n) for n in names}
    run.finalize_config()
    rows = []
    for name, geom in geoms.items():
        tag = _tag(name)
        wi = white_image_analytic(geom, grid)
        run.image(f"wi_analytic_{tag}", wi)
        r = radius_table(grid)
        r = r[r <= grid.fov_radius]
        run.csv(f"wi_profile_{tag}.csv", ("r", "value"), (r, white_image_profile(geom, r)))
        if args.mc:
            n = int(run.cfg["recon"]["mc_events"])
            mc = white_image_mc(geom, grid, n, run.seed)
            run.image(f"wi_mc_{tag}", mc)
            rows.append((name, n, mc.meta["accepted"], compare_white_images(wi, mc)))
    if rows:
        cols = list(zip(*rows))
        run.csv("wi_nrmse.csv", ("intersection", "n_events", "accepted", "nrmse"), cols,
                ("%s", "%d", "%d", "%.6g"))
    run.close()


def cmd_phantom(args):
    run = Run("phantom", args)
    grid = make_grid(run.cfg)
    spec = make_phantom_spec(run.cfg, args.kind)
    img = _make_phantom(spec, grid)
    run.finalize_config()
    run.image(f"phantom_{spec.kind}", img)


def _make_phantom(spec, grid):
    try:
        return make_phantom(spec, grid)
    except InvalidPhantom as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args):
    run = Run("simulate", args)
    if args.events is not None:
        run.cfg["run"]["n_events"] = int(args.events)
    if args.intersection is not None:
        run.cfg["geometry"]["active_sectors"] = args.intersection
    grid = make_grid(run.cfg)
    sg = make_sinogram_geometry(run.cfg)
    geom = make_geometry(run.cfg)
    spec = make_phantom_spec(run.cfg, args.kind)
    truth = _make_phantom(spec, grid)
    run.finalize_config()
    events = simulate_events(truth, geom, run.cfg["run"]["n_events"], run.seed)
    sino = bin_events(events, geom, sg, run.seed)
    run.image(f"phantom_{spec.kind}", truth)
    wio.write_events(run.out / "events.csv", events)
    run.prov_csv["events.csv"] = run.provenance()
    wio.write_sinogram(run.out / "sinogram.raw", sino, run.provenance())
    run.close()


def _load_sinogram(args, run, geom):
    if args.sinogram:
        sino = wio.read_sinogram(args.sinogram)
    else:
        events = wio.read_events(args.events)
        sino = bin_events(events, geom, make_sinogram_geometry(run.cfg), run.seed)
    return sino


def cmd_reconstruct(args):
    run = Run("reconstruct", args)
    if args.iters is not None:
        run.cfg["recon"]["n_iter"] = int(args.iters)
    if args.wi is not None:
        run.cfg["recon"]["white_image"] = args.wi
    if args.intersection is not None:
        run.cfg["geometry"]["active_sectors"] = args.intersection
    if not args.events and not args.sinogram:
        raise ConfigError("reconstruct needs --events or --sinogram")
    for p in (args.events, args.sinogram, args.truth):
        if p and not Path(p).is_file():
            raise DataFormatError(f"input file not found: {p}")
    grid = make_grid(run.cfg)
    geom = make_geometry(run.cfg)
    if run.cfg["recon"]["white_image"] not in ("analytic", "mc"):
        raise ConfigError("recon.white_image must be 'analytic' or 'mc'")
    methods = list(METHODS) if args.method == "all" else [args.method]
    run.finalize_config()
    sino = _load_sinogram(args, run, geom)
    sino.geometry.check_grid(grid)
    truth = wio.read_image_raw(args.truth) if args.truth else None
    if truth is not None and truth.grid != grid:
        raise MismatchedShapes("truth image grid differs from the reconstruction grid")
    mask = grid.disk_mask()
    rc = run.cfg["recon"]
    wi = None
    if "proposed" in methods:
        if rc["white_image"] == "mc":
            wi = white_image_mc(geom, grid, rc["mc_events"], run.seed)
        else:
            wi = white_image_analytic(geom, grid)
    for m in methods:
        if m == "fbp":
            run.image("recon_fbp", fbp(sino, grid))
            continue
        cfg = ReconConfig(grid=grid, n_iter=rc["n_iter"], init_value=rc["init_value"],
                          epsilon_div=rc["epsilon_div"], white_image=wi, baseline=METHODS[m])
        trace = []

        def record(k, img):
            err = nrmse(img, truth, mask, fit_scale=True) if truth is not None else float("nan")
            trace.append((k, poisson_loglik(sino, img), err))

        img = mlem(sino, cfg, callback=record)
        run.image(f"recon_{m}", img)
        run.csv(f"trace_{m}.csv", ("iter", "loglik", "nrmse"), list(zip(*trace)),
                ("%d", "%.17g", "%.17g"))
    run.close()


def cmd_compare_approx(args):
    run = Run("compare-approx", args)
    hs = [float(h) for h in args.h.split(",")] if args.h else None
    if args.approx == "exact":
        if hs is not None and any(h != 0.0 for h in hs):
            raise ConfigError("the exact rotated response exists only for h = 0")
        hs = [0.0]
    hs = hs if hs is not None else [0.0, 1.0, 10.0]
    configs = [(float(args.R0), float(args.L0))] if args.R0 else list(TABLE_CONFIGS)
    for R0, L0 in configs:
        if not 0 < L0 < R0 or any(h < 0 for h in hs):
            raise ConfigError("need 0 < L0 < R0 and h >= 0")
    names = list(APPROXIMATIONS) if args.approx == "all" else [args.approx]
    run.finalize_config()
    rows = []
    for R0, L0 in configs:
        for name in names:
            if name in APPROXIMATIONS:
                rows.append((name, R0, L0, rmse_vs_reference(name, R0, L0).max_rmse))
        r = np.round(np.arange(0.0, R0 + 1e-9, 0.1), 10)
        for h in hs:
            ref = rotated_numeric(r, h, R0, L0)
            run.csv(f"profile_R{R0:g}_L{L0:g}_h{h:g}_numeric.csv", ("r", "value"), (r, ref))
            for name in names:
                if name == "numeric":
                    continue
                if name == "exact":
                    v = rotated_exact(r, R0, L0)
                else:
                    v = approximation(name, r, h, R0, L0)
                run.csv(f"profile_R{R0:g}_L{L0:g}_h{h:g}_{name}.csv", ("r", "value"), (r, v))
    if rows:
        run.csv("rmse.csv", ("approx", "R0", "L0", "max_rmse"), list(zip(*rows)),
                ("%s", "%g", "%g", "%.6g"))
    run.close()


def cmd_bench(args):
    """Regenerate the approximation table, white-image check and recon table."""
    run = Run("bench", args)
    if args.events is not None:
        run.cfg["run"]["n_events"] = int(args.events)
    if args.mc_events is not None:
        run.cfg["recon"]["mc_events"] = int(args.mc_events)
    grid = make_grid(run.cfg)
    sg = make_sinogram_geometry(run.cfg)
    geoms = {n: make_geometry(run.cfg, n) for n in INTERSECTIONS}
    specs = {k: make_phantom_spec(run.cfg, k) for k in ("FiveRods", "TwoHoles")}
    run.finalize_config()

    rows = []
    for R0, L0 in TABLE_CONFIGS:
        for name in APPROXIMATIONS:
            t = rmse_vs_reference(name, R0, L0)
            rows.append((name, R0, L0, t.max_rmse, t.argmax_h))
    run.csv("bench_rmse.csv", ("approx", "R0", "L0", "max_rmse", "argmax_h"), list(zip(*rows)),
            ("%s", "%g", "%g", "%.6g", "%g"))

    rows = []
    n_mc = int(run.cfg["recon"]["mc_events"])
    for name, geom in geoms.items():
        wi = white_image_analytic(geom, grid)
        for n in sorted({max(1, n_mc // 100), max(1, n_mc // 10), n_mc}):
            mc = white_image_mc(geom, grid, n, run.seed)
            rows.append((name, n, compare_white_images(wi, mc)))
    run.csv("bench_white_image.csv", ("intersection", "n_events", "nrmse"), list(zip(*rows)),
            ("%s", "%d", "%.6g"))

    rows = []
    mask = grid.disk_mask()
    for name, geom in geoms.items():
        wi = white_image_analytic(geom, grid)
        for kind, spec in specs.items():
            truth = _make_phantom(spec, grid)
            events = simulate_events(truth, geom, run.cfg["run"]["n_events"], run.seed)
            sino = bin_events(events, geom, sg, run.seed)
            for m, base in METHODS.items():
                t0 = time.perf_counter()
                if base == "FBP":
                    img = fbp(sino, grid)
                else:
                    img = mlem(sino, ReconConfig(grid=grid, n_iter=run.cfg["recon"]["n_iter"],
                                                 white_image=wi, baseline=base))
                dt = time.perf_counter() - t0
                run.image(f"bench_{_tag(name)}_{kind}_{m}", img)
                rows.append((name, kind, m, nrmse(img, truth, mask, fit_scale=True),
                             correlation(img, wi, mask), correlation(img, truth, mask), dt))
    # wall-clock seconds are reported on stdout only so that files stay reproducible
    for r in rows:
        print(f"{r[0]:12s} {r[1]:9s} {r[2]:14s} nrmse={r[3]:.4f} time={r[6]:.2f}s")
    run.csv("bench_recon.csv", ("intersection", "phantom", "method", "nrmse", "corr_white_image",
                                "corr_truth"), list(zip(*rows))[:6],
            ("%s", "%s", "%s", "%.6g", "%.6g", "%.6g"))
    run.close()


# ------------------------------------------------------------------ parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--threads", type=_positive(int), help="cap on worker threads")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--grid", type=_positive(int), help="pixels per image side")

    p = argparse.ArgumentParser(prog="whitepet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"whitepet {__version__}")
    p.add_argument("--print-config", action="store_true", help="print the default configuration")
    sub = p.add_subparsers(dest="command")

    inter = ("EightActive", "FourActive")
    s = sub.add_parser("white-image", parents=[common], help="analytic (and MC) white images")
    s.add_argument("--intersection", choices=inter + ("both",), default="both")
    s.add_argument("--mc", action="store_true", help="also run the Monte Carlo estimate")
    s.add_argument("--events", type=_positive(int), help="Monte Carlo sample count")
    s.set_defaults(func=cmd_white_image)

    s = sub.add_parser("phantom", parents=[common], help="rasterise a phantom")
    s.add_argument("--kind", choices=("FiveRods", "TwoHoles"))
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("simulate", parents=[common], help="simulate list-mode data")
    s.add_argument("--kind", choices=("FiveRods", "TwoHoles"))
    s.add_argument("--intersection", choices=inter)
    s.add_argument("--events", type=_positive(int), help="number of detected events")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", parents=[common], help="MLEM / FBP reconstruction")
    s.add_argument("--events", help="event CSV file")
    s.add_argument("--sinogram", help="raw sinogram file")
    s.add_argument("--truth", help="raw ground-truth image for the NRMSE trace")
    s.add_argument("--method", choices=tuple(METHODS) + ("all",), default="all")
    s.add_argument("--iters", type=_positive(int))
    s.add_argument("--wi", choices=("analytic", "mc"))
    s.add_argument("--intersection", choices=inter)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("compare-approx", parents=[common], help="rotated-response approximations")
    s.add_argument("--approx", choices=APPROXIMATIONS + ("exact", "numeric", "all"), default="all")
    s.add_argument("--h", help="comma separated shifts for the profile files (default 0,1,10)")
    s.add_argument("--R0", type=_positive(float), help="half crystal separation")
    s.add_argument("--L0", type=_positive(float), default=1.0, help="half crystal length")
    s.set_defaults(func=cmd_compare_approx)

    s = sub.add_parser("bench", parents=[common], help="regenerate all result tables")
    s.add_argument("--events", type=_positive(int), help="detected events per simulation")
    s.add_argument("--mc-events", type=_positive(int), help="largest Monte Carlo sample count")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(render(load_config()))
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        set_threads(args.threads)
        args.func(args)
    except (ConfigError, InvalidGeometry, InvalidPhantom) as exc:
        print(f"whitepet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, MismatchedShapes, LowAcceptance, OSError) as exc:
        print(f"whitepet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
