"""Command-line front end.

Exit codes: 0 success, 2 invalid config or arguments, 3 a verify-* command
missed its acceptance threshold.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import config as cfg
from .chabauty import continuity_probe
from .counting import (
    OrderedFamily,
    box_dimension,
    count_in_family,
    fit_error_exponent,
    koch_curve,
    patch_statistics,
    write_count_csv,
    write_patch_csv,
)
from .cutproject import (
    center_window,
    check_irreducibility,
    density,
    dump_model_set,
    empirical_density,
    generate,
)
from .errors import ConfigError, DegenerateFit, ModelSetError
from .lattice import Region
from .montecarlo import estimate_mean_sv, estimate_second_moment, flow_stretch, write_estimates_csv
from .transforms import TestFunction, sv_transform

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_THRESHOLD = 3

SUBCOMMANDS = ("generate", "density", "irreducible", "cf-dist", "transform", "verify-siegel",
               "verify-rogers", "count", "patches", "boxdim")


def _fmt(x):
    return repr(float(x))


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(args, name, payload):
    with open(_out_path(args, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(s, args):
    spec = cfg.experiment(s.doc, "generate")
    region = cfg.build_region(spec["region"], s.scheme.d, "/experiments/generate/region")
    ms = generate(s.scheme, s.grid, s.window, region, s.cap)
    with open(_out_path(args, "model_set.txt"), "w") as fh:
        dump_model_set(ms, fh)
    print(f"points {len(ms.points)}")
    return EXIT_OK


def cmd_density(s, args):
    D = density(s.scheme, s.grid, s.window)
    payload = {"density": D}
    print(f"{D:.12g}")
    T = s.doc.get("experiments", {}).get("density", {}).get("T")
    if T is not None:
        ms = generate(s.scheme, s.grid, s.window, Region.ball(np.zeros(s.scheme.d), T), s.cap)
        emp = empirical_density(ms, T)
        payload.update(T=T, empirical=emp, rel_error=(emp - D) / D)
        print(f"empirical {emp:.12g} at T={T:g} (rel. error {(emp - D) / D:+.3e})")
    _write_json(args, "density.json", payload)
    return EXIT_OK


def cmd_irreducible(s, args):
    spec = s.doc.get("experiments", {}).get("irreducible", {})
    rep = check_irreducibility(s.scheme, s.grid, spec.get("probe_radius", 20.0), s.window,
                               spec.get("gap_threshold"), s.cap)
    payload = rep.as_dict()
    payload["passed"] = rep.passed()
    _write_json(args, "irreducible.json", payload)
    print(f"D {rep.D}  I {rep.I}  Reg {rep.Reg}")
    return EXIT_OK


def cmd_cf_dist(s, args):
    spec = cfg.experiment(s.doc, "cf_dist")
    d = s.scheme.d
    perts = []
    for i, p in enumerate(spec["perturbations"]):
        A = np.array(p.get("matrix", np.eye(d).tolist()), dtype=np.float64)
        if A.shape != (d, d):
            raise ConfigError(f"matrix must be {d}x{d}", f"/experiments/cf_dist/perturbations/{i}/matrix")
        v = p.get("vector")
        if v is not None and len(v) != d:
            raise ConfigError(f"vector must have {d} entries", f"/experiments/cf_dist/perturbations/{i}/vector")
        perts.append((A, None if v is None else np.array(v, dtype=np.float64)))
    eps_floor = spec.get("eps_floor", 1e-2)
    window = s.window
    if spec.get("center_window", False) and s.scheme.m:
        window, _ = center_window(window)
    dists = continuity_probe(s.scheme, window, s.grid, perts, spec.get("radius"), eps_floor,
                             spec.get("resolution"))
    with open(_out_path(args, "cf_dist.csv"), "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("index", "distance"))
        for i, dist in enumerate(dists):
            w.writerow((i, _fmt(dist)))
    for i, dist in enumerate(dists):
        print(f"{i} {dist:.6g}")
    return EXIT_OK


def cmd_transform(s, args):
    spec = cfg.experiment(s.doc, "transform")
    f = cfg.build_function(spec["function"], s.scheme.d, "/experiments/transform/function")
    supp = f.support()
    if supp is None:
        value = 0.0
    else:
        lo, hi = supp.bounding_box()
        region = Region.box(lo, np.nextafter(hi, np.inf))
        ms = generate(s.scheme, s.grid, s.window, region, s.cap)
        value = sv_transform(f, ms, s.mode)
    _write_json(args, "transform.json", {"mode": s.mode, "value": value, "integral": f.integral()})
    print(f"{value:.12g}")
    return EXIT_OK


def _support_radius(f):
    supp = f.support()
    if supp is None:
        return 0.0
    lo, hi = supp.bounding_box()
    return float(np.max(np.abs(np.concatenate([lo, hi]))))


def cmd_verify_siegel(s, args):
    seed = cfg.seed_of(s.doc, args.seed)
    spec = cfg.experiment(s.doc, "verify_siegel")
    f = cfg.build_function(spec["function"], s.scheme.d, "/experiments/verify_siegel/function")
    sampler = cfg.build_sampler(s.doc, seed, _support_radius(f), s.cap)
    res = estimate_mean_sv(f, s.window, s.scheme, s.grid, sampler, s.mode, s.cap, args.threads)
    with open(_out_path(args, "siegel.csv"), "w") as fh:
        write_estimates_csv([(s.doc.get("name", "run"), sampler.t, res)], fh)
    z_max = spec.get("z_max", 3.0)
    print(f"t {sampler.t:g} (stretch {flow_stretch(s.scheme.d, sampler.t):.4g})")
    print(f"mean {res.mean:.6f} stderr {res.stderr:.6f} reference {res.reference:.6f} z {res.z_score:+.3f}")
    ok = math.isfinite(res.z_score) and abs(res.z_score) <= z_max
    print(f"verify-siegel {'PASS' if ok else 'FAIL'} (|z| <= {z_max:g})")
    return EXIT_OK if ok else EXIT_THRESHOLD


ROGERS_COLUMNS = ("radius", "integral", "mean", "reference", "second_moment", "variance", "rogers_ratio",
                  "relative_excess", "count")


def cmd_verify_rogers(s, args):
    seed = cfg.seed_of(s.doc, args.seed)
    spec = cfg.experiment(s.doc, "verify_rogers")
    sampler = cfg.build_sampler(s.doc, seed, max(spec["radii"]), s.cap)
    print(f"t {sampler.t:g} (stretch {flow_stretch(s.scheme.d, sampler.t):.4g})")
    rows = []
    for r in spec["radii"]:
        f = TestFunction.ball(r, dim=s.scheme.d)
        sm = estimate_second_moment(f, s.window, s.scheme, s.grid, sampler, s.mode, s.cap, args.threads)
        rows.append((r, f.integral(), sm))
    with open(_out_path(args, "rogers.csv"), "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROGERS_COLUMNS)
        for r, integral, sm in rows:
            w.writerow((_fmt(r), _fmt(integral), _fmt(sm.mean), _fmt(sm.reference), _fmt(sm.second_moment),
                        _fmt(sm.variance), _fmt(sm.rogers_ratio), _fmt(sm.relative_excess), sm.count))
    for r, _, sm in rows:
        print(f"r {r:g}  ratio {sm.rogers_ratio:.5g}  excess {sm.relative_excess:+.5g}")
    ratios = [sm.rogers_ratio for _, _, sm in rows]
    ok = True
    band = spec.get("band")
    if band is not None:
        ok = min(ratios) > 0 and max(ratios) <= band * min(ratios)
    excess_r = spec.get("excess_radius")
    if excess_r is not None:
        match = [sm for r, _, sm in rows if r == excess_r]
        if not match:
            raise ConfigError("excess_radius must be one of radii", "/experiments/verify_rogers/excess_radius")
        ok = ok and abs(match[0].relative_excess) < spec.get("excess_max", 0.1)
    print(f"verify-rogers {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_count(s, args):
    spec = cfg.experiment(s.doc, "count")
    family = OrderedFamily(spec.get("family", "balls"), s.scheme.d, spec.get("anchor", "corner"))
    T_list = spec["T"]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ConfigError("T must be increasing", "/experiments/count/T")
    rows = count_in_family(s.scheme, s.grid, s.window, family, T_list, s.cap)
    with open(_out_path(args, "count.csv"), "w") as fh:
        write_count_csv(rows, fh)
    for r in rows:
        print(f"T {r.T:g}  count {r.count}  error {r.error:+.6g}")
    try:
        fit = fit_error_exponent(rows)
        print(f"exponent {fit.slope:.4f} +- {fit.stderr:.4f}")
    except DegenerateFit as exc:
        print(f"exponent n/a ({exc})")
    return EXIT_OK


def cmd_patches(s, args):
    spec = cfg.experiment(s.doc, "patches")
    family = OrderedFamily(spec.get("family", "balls"), s.scheme.d)
    st = patch_statistics(s.scheme, s.grid, s.window, spec["R"], spec["T"], family, s.cap)
    with open(_out_path(args, "patches.csv"), "w") as fh:
        write_patch_csv(st, fh)
    print(f"classes {len(st.classes)}  centres {st.total}")
    print(f"predicted sum {st.predicted_sum():.12g}  density {st.density:.12g}")
    return EXIT_OK


def cmd_boxdim(s, args):
    spec = cfg.experiment(s.doc, "boxdim")
    if "koch_iterations" in spec:
        target = koch_curve(spec["koch_iterations"])
    else:
        if s.scheme.m == 0 or s.scheme.m > 2:
            raise ConfigError("window boundary sampling needs m in {1, 2}", "/experiments/boxdim")
        target = s.window
    scales = sorted(spec["scales"], reverse=True)
    est = box_dimension(target, scales)
    with open(_out_path(args, "boxdim.csv"), "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("r", "K", "cover_count"))
        for r, c in zip(est.scales, est.counts):
            w.writerow((_fmt(r), int(math.floor(1.0 / r)), int(c)))
    print(f"box dimension {est.estimate:.4f} +- {est.stderr:.4f}")
    return EXIT_OK


HANDLERS = {
    "generate": cmd_generate,
    "density": cmd_density,
    "irreducible": cmd_irreducible,
    "cf-dist": cmd_cf_dist,
    "transform": cmd_transform,
    "verify-siegel": cmd_verify_siegel,
    "verify-rogers": cmd_verify_rogers,
    "count": cmd_count,
    "patches": cmd_patches,
    "boxdim": cmd_boxdim,
}


def build_parser():
    p = argparse.ArgumentParser(prog="modelsets", description="Cut-and-project set experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="config path, or a shipped name: " + ", ".join(cfg.SHIPPED))
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--cap", type=int, default=None, help="enumeration cap")
        sp.add_argument("--center-window", action="store_true",
                        help="translate the window so an interior point sits at the origin")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None and not (0 <= args.seed < 2**64):
        print("error: --seed must fit in 64 unsigned bits", file=sys.stderr)
        return EXIT_INVALID
    try:
        doc = cfg.load(args.config)
        s = cfg.setup(doc, args.cap, args.center_window)
        return HANDLERS[args.command](s, args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ModelSetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
