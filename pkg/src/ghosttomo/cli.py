"""Command-line interface: ``ghosttomo <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import ghost2d, ghost3d, io
from .buckets import mask_campaign, random_campaign, run_campaign
from .errors import GhostTomoError
from .experiments import ExperimentSpec, run_experiment
from .masks import autocorrelate, make_mask
from .metrics import MetricReport, mad, write_curve_csv
from .projector import AngleSet, project_all
from .volume import SpherePhantomSpec, Volume, build_phantom

log = logging.getLogger("ghosttomo")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=float))


def cmd_phantom(args):
    spec = SpherePhantomSpec(**json.loads(Path(args.spec).read_text())) if args.spec \
        else SpherePhantomSpec(n=args.n, sphere_diameter=args.diameter)
    vol = build_phantom(spec)
    io.write_raw(args.out, vol.data, meta={"phantom": spec.to_dict()})
    log.info("phantom %d^3, total attenuation %.2f -> %s", vol.n, vol.total(), args.out)


def cmd_project(args):
    vol = io.read_raw(args.vol)
    angles = AngleSet.uniform(args.angles, args.offset)
    projs = project_all(vol, angles, workers=args.workers)
    io.write_raw(args.out, projs, axes="angle,x2,x1", meta={"angles": angles.to_dict()})


def cmd_buckets(args):
    vol = Volume(io.read_raw(args.vol))
    angles = AngleSet.uniform(args.angles, args.offset)
    if args.masks == "random":
        camp = random_campaign(angles, vol.n, args.per_angle, args.seed, args.model)
    else:
        mask = io.read_pgm(args.masks) if Path(args.masks).exists() \
            else make_mask(args.masks, vol.n, seed=args.seed)
        camp = mask_campaign(angles, mask, args.per_angle, args.policy, args.seed, args.model)
    buckets = run_campaign(vol, camp, workers=args.workers)
    buckets.provenance.update({"seed": args.seed, "masks": args.masks, "policy": args.policy})
    io.write_buckets(args.out, buckets)
    log.info("%d buckets -> %s", len(buckets), args.out)


def cmd_masks(args):
    n = args.p if args.kind in ("mura", "frt") else args.n
    mask = make_mask(args.kind, n, seed=args.seed, mean=args.mean)
    io.write_pgm(args.out, mask)


def cmd_autocorr(args):
    rep = autocorrelate(io.read_pgm(args.inp))
    _write_json(args.report, rep.to_dict())
    print(json.dumps(rep.to_dict()))


def _priors(text):
    alias = {"grad": "gradient", "img": "image", "four": "fourier"}
    return [alias.get(p, p) for p in text.split(",") if p] if text else []


def cmd_recon2d(args):
    buckets = io.read_buckets(args.buckets)
    b = buckets.attenuation_values()[args.angle_index]
    pats = buckets.campaign.patterns[args.angle_index]
    cfg = ghost2d.SolverConfig(args.alpha, args.iters, ghost2d.make_priors(_priors(args.priors)),
                               check_divergence=args.method != "cs")
    if args.method == "xc":
        img = ghost2d.xc(b, pats)
    elif args.method == "ixc":
        img = ghost2d.ixc(b, pats, cfg)
    elif args.method == "cg":
        img = ghost2d.cg_xc(b, pats, args.iters)
    else:
        img = ghost2d.cs_ixc(b, pats, cfg)
    io.write_raw(args.out, img.data, axes="x2,x1", meta={"method": img.method})
    io.write_png(Path(args.out).with_suffix(".png"), img.data)
    metrics = {"method": img.method, "iterations": img.iterations, "residual_curve": img.residuals}
    if args.truth:
        ang = buckets.campaign.angle_set
        truth = project_all(io.read_raw(args.truth), [ang.angles[args.angle_index]], ang.axis_offset)[0]
        metrics["MAD"] = mad(img.data, truth)
    _write_json(args.metrics or Path(args.out).with_suffix(".json"), metrics)


def cmd_recon3d(args):
    buckets = io.read_buckets(args.buckets)
    if args.mode == "direct":
        res = ghost3d.direct_xc_sirt(buckets, args.iters, args.relax, clamp=not args.no_clamp,
                                     inner_xc_iterations=args.inner)
    else:
        cfg = ghost2d.SolverConfig(args.alpha, args.gi_iters, ghost2d.make_priors(_priors(args.priors)),
                                   mean_correction=True, check_divergence=False)
        res = ghost3d.two_step(buckets, args.gi_method, cfg, args.tomo, args.iters, args.relax,
                               clamp=not args.no_clamp, gi_init=args.gi_init)
    out = Path(args.out)
    io.write_raw(out, res.data, meta={"method": res.method, "iterations": res.iterations})
    for k in args.slices:
        io.write_png(out.with_name(f"{out.stem}_r3_{k}.png"), res.data[k])
    if res.residuals:
        write_curve_csv(out.with_name(out.stem + "_residuals.csv"), res.residuals,
                        ("iteration", "residual"))
    rep = MetricReport(rmse_buckets=res.rmse)
    if args.truth:
        truth = io.read_raw(args.truth)
        rep.mad = mad(res.data[args.slices[0]], truth[args.slices[0]])
        rep.max_value_used_for_normalization = float(truth[args.slices[0]].max())
    metrics = {**rep.to_dict(), "method": res.method, "iterations": res.iterations}
    _write_json(args.metrics or out.with_suffix(".json"), metrics)


def cmd_experiment(args):
    spec = ExperimentSpec.from_json(args.spec)
    out = run_experiment(spec, args.out)
    print(out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghosttomo", description="X-ray ghost imaging and tomography")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write the three-sphere phantom")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--diameter", type=float, default=12.0)
    s.add_argument("--spec", help="phantom JSON (n, sphere_diameter, attenuation, centers)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_phantom)

    sim = sub.add_parser("simulate", help="simulate projections or buckets")
    simsub = sim.add_subparsers(dest="what", required=True)
    s = simsub.add_parser("project")
    s.add_argument("--vol", required=True)
    s.add_argument("--angles", type=int, default=90)
    s.add_argument("--offset", type=float, default=0.5)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_project)
    s = simsub.add_parser("buckets")
    s.add_argument("--vol", required=True)
    s.add_argument("--masks", default="random",
                   help="'random' (fresh i.i.d. masks), a mask kind, or a PGM file to scan")
    s.add_argument("--angles", type=int, default=90)
    s.add_argument("--per-angle", type=int, default=1000)
    s.add_argument("--policy", choices=("same", "different"), default="different")
    s.add_argument("--model", choices=("attenuation", "transmission"), default="attenuation")
    s.add_argument("--offset", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_buckets)

    s = sub.add_parser("masks", help="write a mask as PGM")
    s.add_argument("--kind", choices=("random", "mura", "frt"), required=True)
    s.add_argument("--p", type=int, default=59)
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mean", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_masks)

    s = sub.add_parser("autocorr", help="autocorrelation report of a mask")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_autocorr)

    s = sub.add_parser("recon2d", help="ghost image of one angle")
    s.add_argument("--method", choices=("xc", "ixc", "cg", "cs"), default="xc")
    s.add_argument("--buckets", required=True)
    s.add_argument("--angle-index", type=int, default=0)
    s.add_argument("--alpha", type=float, default=0.25)
    s.add_argument("--iters", type=int, default=10)
    s.add_argument("--priors", default="", help="comma list of image,grad,fourier")
    s.add_argument("--truth", help="phantom raw file for MAD")
    s.add_argument("--metrics")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recon2d)

    s = sub.add_parser("recon3d", help="tomogram from buckets")
    s.add_argument("--mode", choices=("two-step", "direct"), default="direct")
    s.add_argument("--gi-method", choices=("xc", "ixc", "cg", "cs"), default="ixc")
    s.add_argument("--gi-init", choices=("zero", "xc"), default="zero")
    s.add_argument("--gi-iters", type=int, default=10)
    s.add_argument("--alpha", type=float, default=0.025)
    s.add_argument("--priors", default="")
    s.add_argument("--tomo", choices=("fbp", "sirt", "fbp_then_sirt"), default="fbp")
    s.add_argument("--iters", type=int, default=10)
    s.add_argument("--relax", type=float, default=1.5)
    s.add_argument("--inner", type=int, default=1, help="inner XC iterations (direct mode)")
    s.add_argument("--no-clamp", action="store_true")
    s.add_argument("--buckets", required=True)
    s.add_argument("--truth")
    s.add_argument("--slices", type=int, nargs="+", default=[18])
    s.add_argument("--metrics")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recon3d)

    s = sub.add_parser("experiment", help="run an experiment spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except GhostTomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
