"""Command-line interface: partition, simulate, extract, verify, threshold,
catalog.

Numeric parameters are parsed as exact rationals ("43/100" and "0.43" are the
same number), every output file is accompanied by a JSON manifest, and report
paths render a matplotlib figure next to the delimited output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .catalog import CatalogBundle, make_bundle, threshold_family, verify_bundle
from .conditioning import (
    ConditioningProblem,
    NonMonotone,
    NotBracketing,
    bisect_threshold,
    verify,
)
from .maps import ClusterDistribution, build_g_map
from .orbit import (
    AmbiguousTransition,
    EscapedAmbient,
    NoPlateau,
    Orbit,
    UnassignedImage,
    cluster,
    extract_problem,
    read_orbit_csv,
    simulate,
    write_orbit_csv,
)
from .partition import atoms_to_json, enumerate_atoms
from .rational import bound_str, rat
from .symmetry import named_symmetries


def _parse_rho(args) -> ClusterDistribution:
    if args.rho:
        return ClusterDistribution.of(args.rho.split(","))
    if getattr(args, "dim", None):
        return ClusterDistribution.uniform(args.dim)
    raise SystemExit("one of --rho or --dim is required")


def _write_manifest(args, out_paths: list[str], t0: float, extra: dict | None = None):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "manifest_dir")}
    man = {
        "subcommand": args.subcommand,
        "params": params,
        "outputs": out_paths,
        "tool_version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
    }
    if extra:
        man.update(extra)
    for out in out_paths:
        p = Path(out)
        mdir = Path(args.manifest_dir) if args.manifest_dir else p.parent
        mdir.mkdir(parents=True, exist_ok=True)
        (mdir / (p.name + ".manifest.json")).write_text(json.dumps(man, indent=2, default=str))


def cmd_partition(args) -> int:
    t0 = time.time()
    d = args.dim if args.dim else ClusterDistribution.of(args.rho.split(",")).d
    atoms = enumerate_atoms(d)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(atoms_to_json(atoms), indent=2))
    print(f"{len(atoms)} atoms")
    _write_manifest(args, [str(out)], t0)
    return 0


def cmd_simulate(args) -> int:
    t0 = time.time()
    if args.steps < 1:
        print("error: --steps must be >= 1", file=sys.stderr)
        return 1
    rho = _parse_rho(args)
    fmap = build_g_map(rho, rat(args.eps))
    seed = args.seed if args.seed.startswith("random:") else args.seed.split(",")
    try:
        orb = simulate(
            fmap, seed, steps=args.steps, transient=args.transient,
            boundary_tol=args.boundary_tol,
        )
    except EscapedAmbient as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if orb.dropped_boundary > args.steps // 2:
        print(
            f"error: {orb.dropped_boundary} of {args.steps} points were within "
            f"{args.boundary_tol} of a discontinuity",
            file=sys.stderr,
        )
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_orbit_csv(orb, out)
    outputs = [str(out)]
    if not args.no_plot:
        from .plotting import plot_orbit

        fig = out.with_suffix(".png")
        plot_orbit(
            orb.points, orb.labels, orb.d, fig,
            title=f"orbit: rho=({args.rho or 'uniform'}), eps={args.eps}, n={orb.n}",
        )
        outputs.append(str(fig))
    print(f"{orb.n} points retained, {orb.dropped_boundary} near-boundary points dropped")
    _write_manifest(
        args, outputs, t0,
        extra={"rho": [bound_str(w) for w in rho.weights], "eps": bound_str(rat(args.eps)),
               "d": orb.d, "seed_used": list(orb.seed)},
    )
    return 0


def cmd_extract(args) -> int:
    t0 = time.time()
    orbit_path = Path(args.orbit)
    man_path = orbit_path.parent / (orbit_path.name + ".manifest.json")
    if args.rho or args.eps:
        rho = _parse_rho(args)
        eps = rat(args.eps)
    elif man_path.exists():
        man = json.loads(man_path.read_text())
        rho = ClusterDistribution.of(man["rho"])
        eps = rat(man["eps"])
    else:
        print("error: map parameters not given and no orbit manifest found", file=sys.stderr)
        return 1
    pts, labs = read_orbit_csv(orbit_path)
    fmap = build_g_map(rho, eps)
    orb = Orbit(
        points=pts, labels=labs, d=fmap.d, fmap=fmap,
        seed=tuple(pts[0]) if len(pts) else (0.0,) * fmap.d,
        seed_spec="from-csv", steps=len(pts), transient=0,
        dropped_boundary=0, boundary_tol=1e-9,
    )
    syms = named_symmetries(fmap.d)
    if args.symmetries:
        wanted = [s.strip() for s in args.symmetries.split(",") if s.strip()]
        missing = [s for s in wanted if s not in syms]
        if missing:
            print(f"error: unknown symmetries {missing}", file=sys.stderr)
            return 1
        syms = {"id": syms["id"], **{s: syms[s] for s in wanted}}
    else:
        syms = {"id": syms["id"]}
    try:
        rep = cluster(orb, plateau_factor=args.plateau_factor)
        problem, rep = extract_problem(orb, rep, syms, min_hits=args.min_hits)
    except (NoPlateau, AmbiguousTransition, UnassignedImage) as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(problem.to_json(), indent=2))
    report_path = out.with_name(args.report or "report.json")
    report_path.write_text(json.dumps(rep.to_json(), indent=2))
    outputs = [str(out), str(report_path)]
    if not args.no_plot:
        from .plotting import plot_cluster_trace

        fig = out.with_suffix(".png")
        plot_cluster_trace(rep.trace, rep.plateau, fig, title=f"cluster sweep: q={rep.q}")
        outputs.append(str(fig))
    print(f"q={problem.q} localisation=" + json.dumps({str(k): sorted(v) for k, v in problem.localisation.items()}))
    _write_manifest(args, outputs, t0)
    return 0


def cmd_verify(args) -> int:
    t0 = time.time()
    bundle = CatalogBundle.from_json(json.loads(Path(args.candidate_bundle).read_text()))
    problem = bundle.problem
    if args.problem:
        problem = ConditioningProblem.from_json(json.loads(Path(args.problem).read_text()))
    try:
        report = verify(problem, bundle.candidates, bundle.fmap, bundle.symmetries)
    except Exception as exc:  # malformed inputs, incompatible symmetries
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_json(), indent=2))
    _write_manifest(args, [str(out)], t0)
    print("PASS" if report.passed else "FAIL", f"({len(report.failures())} failed conditions)")
    return 0 if report.passed else 2


def _sweep_cell(payload):
    which, params, eps_str = payload
    eps = Fraction(eps_str)
    p = dict(params)
    p["eps"] = eps
    rep = verify_bundle(make_bundle(which, p))
    mm = rep.min_margin()
    return eps_str, rep.passed, float(mm) if mm is not None else float("nan")


def cmd_threshold(args) -> int:
    t0 = time.time()
    params = json.loads(args.params) if args.params else {}
    lo, hi, tol = rat(args.lo), rat(args.hi), rat(args.tol)
    pred = threshold_family(args.family, params)
    try:
        blo, bhi = bisect_threshold(pred, lo, hi, tol)
    except (NotBracketing, NonMonotone) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"threshold in [{blo}, {bhi}]  (~{float((blo + bhi) / 2):.7f})")

    grid = [lo + (hi - lo) * Fraction(i, args.grid - 1) for i in range(args.grid)]
    payloads = [(args.family, params, str(e)) for e in grid]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(p) for p in payloads]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    outputs = [str(out)]
    if args.format == "json":
        out.write_text(json.dumps(
            {"bracket": [str(blo), str(bhi)],
             "sweep": [{"eps": e, "passed": p, "min_margin": m} for e, p, m in rows]},
            indent=2))
    else:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "passed", "min_margin"])
            for e, p, m in rows:
                w.writerow([e, int(p), repr(m)])
    if not args.no_plot:
        from .plotting import plot_threshold_sweep

        fig = out.with_suffix(".png")
        plot_threshold_sweep(
            [(float(Fraction(e)), m, p) for e, p, m in rows], (blo, bhi), fig,
            title=f"family {args.family}: threshold in [{float(blo):.7f}, {float(bhi):.7f}]",
        )
        outputs.append(str(fig))
    _write_manifest(args, outputs, t0, extra={"bracket": [str(blo), str(bhi)]})
    return 0


def cmd_catalog(args) -> int:
    t0 = time.time()
    params = json.loads(args.params)
    try:
        bundle = make_bundle(args.which, params)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(bundle.to_json(), indent=2))
    print(f"wrote {args.which} bundle: q={bundle.problem.q}, e={bundle.alpha.e}, d={bundle.alpha.d}")
    _write_manifest(args, [str(out)], t0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iup", description=__doc__)
    ap.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    ap.add_argument("--manifest-dir", default=None, help="where to write manifests")
    ap.add_argument("--format", choices=("json", "csv"), default="csv")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("partition", help="enumerate the symbolic partition")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--rho", default=None, help="comma-separated weights (fixes the dimension)")
    p.add_argument("--out", default="atoms.json")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("simulate", help="iterate an orbit in double precision")
    p.add_argument("--rho", default=None)
    p.add_argument("--dim", type=int, default=None, help="uniform weights in this dimension")
    p.add_argument("--eps", required=True)
    p.add_argument("--seed", default="random:0", help='"random:<u64>" or comma coordinates')
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--transient", type=int, default=1000)
    p.add_argument("--boundary-tol", type=float, default=1e-9)
    p.add_argument("--out", default="orbit.csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="extract a conditioning problem from an orbit")
    p.add_argument("--orbit", required=True)
    p.add_argument("--rho", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--eps", default=None)
    p.add_argument("--symmetries", default=None, help="comma-separated names, e.g. sigma_321")
    p.add_argument("--plateau-factor", type=float, default=10.0)
    p.add_argument("--min-hits", type=int, default=5)
    p.add_argument("--out", default="problem.json")
    p.add_argument("--report", default="report.json")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="verify candidates against a conditioning problem")
    p.add_argument("--candidate-bundle", required=True)
    p.add_argument("--problem", default=None, help="overrides the bundle's problem")
    p.add_argument("--report", default="report.json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("threshold", help="bisect the existence threshold of a family")
    p.add_argument("--family", choices=("ma", "m1m2", "p4"), required=True)
    p.add_argument("--params", default=None, help='JSON, e.g. {"varrho": "1/3", "a": "2"}')
    p.add_argument("--lo", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--tol", default="1/1000000")
    p.add_argument("--grid", type=int, default=13, help="sweep points for the report")
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("catalog", help="emit a candidate bundle")
    p.add_argument("--which", choices=("ma", "m1m2", "p4", "cont2"), required=True)
    p.add_argument("--params", required=True, help="JSON parameters")
    p.add_argument("--out", default="bundle.json")
    p.set_defaults(func=cmd_catalog)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, KeyError, OSError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
