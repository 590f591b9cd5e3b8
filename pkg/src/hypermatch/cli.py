"""Command-line driver: ``hypermatch <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 node budget exhausted,
4 inconclusive rigidity verdict.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io as hio
from . import plotting
from .config import ConfigError, ExperimentConfig, config_from_text, load_config, load_preset, \
    parse_seeds, preset_names
from .experiments import (eccdf_experiment, lattice_seed, lowest_decade, make_sample,
                          number_variance_experiment, scattering_experiment)
from .flower import PHI, PSI, FlowerBudgetExceeded, flower_by_chains, matching_flower
from .geometry import Box
from .matching import find_unstable_pairs, stable_match
from .queue import one_sided_match, queue_identity_residuals
from .rigidity import Ball, rigidity_recover
from .samplers import LatticeSpec, SpectralModel, make_lattice, make_rng
from .stats import (eccdf_from_distances, fit_exponential_tail, number_variance,
                    pair_correlation, pool_pair_correlation, pool_scattering, pool_variance,
                    scattering_intensity)

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INCONCLUSIVE = 0, 2, 3, 4
AUDIT_LIMIT = 20000


class _Run:
    """Output directory, JSON summary and timing for one invocation."""

    def __init__(self, cfg: ExperimentConfig, command: str, svg: bool):
        self.cfg, self.command, self.svg = cfg, command, svg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.summary = {"command": command, "config": cfg.as_dict(), "results": {}}
        self.t0 = time.perf_counter()

    def meta(self, **extra) -> dict:
        # the output directory is left out so artifacts do not depend on where they land
        config = {k: v for k, v in self.cfg.as_dict().items() if k != "out"}
        return {"command": self.command, "config": _jsonable(config), **extra}

    def write(self, name: str, text: str) -> Path:
        return hio.write_text(self.out / name, text)

    def finish(self) -> None:
        if not self.cfg.deterministic:
            self.summary["elapsed_s"] = round(time.perf_counter() - self.t0, 3)
        self.write("summary.json", json.dumps(_jsonable(self.summary), indent=2,
                                               sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _model(cfg: ExperimentConfig) -> SpectralModel:
    return SpectralModel(cfg.alpha, cfg.shape, cfg.scale_fraction, cfg.truncation)


def _box(cfg: ExperimentConfig) -> Box:
    return Box(cfg.d, float(cfg.L))


def _instance(cfg: ExperimentConfig, seed: int):
    box = _box(cfg)
    phi = make_lattice(LatticeSpec(box, cfg.shift_mode, seed=lattice_seed(seed)))
    if cfg.process == "file":
        psi = hio.read_pointset(cfg.input)
        if psi.box != box:
            raise ConfigError(f"input point set lives in {psi.box}, config asks for {box}")
    else:
        psi = make_sample(box, cfg.process, cfg.alpha, seed, _model(cfg))
    return phi, psi


# ---------------------------------------------------------------- subcommands

def cmd_sample(cfg, args, run: _Run) -> int:
    for s in cfg.seeds:
        if args.lattice:
            ps = make_lattice(LatticeSpec(_box(cfg), cfg.shift_mode, seed=lattice_seed(s)))
        else:
            ps = make_sample(_box(cfg), cfg.process, cfg.alpha, s, _model(cfg))
        name = f"{'lattice' if args.lattice else 'sample'}_s{s}.csv"
        run.write(name, hio.pointset_to_csv(ps, run.meta(run_seed=s)))
        run.summary["results"][str(s)] = {"file": name, "n_points": len(ps)}
    return EXIT_OK


def cmd_match(cfg, args, run: _Run) -> int:
    for s in cfg.seeds:
        phi, psi = _instance(cfg, s)
        m = stable_match(phi, psi)
        res = {"n_phi": len(phi), "n_psi": len(psi), "n_matched": m.n_matched,
               "rounds": m.n_rounds, "complete": m.n_matched == min(len(phi), len(psi)),
               "max_distance": float(m.distances.max()) if m.n_matched else 0.0}
        if len(phi) * len(psi) <= AUDIT_LIMIT ** 2 and not args.no_audit:
            res["unstable_pairs"] = int(len(find_unstable_pairs(m)))
        run.write(f"phi_s{s}.csv", hio.pointset_to_csv(phi, run.meta(run_seed=s)))
        run.write(f"psi_s{s}.csv", hio.pointset_to_csv(psi, run.meta(run_seed=s)))
        run.write(f"matching_s{s}.csv", hio.matching_to_csv(m, run.meta(run_seed=s)))
        run.summary["results"][str(s)] = res
    return EXIT_OK


def cmd_queue(cfg, args, run: _Run) -> int:
    if cfg.d != 1:
        raise ConfigError("queue runs on the line; set d = 1")
    for s in cfg.seeds:
        phi, psi = _instance(cfg, s)
        m, trace = one_sided_match(phi, psi, periodic=args.periodic)
        res = queue_identity_residuals(phi, trace, int(cfg.L) // 2)
        run.write(f"queue_s{s}.csv", hio.queue_trace_to_csv(trace, run.meta(run_seed=s)))
        run.write(f"matching_s{s}.csv", hio.matching_to_csv(m, run.meta(run_seed=s)))
        run.summary["results"][str(s)] = {
            "n_matched": m.n_matched, "max_queue": int(trace.L.max()),
            "identity_max_residual": int(np.abs(res).max()) if len(res) else 0}
    return EXIT_OK


def cmd_flower(cfg, args, run: _Run) -> int:
    side = PHI if args.side == "phi" else PSI
    for s in cfg.seeds:
        phi, psi = _instance(cfg, s)
        m = stable_match(phi, psi)
        n = len(phi) if side == PHI else len(psi)
        if not 0 <= args.anchor < n:
            raise ConfigError(f"anchor index {args.anchor} out of range (0..{n - 1})")
        f = matching_flower(m, (side, args.anchor), cfg.budget)
        res = {"balls": len(f.radii), "bounding_radius": f.bounding_radius,
               "whole_domain": f.whole_domain}
        if args.chains:
            res["chains_agree"] = bool(f.same_balls(
                flower_by_chains(m, (side, args.anchor), cfg.budget)))
        run.write(f"flower_s{s}.csv", hio.flower_to_csv(f, run.meta(run_seed=s)))
        run.summary["results"][str(s)] = res
    return EXIT_OK


def cmd_rigidity(cfg, args, run: _Run) -> int:
    records = []
    for s in cfg.seeds:
        phi, psi = _instance(cfg, s)
        m = stable_match(phi, psi)
        center = (np.array(args.center, float) if args.center is not None
                  else make_rng(10 ** 9 + 7 * int(s)).random(cfg.d) * cfg.L)
        if len(center) != cfg.d:
            raise ConfigError(f"--center needs {cfg.d} coordinates")
        records.append(rigidity_recover(m, Ball(tuple(center), cfg.ball_radius)))
    run.write("rigidity.csv", hio.rigidity_to_csv(records, cfg.seeds,
                                                  run.meta(radius=cfg.ball_radius)))
    n_inconclusive = sum(r.inconclusive for r in records)
    n_exact = sum(r.exact for r in records)
    run.summary["results"] = {"trials": len(cfg.seeds), "exact": n_exact,
                              "inconclusive": n_inconclusive}
    return EXIT_INCONCLUSIVE if n_inconclusive else EXIT_OK


def cmd_stats(cfg, args, run: _Run) -> int:
    if not args.input:
        raise ConfigError("stats needs --input files")
    est = args.estimator
    if est == "eccdf":
        dist = [hio.matching_distances_from_csv(Path(p).read_text()) for p in args.input]
        table = eccdf_from_distances(np.concatenate(dist))
        d = cfg.d
        fit = fit_exponential_tail(table, d)
        run.write("eccdf.csv", hio.eccdf_to_csv(table, run.meta(inputs=args.input)))
        run.summary["results"] = {"n": table.n, "tail_slope": fit[0], "r_squared": fit[2]}
        if run.svg:
            plotting.plot_eccdf(table, run.out / "eccdf.svg", d, fit)
        return EXIT_OK
    points = [hio.read_pointset(p) for p in args.input]
    if est == "scattering":
        tables = [scattering_intensity(p, cfg.k_max, per_decade=cfg.per_decade,
                                       max_per_bin=cfg.max_per_bin) for p in points]
        curve = pool_scattering(tables, cfg.per_decade)
        for p, t in zip(args.input, tables):
            run.write(f"sk_{Path(p).stem}.csv", hio.sk_to_csv(t, run.meta(input=p)))
        run.write("sk_binned.csv", hio.binned_to_csv(curve, run.meta(inputs=args.input)))
        run.summary["results"] = {"bins": len(curve.center)}
        if run.svg:
            plotting.plot_loglog(curve.x_mean, curve.mean, run.out / "sk.svg", "k", "S(k)",
                                 curve.se)
    elif est == "numvar":
        rng = make_rng(10 ** 9 + int(cfg.seeds[0]))
        tables = [number_variance(p, cfg.radii, cfg.n_windows, rng) for p in points]
        table = pool_variance(tables) if len(tables) > 1 else tables[0]
        run.write("numvar.csv", hio.variance_to_csv(table, run.meta(inputs=args.input)))
        run.summary["results"] = {"variance_over_mean": (table.variance / table.mean).tolist()}
        if run.svg:
            plotting.plot_loglog(table.radii, table.variance, run.out / "numvar.svg", "R",
                                 "number variance", table.se)
    elif est == "paircorr":
        tables = [pair_correlation(p, cfg.dr, cfg.r_max) for p in points]
        table = pool_pair_correlation(tables) if len(tables) > 1 else tables[0]
        run.write("paircorr.csv", hio.gr_to_csv(table, run.meta(inputs=args.input)))
        run.summary["results"] = {"max_abs_truncated": float(np.max(np.abs(table.truncated)))}
        if run.svg:
            plotting.plot_lines(table.centers, table.g, run.out / "paircorr.svg", "r", "g(r)",
                                table.se)
    return EXIT_OK


def cmd_repro(cfg, args, run: _Run) -> int:
    fig = args.figure
    res = run.summary["results"]
    if fig == "fig4-3d":
        r = eccdf_experiment(cfg.d, cfg.L, cfg.alpha, cfg.seeds, cfg.process)
        run.write("eccdf.csv", hio.eccdf_to_csv(r.table, run.meta(seeds=cfg.seeds)))
        res.update(tail_slope=r.slope, intercept=r.intercept, r_squared=r.r_squared,
                   n_fit=r.n_fit, n=r.table.n)
        if run.svg:
            plotting.plot_eccdf(r.table, run.out / "eccdf.svg", cfg.d, (r.slope, r.intercept))
    elif fig in ("fig5-1d", "fig5-2d"):
        r = scattering_experiment(cfg.d, cfg.L, cfg.alpha, cfg.seeds, cfg.k_max,
                                  cfg.max_per_bin, cfg.per_decade, cfg.process)
        run.write("sk_binned.csv", hio.binned_to_csv(r.curve, run.meta(seeds=cfg.seeds)))
        low = lowest_decade(r.curve, r.k_min)
        res.update(exponent=r.exponent, prefactor=r.prefactor, r_squared=r.r_squared,
                   smallest_bin_mean=float(r.curve.mean[0]) if len(r.curve.mean) else None,
                   bins_in_fit=int(low.sum()))
        if run.svg:
            plotting.plot_loglog(r.curve.x_mean, r.curve.mean, run.out / "sk.svg", "k", "S(k)",
                                 r.curve.se, (r.exponent, r.prefactor)
                                 if math.isfinite(r.exponent) else None)
    elif fig == "fig7":
        r = number_variance_experiment(cfg.d, cfg.L, cfg.alpha, cfg.seeds, cfg.radii,
                                       cfg.n_windows, process=cfg.process)
        run.write("numvar.csv", hio.variance_to_csv(r.table, run.meta(seeds=cfg.seeds)))
        res.update({f"slope_{lo:g}_{hi:g}": v[0] for (lo, hi), v in r.fits.items()})
        if run.svg:
            plotting.plot_loglog(r.table.radii, r.table.variance, run.out / "numvar.svg", "R",
                                 "number variance", r.table.se)
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "match": cmd_match, "queue": cmd_queue, "flower": cmd_flower,
            "rigidity": cmd_rigidity, "stats": cmd_stats, "repro": cmd_repro}


# ---------------------------------------------------------------- argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="key-value configuration file ([experiment] section)")
    g.add_argument("--d", type=int)
    g.add_argument("--L", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--process", choices=("poisson", "dpp", "file"))
    g.add_argument("--shift-mode", dest="shift_mode",
                   choices=("deterministic", "fixed", "stationarized"))
    g.add_argument("--seed", type=int, help="single run seed")
    g.add_argument("--seeds", help="seed list such as 0-9 or 1,4,7")
    g.add_argument("--out", help="output directory")
    g.add_argument("--deterministic", dest="deterministic", action="store_true", default=None,
                   help="byte-identical artifacts (no timings in the summary)")
    g.add_argument("--no-deterministic", dest="deterministic", action="store_false")
    g.add_argument("--budget", type=int, help="node budget for flower and chain searches")
    g.add_argument("--svg", action="store_true", help="also write SVG plots")
    e = p.add_argument_group("estimator parameters")
    e.add_argument("--k-max", dest="k_max", type=float, help="largest wavenumber")
    e.add_argument("--max-per-bin", dest="max_per_bin", type=int,
                   help="cap on wave vectors per logarithmic bin")
    e.add_argument("--radii", help="comma separated window radii")
    e.add_argument("--n-windows", dest="n_windows", type=int)
    e.add_argument("--dr", type=float, help="shell width of the pair correlation")
    e.add_argument("--r-max", dest="r_max", type=float)
    e.add_argument("--radius", type=float, help="rigidity ball radius")
    e.add_argument("--sample-file", dest="input_file",
                   help="point-set CSV used as the sample when --process file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypermatch",
                                     description="Stable lattice matchings and their statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write seeded point sets")
    _common(p)
    p.add_argument("--lattice", action="store_true", help="write the shifted lattice instead")

    p = sub.add_parser("match", help="stable matching with a stability audit")
    _common(p)
    p.add_argument("--no-audit", action="store_true", help="skip the exhaustive stability check")

    p = sub.add_parser("queue", help="one-sided matching on the line")
    _common(p)
    p.add_argument("--periodic", action="store_true")

    p = sub.add_parser("flower", help="matching flower of one point")
    _common(p)
    p.add_argument("--anchor", type=int, default=0, help="index of the anchor point")
    p.add_argument("--side", choices=("phi", "psi"), default="phi")
    p.add_argument("--chains", action="store_true",
                   help="cross-check against explicit chain enumeration")

    p = sub.add_parser("rigidity", help="recover ball counts from the outside")
    _common(p)
    p.add_argument("--center", type=lambda s: [float(v) for v in s.split(",")],
                   help="ball centre (default: random per seed)")

    p = sub.add_parser("stats", help="estimators on stored point sets or matchings")
    p.add_argument("estimator", choices=("eccdf", "scattering", "numvar", "paircorr"))
    _common(p)
    p.add_argument("--input", nargs="+", help="point-set CSVs (matching CSVs for eccdf)")

    p = sub.add_parser("repro", help="canned figure runs")
    p.add_argument("figure", choices=preset_names())
    p.add_argument("--scale", choices=("desk", "smoke"), default="desk")
    _common(p)
    return parser


def _overrides(args) -> dict:
    o = {k: getattr(args, k, None) for k in
         ("d", "L", "alpha", "process", "shift_mode", "out", "deterministic", "budget",
          "k_max", "n_windows", "dr", "r_max", "max_per_bin")}
    if getattr(args, "radius", None) is not None:
        o["ball_radius"] = args.radius
    if getattr(args, "input_file", None) is not None:
        o["input"] = args.input_file
    if getattr(args, "radii", None):
        o["radii"] = [float(v) for v in args.radii.split(",")]
    if args.seeds is not None:
        o["seeds"] = parse_seeds(args.seeds)
    elif args.seed is not None:
        o["seeds"] = [args.seed]
    return o


def resolve_config(args) -> ExperimentConfig:
    overrides = _overrides(args)
    if args.command == "repro":
        if overrides.get("out") is None:
            overrides["out"] = str(Path("out") / f"{args.figure}-{args.scale}")
        return load_preset(args.figure, args.scale, overrides)
    if args.config:
        return load_config(args.config, overrides)
    return config_from_text("[experiment]\n", "<flags>", overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = _Run(cfg, args.command, args.svg)
        code = COMMANDS[args.command](cfg, args, run)
        run.summary["exit_code"] = code
        run.finish()
        return code
    except ConfigError as exc:
        print(f"hypermatch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowerBudgetExceeded as exc:
        print(f"hypermatch: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, FileNotFoundError) as exc:
        print(f"hypermatch: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
