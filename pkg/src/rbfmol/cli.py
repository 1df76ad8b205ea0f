"""Command-line entry point.

Subcommands::

    points    sample and write the Z and X clouds only
    spectrum  assemble one cell and write its eigenvalues
    solve     assemble one cell and integrate it (spectrum too unless --spectrum-only)
    table     run a grid scenario and write table.csv
    plot      render SVGs from an existing output directory
    all       run the scenario's default pipeline, then plot

Exit codes: 0 success, 2 partial (NaN cells or aborted runs), 1 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (
    SCENARIOS,
    ConfigError,
    ScenarioConfig,
    load_config,
    make_config,
    run_scenario,
    run_table,
    sample_point_sets,
)
from .plots import emit_plots, find_run_dirs

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("rbfmol")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file (flags override it)")
    common.add_argument("--scenario", default=None, help=f"one of {', '.join(sorted(SCENARIOS))}")
    common.add_argument("--m", type=int)
    common.add_argument("--nz", type=int, dest="n_Z")
    common.add_argument("--nx", type=int, dest="n_X")
    common.add_argument("--ratio", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--rtol", type=float)
    common.add_argument("--atol", type=float)
    common.add_argument("--fixed-dt", type=float, dest="fixed_dt")
    common.add_argument("--out", type=str)
    common.add_argument("--spectrum-only", action="store_true")
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rbfmol", description="Kernel collocation method of lines on surfaces.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("points", "sample point sets only"),
                       ("spectrum", "eigenvalues of one cell"),
                       ("solve", "integrate one cell"),
                       ("table", "run a grid scenario"),
                       ("plot", "render SVGs from written outputs"),
                       ("all", "default pipeline of a scenario (or of every scenario)")):
        sub.add_parser(name, parents=[common], help=text)
    return p


def _config(args) -> ScenarioConfig:
    overrides = {k: getattr(args, k) for k in
                 ("m", "n_Z", "n_X", "ratio", "seed", "rtol", "atol", "fixed_dt", "out", "jobs")}
    if args.spectrum_only:
        overrides["mode"] = "spectrum-only"
    if args.config is not None:
        if args.scenario is not None:
            overrides["scenario"] = args.scenario
        cfg = load_config(args.config, **overrides)
    else:
        cfg = make_config(args.scenario or "custom", **overrides)
    return cfg.validate()


def _report_ok(rep) -> bool:
    return rep.ok


def _cmd_points(cfg):
    _, Z, X = sample_point_sets(cfg)
    out = Path(cfg.out) / cfg.scenario
    out.mkdir(parents=True, exist_ok=True)
    Z.to_csv(out / "Z.csv")
    X.to_csv(out / "X.csv")
    print(f"wrote {len(Z)} centers and {len(X)} collocation points to {out}")
    return EXIT_OK


def _cmd_single(cfg):
    cfg.grid = False
    rep = run_scenario(cfg)
    spec = rep.spectrum
    print(f"{cfg.scenario}: m={cfg.m} n_Z={cfg.n_Z} n_X={cfg.resolved_n_X} kappa={rep.kappa:.3e} rank={rep.rank}")
    if spec:
        print(f"  spectrum: stable={spec['stable']} max_re={spec['max_real_part']:.3e} "
              f"radius={spec['spectral_radius']:.3e} zeros={spec['zero_count']}")
    if rep.status != "not-run":
        print(f"  solve: {rep.status} steps={rep.accepted_steps} rejected={rep.rejected_steps} "
              f"final_err={rep.final_error:.3e}")
    for k, v in rep.failures.items():
        print(f"  failure[{k}]: {v}")
    return EXIT_OK if _report_ok(rep) else EXIT_PARTIAL


def _cmd_table(cfg):
    if not cfg.grid:
        raise ConfigError(f"scenario {cfg.scenario!r} is not a grid scenario")
    rows, _, complete = run_table(cfg)
    out = Path(cfg.out) / cfg.scenario / "table.csv"
    print(out.read_text(), end="")
    return EXIT_OK if complete else EXIT_PARTIAL


def _cmd_plot(cfg):
    root = Path(cfg.out) / cfg.scenario
    dirs = find_run_dirs(root)
    paths = emit_plots(dirs, root)
    print("\n".join(str(p) for p in paths))
    return EXIT_OK


def _cmd_all(cfg, explicit: bool):
    names = [cfg.scenario] if explicit else sorted(SCENARIOS)
    code = EXIT_OK
    for name in names:
        c = cfg if explicit else make_config(name, out=cfg.out, jobs=cfg.jobs).validate()
        rc = _cmd_table(c) if c.grid else _cmd_single(c)
        _cmd_plot(c)
        code = max(code, rc)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "points":
            return _cmd_points(cfg)
        if args.command == "spectrum":
            cfg.mode = "spectrum-only"
            return _cmd_single(cfg)
        if args.command == "solve":
            # a spectrum-only preset still integrates when asked to solve
            if cfg.mode == "spectrum-only" and not args.spectrum_only:
                cfg.mode = "both"
            return _cmd_single(cfg)
        if args.command == "table":
            return _cmd_table(cfg)
        if args.command == "plot":
            return _cmd_plot(cfg)
        return _cmd_all(cfg, explicit=args.scenario is not None or args.config is not None)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
