"""Command-line entry point: ``vtolnav run|selftest|sweep``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .harness.config import ConfigError, ScenarioConfig, load_config
from .harness.runner import (
    SimulationDiverged,
    SingularGuidance,
    run_scenario,
    write_csv,
    write_plot_data,
    write_summary,
)

OUTPUT_ENV = "VTOLNAV_OUTPUT_DIR"
DEFAULT_OUTPUT = "vtolnav_out"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def output_dir(cli_value: str | None, cfg: ScenarioConfig) -> Path:
    """CLI flag, then the environment variable, then the config, then a default."""
    for candidate in (cli_value, os.environ.get(OUTPUT_ENV), cfg.output):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUTPUT)


def resolve_param(cfg: ScenarioConfig, name: str) -> str:
    """Map a bare field name such as ``k_o1`` onto its dotted path."""
    if "." in name:
        return name
    data = cfg.model_dump()
    if name in data:
        return name
    hits = [f"{sec}.{name}" for sec, val in data.items() if isinstance(val, dict) and name in val]
    if len(hits) != 1:
        raise ConfigError([(name, "unknown field" if not hits else f"ambiguous, use one of {hits}")])
    return hits[0]


def _run_one(cfg: ScenarioConfig, out: Path, stem: str, plot_every: int | None, engine: str) -> dict:
    result = run_scenario(cfg, engine=engine)
    write_csv(result, out / f"{stem}.csv")
    write_summary(result.summary, out / f"{stem}_summary.yaml")
    if plot_every:
        write_plot_data(result, out / f"{stem}_plot.csv", plot_every)
    return result.summary


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.backend:
        cfg = cfg.with_updates({"backend": args.backend})
    out = output_dir(args.out, cfg)
    stem = Path(args.config).stem
    plot_every = args.plot_every if args.plot_data else None
    summary = _run_one(cfg, out, stem, plot_every, args.engine)
    term = summary["terminal_errors"]
    print(f"wrote {out / (stem + '.csv')} ({summary['rows']} rows, {summary['wall_time_s']:.2f} s)")
    for key, val in term.items():
        print(f"  {key:12s} {val:.4e}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failed = 0
    for r in run_selftest(args.seed):
        tag = "PASS" if r.ok else ("INFO" if r.informational else "FAIL")
        print(f"[{tag}] {r.name}: {r.detail}")
        if not r.ok and not r.informational:
            failed += 1
    print(f"{failed} failing check(s)")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def _sweep_task(task):
    cfg, out, stem, engine = task
    try:
        return stem, _run_one(cfg, out, stem, None, engine), None
    except (SimulationDiverged, SingularGuidance) as exc:
        return stem, None, str(exc)


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    out = output_dir(args.out, base)
    tasks = []
    for spec in args.param:
        name, _, values = spec.partition("=")
        if not values:
            raise ConfigError([(spec, "expected NAME=v1,v2,...")])
        path = resolve_param(base, name.strip())
        for raw in values.split(","):
            value = float(raw)
            cfg = base.with_updates({path: value})
            stem = f"{Path(args.config).stem}_{path.replace('.', '-')}_{raw.strip()}"
            tasks.append((cfg, out, stem, args.engine))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    code = EXIT_OK
    for stem, summary, err in results:
        if err is not None:
            print(f"{stem}: ABORTED {err}")
            code = EXIT_DIVERGED
            continue
        term = summary["terminal_errors"]
        print(
            f"{stem}: R_o {term['err_R_o']:.3e}  b {term['err_b']:.3e}  "
            f"P_c {term['err_P_c']:.3e}  R_c {term['err_R_c']:.3e}"
        )
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vtolnav", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write CSV + summary")
    run.add_argument("config")
    run.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    run.add_argument("--backend", choices=["rotation", "quaternion"])
    run.add_argument("--engine", choices=["auto", "compiled", "reference"], default="auto")
    run.add_argument("--plot-data", action="store_true", help="also write downsampled plot series")
    run.add_argument("--plot-every", type=int, default=100, metavar="N")
    run.set_defaults(func=_cmd_run)

    st = sub.add_parser("selftest", help="run the identity and oracle checks")
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(func=_cmd_selftest)

    sw = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    sw.add_argument("config")
    sw.add_argument("--param", action="append", required=True, metavar="NAME=v1,v2,...")
    sw.add_argument("--out")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--engine", choices=["auto", "compiled", "reference"], default="auto")
    sw.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationDiverged, SingularGuidance) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
