"""Command-line entry point.

    powercal calibrate --model poisson --prior gamma:shape=3,rate=1 --data x.csv
    powercal posterior --model normal:variance=1 --prior normal:mean=0,precision=0.01 \\
        --data x.csv --w 0.8 --output post.csv
    powercal reproduce fig1 --seed 1 --out results/

Machine-readable output goes to stdout or the named files; log messages go
to stderr.  Exit codes: 0 success, 2 bad input/output or usage, 3 a prior
moment the calibration needs does not exist, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io
from .errors import (
    CalibrationDomainError,
    DegenerateDataError,
    DomainError,
    MomentError,
    NumericalError,
    UnsupportedPairError,
)
from .experiments import SCENARIOS, run_fig1, run_fig2
from .fisher import fisher_w_hat
from .kl import KlMatchProblem, kl_match_w
from .numerics import DEFAULT_ROOT_TOL
from .posterior import power_posterior_grid

log = logging.getLogger("powercal")

SEED_ENV = "POWERCAL_SEED"

EXIT_OK, EXIT_IO, EXIT_MOMENT, EXIT_NUMERIC = 0, 2, 3, 4


def calibrate(config: io.RunConfig):
    model = io.parse_model(config.model)
    prior = io.parse_prior(config.prior)
    if config.data is None:
        raise io.ConfigError("--data is required")
    data = io.read_data(config.data)
    if config.method == "fisher":
        return fisher_w_hat(model, prior, data), data
    tol = config.tolerances.get("root_tol", DEFAULT_ROOT_TOL)
    return kl_match_w(KlMatchProblem(model, prior, data, tol=tol)), data


def cmd_calibrate(config: io.RunConfig) -> str:
    result, data = calibrate(config)
    out = result.to_dict()
    out["n"] = data.n
    text = io.dumps(out)
    _emit(text, config.output)
    return text


def cmd_posterior(config: io.RunConfig) -> str:
    model = io.parse_model(config.model)
    prior = io.parse_prior(config.prior)
    if config.w is None:
        result, data = calibrate(config)
        w, method = result.w_hat, result.method
    else:
        if config.data is None:
            raise io.ConfigError("--data is required")
        data = io.read_data(config.data)
        w, method = float(config.w), "fixed"
    grid = power_posterior_grid(model, prior, data, w, points=config.points)
    text = io.csv_text(
        ["theta", "density"], zip(grid.theta, grid.density),
        comments=[f"w={io.format_float(w)} method={method}"],
    )
    _emit(text, config.output)
    return text


def cmd_reproduce(config: io.RunConfig) -> list[Path]:
    out = Path(config.output or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise io.DataFileError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if config.figure == "fig1":
        report = run_fig1(config.seed)
        rows = [(r["n"], r["w_hat"]) for r in report.records]
        written.append(_write(out / "fig1.csv", io.csv_text(["n", "w_hat"], rows)))
        written.append(_write(out / "fig1.json", report.to_json()))
    elif config.figure == "fig2":
        scenarios = [config.scenario] if config.scenario else list(SCENARIOS)
        for sc in scenarios:
            report = run_fig2(config.seed, sc, points=config.points)
            g = report.grids
            rows = zip(g["fisher"].theta, g["fisher"].density, g["kl"].density, g["correct"].density)
            header = ["theta", "fisher_posterior", "kl_posterior", "correct_posterior"]
            written.append(_write(out / f"fig2_{sc}.csv", io.csv_text(header, rows)))
            written.append(_write(out / f"fig2_{sc}.json", report.to_json()))
    else:
        raise io.ConfigError(f"unknown figure {config.figure!r}; expected fig1 or fig2")
    for p in written:
        log.info("wrote %s", p)
    return written


def _write(path: Path, text: str) -> Path:
    io.write_text(path, text)
    return path


def _emit(text: str, output: str | None) -> None:
    if output:
        io.write_text(output, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="powercal", description="Calibrate the power of a power likelihood.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--config", help="JSON run configuration (replaces the other options)")
    sub = p.add_subparsers(dest="command")

    def common(sp, method=True):
        sp.add_argument("--model", default="poisson")
        sp.add_argument("--prior", default="gamma:shape=3,rate=1")
        if method:
            sp.add_argument("--method", choices=["fisher", "kl"], default="fisher")
        sp.add_argument("--data")
        sp.add_argument("--output", "-o")
        sp.add_argument("--root-tol", type=float, help="root-finding tolerance (KL method)")

    common(sub.add_parser("calibrate", help="estimate w from data; prints a JSON object"))
    post = sub.add_parser("posterior", help="tabulate the power posterior as CSV")
    common(post)
    post.add_argument("--w", type=float, help="fixed power; calibrated with --method if omitted")
    post.add_argument("--points", type=int, default=2001)

    rep = sub.add_parser("reproduce", help="write the figure data as CSV")
    rep.add_argument("figure", choices=["fig1", "fig2"])
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--scenario", choices=sorted(SCENARIOS))
    rep.add_argument("--out", dest="output", default=".")
    rep.add_argument("--points", type=int, default=2001)
    return p


def config_from_args(args) -> io.RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise io.DataFileError(f"cannot read config {args.config}: {exc}") from exc
        return io.RunConfig.from_json(text)
    d = {k: v for k, v in vars(args).items() if k not in ("verbose", "config", "root_tol")}
    if getattr(args, "root_tol", None) is not None:
        d["tolerances"] = {"root_tol": args.root_tol}
    if d.get("seed", 0) is None:
        d["seed"] = int(os.environ.get(SEED_ENV, "0"))
    d = {k: v for k, v in d.items() if v is not None}
    return io.RunConfig.from_dict(d)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None and not args.config:
        parser.print_usage(sys.stderr)
        return EXIT_IO
    try:
        config = config_from_args(args)
        if config.command == "calibrate":
            cmd_calibrate(config)
        elif config.command == "posterior":
            cmd_posterior(config)
        else:
            cmd_reproduce(config)
    except MomentError as exc:
        print(f"powercal: moment error: {exc}", file=sys.stderr)
        return EXIT_MOMENT
    except (NumericalError, DegenerateDataError, CalibrationDomainError) as exc:
        print(f"powercal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (io.DataFileError, io.ConfigError, DomainError, UnsupportedPairError) as exc:
        print(f"powercal: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
