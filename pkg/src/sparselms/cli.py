"""
Command line entry point.

    sparselms run  --config exp.cfg [--seed N] [--out DIR] [--jobs J]
    sparselms plot --csv DIR/msd.csv --out msd.gp [--boundaries 8000,16000]
    sparselms demo [--seed N]

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 an algorithm
diverged in every trial.
"""
import argparse
import csv
import dataclasses
import math
import os
import sys

from .config import DEFAULT_CONFIG, load_config, render_config
from .exceptions import ConfigError
from .experiment import estimate_lambda_max, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_DIVERGED = 3

DISPLAY_NAMES = {"lms": "LMS", "llms": "LLMS", "lp_lms": "lp-LMS", "lp_llms": "lp-LLMS"}


class CsvFormatError(ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def _fmt(value):
    return "nan" if math.isnan(value) else format(value, ".17g")


def write_curve_csv(curve, path):
    """Write ``iteration,msd_<name>...`` rows; iterations are 1-based."""
    names = list(curve.names)
    columns = [curve.values[name] for name in names]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["iteration"] + [f"msd_{name}" for name in names]) + "\n")
        for k, row in enumerate(zip(*columns), start=1):
            fh.write(",".join([str(k)] + [_fmt(v) for v in row]) + "\n")


def read_curve_csv(path):
    """Parse a curve CSV into ``(iterations, {name: values})``.

    Raises
    ------
    CsvFormatError
        With the 1-based file row of the first malformed line.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file", 1)
    header = rows[0]
    if len(header) < 2 or header[0] != "iteration":
        raise CsvFormatError("header must start with 'iteration' and list at least one curve", 1)
    names = []
    for col in header[1:]:
        if not col.startswith("msd_") or len(col) == 4:
            raise CsvFormatError(f"bad column name {col!r}", 1)
        names.append(col[4:])
    if len(rows) < 2:
        raise CsvFormatError("no data rows", 2)
    iterations = []
    values = {name: [] for name in names}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            iterations.append(int(row[0]))
            for name, cell in zip(names, row[1:]):
                values[name].append(float(cell))
        except ValueError as exc:
            raise CsvFormatError(str(exc), lineno) from None
    return iterations, values


def _diagnostics(cfg, curve):
    diag = estimate_lambda_max(cfg.ar1, cfg.n_taps)
    lines = [
        "# diagnostics",
        f"lambda_max = {diag.lambda_max!r}",
        f"mu_bound = {diag.mu_bound!r}",
    ]
    for alg in cfg.algorithms:
        lines.append(f"mu_admissible.{alg.name} = {str(diag.admits(alg.params.mu)).lower()}")
    for name in curve.names:
        lines.append(f"trials_used.{name} = {curve.n_trials[name]}")
        lines.append(f"diverged.{name} = {len(curve.diverged[name])}")
        for trial, iteration in curve.diverged[name]:
            lines.append(f"# diverged {name}: trial {trial} at iteration {iteration}")
    return "\n".join(lines) + "\n"


def cmd_run(config_path=None, seed=None, out_dir=".", n_jobs=1, stdout=None):
    stdout = stdout or sys.stdout
    try:
        cfg = load_config(config_path) if config_path else DEFAULT_CONFIG
        if seed is not None:
            if not 0 <= seed < 2**64:
                raise ConfigError(f"seed must lie in [0, 2**64), got {seed}", "seed")
            cfg = dataclasses.replace(cfg, seed=seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    result = run_experiment(cfg, n_jobs=n_jobs)
    curve = result.curve
    try:
        os.makedirs(out_dir, exist_ok=True)
        write_curve_csv(curve, os.path.join(out_dir, "msd.csv"))
        with open(os.path.join(out_dir, "steady_state.txt"), "w", encoding="utf-8") as fh:
            fh.write(result.report.format_table())
        with open(os.path.join(out_dir, "run_meta.txt"), "w", encoding="utf-8") as fh:
            fh.write(render_config(cfg))
            fh.write(_diagnostics(cfg, curve))
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO

    stdout.write(result.report.format_table())
    dead = [name for name in curve.names if not curve.is_valid(name)]
    if dead:
        print(f"every trial diverged for: {', '.join(dead)}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _boundaries_from_meta(csv_path):
    meta = os.path.join(os.path.dirname(os.path.abspath(csv_path)), "run_meta.txt")
    if not os.path.exists(meta):
        return []
    with open(meta, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.partition("=")
            if key.strip() == "phase_lengths":
                spans = [int(v) for v in value.split(",")]
                return [sum(spans[: i + 1]) for i in range(len(spans) - 1)]
    return []


def render_plot_script(csv_path, names, boundaries):
    """gnuplot script drawing MSD in dB with dashed phase-boundary markers."""
    path = os.path.abspath(csv_path).replace("'", "''")
    lines = [
        "# MSD learning curves; render with: gnuplot -p <this file>",
        "# set terminal pngcairo size 900,600; set output 'msd.png'",
        "set datafile separator ','",
        "set title 'MSD learning curves'",
        "set xlabel 'iteration'",
        "set ylabel 'MSD (dB)'",
        "set grid",
        "set key top right",
    ]
    for i, b in enumerate(boundaries, start=1):
        lines.append(f"set arrow {i} from {b}, graph 0 to {b}, graph 1 nohead dashtype 2")
    series = []
    for col, name in enumerate(names, start=2):
        source = f"'{path}'" if col == 2 else "''"
        label = DISPLAY_NAMES.get(name, name)
        series.append(f"{source} using 1:(10*log10(${col})) every ::1 with lines title '{label}'")
    lines.append("plot " + ", \\\n     ".join(series))
    return "\n".join(lines) + "\n"


def cmd_plot(csv_path, out_path, boundaries=None):
    try:
        iterations, values = read_curve_csv(csv_path)
    except CsvFormatError as exc:
        print(f"malformed CSV {csv_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {csv_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    if boundaries is None:
        boundaries = _boundaries_from_meta(csv_path)
    boundaries = [b for b in boundaries if iterations[0] <= b < iterations[-1]]
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(render_plot_script(csv_path, list(values), boundaries))
    except OSError as exc:
        print(f"cannot write {out_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


DEMO_TRIALS = 20


def cmd_demo(seed=0, stdout=None):
    """Reduced 20-trial run of the default experiment; prints per-phase rankings."""
    stdout = stdout or sys.stdout
    cfg = dataclasses.replace(DEFAULT_CONFIG, n_trials=DEMO_TRIALS, seed=seed)
    result = run_experiment(cfg, batch_size=DEMO_TRIALS)
    report = result.report
    print(f"{DEMO_TRIALS} trials, seed {seed}; steady state = mean of last "
          f"{cfg.steady_state_window} iterations per phase", file=stdout)
    for j, spec in enumerate(cfg.phases):
        print(f"\nphase {j + 1} (SR = {spec.n_nonzero}/{cfg.n_taps})", file=stdout)
        for rank, name in enumerate(report.ranking(j), start=1):
            value = report.value(j, name)
            print(f"  {rank}. {DISPLAY_NAMES.get(name, name):<8} {10 * math.log10(value):9.3f} dB",
                  file=stdout)
    dead = [name for name in result.curve.names if not result.curve.is_valid(name)]
    return EXIT_DIVERGED if dead else EXIT_OK


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparselms", description="Sparse system identification with LMS-family filters."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo experiment and write MSD curves")
    run.add_argument("--config", help="flat key = value config file (default: the three-phase reference setup)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", default=".", help="output directory (default: .)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for trial batches")

    plot = sub.add_parser("plot", help="emit a gnuplot script for an msd.csv")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--boundaries", type=_int_list,
                      help="phase boundary iterations (default: read run_meta.txt next to the CSV)")

    demo = sub.add_parser("demo", help="quick 20-trial run printing per-phase rankings")
    demo.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out, args.jobs)
    if args.command == "plot":
        return cmd_plot(args.csv, args.out, args.boundaries)
    return cmd_demo(args.seed)


if __name__ == "__main__":
    sys.exit(main())
