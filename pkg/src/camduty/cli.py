"""Batch command line front end.

Subcommands tie the library modules into reproducible experiments: each one
reads a flat key=value config file, resolves the data source, writes its
artifacts (CSV, SVG, checkpoint) into an output directory it holds exclusively
via a lock file, and echoes the fully defaulted config back as effective.cfg
so a run can be reproduced from its own output folder.

Environment overrides: CAMDUTY_OUT replaces the configured output directory
(a --out flag still wins), CAMDUTY_THREADS caps the BLAS thread pools.
Day-of-week indexing everywhere: Monday = 0.
"""

import os

# BLAS pools read their env vars at import time, so apply the thread cap
# before numpy comes in. setdefault keeps explicitly set vars intact.
_threads = os.environ.get("CAMDUTY_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import contextlib
import csv
import datetime as dt
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .agent import Checkpoint, train
from .baselines import OptimalPolicy, fit_naive, fit_svm
from .data import (
    DataError,
    OccupancySeries,
    dataset_statistics,
    generate_synthetic,
    ingest_events,
    read_bay_counts,
    read_occupancy_csv,
    series_from_events,
    split_dataset,
    write_occupancy_csv,
)
from .env import rollout_trace, write_trace_csv
from .evaluation import (
    evaluate,
    evaluate_extend,
    evaluate_noise,
    evaluate_shifts,
    sweep_missed_detection_weight,
    write_aggregate_csv,
    write_report_csv,
    write_sweep_csv,
)
from .plots import PlotError, emit_plot
from .profiles import HistogramAxis, high_occupancy_histogram, kmeans_cluster, scan_inertia, write_histogram_csv

log = logging.getLogger(__name__)

LOCK_FILENAME = ".camduty.lock"

CLUSTERS_CSV_HEADER = ["street_id", "hourly_cluster", "daily_cluster"]
INERTIA_CSV_HEADER = ["axis", "k", "inertia"]
STATS_CSV_HEADER = ["street_id", "total_minutes", "high_minutes", "high_pct"]
ADAPT_CSV_HEADER = ["transform", "policy", "accuracy_avg", "savings_avg",
                    "accuracy_std", "savings_std"]
NOISE_CSV_HEADER = ["delta_pct", "policy", "accuracy_avg", "savings_avg",
                    "accuracy_std", "savings_std"]


class CliError(RuntimeError):
    """User-facing failure: bad flags, missing inputs, locked output dir."""


# ---------------------------------------------------------------------------
# Output directory plumbing
# ---------------------------------------------------------------------------

def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


@contextlib.contextmanager
def output_lock(out_dir: Path):
    """Hold the per-directory lock file for the duration of one subcommand.

    A leftover lock whose recorded process is dead counts as stale and is
    replaced; a live process wins and the new invocation fails.
    """
    lock = out_dir / LOCK_FILENAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        try:
            text = lock.read_text().strip()
        except OSError:
            text = ""
        pid = int(text) if text.isdigit() else 0
        if pid and _pid_alive(pid):
            raise CliError(f"{out_dir} is locked by running process {pid}") from None
        log.debug("removing stale lock %s (pid %s)", lock, text or "?")
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


def _resolve_out(args: argparse.Namespace, cfg: dict) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("CAMDUTY_OUT")
    if env:
        return Path(env)
    return Path(str(cfg["output.dir"]))


def _prepare_out(out_dir: Path, names: list[str], force: bool) -> None:
    """Refuse to clobber this subcommand's own artifacts unless --force.

    effective.cfg is exempt: every subcommand rewrites it as provenance.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    if force:
        return
    clashes = [n for n in names if (out_dir / n).exists()]
    if clashes:
        raise CliError(
            f"{out_dir}: outputs already exist: {', '.join(clashes)} (use --force to overwrite)"
        )


# ---------------------------------------------------------------------------
# Data resolution
# ---------------------------------------------------------------------------

def _series_map(cfg: dict) -> dict[str, OccupancySeries]:
    """Load streets from the configured occupancy CSV, else generate synthetics."""
    occ = str(cfg["data.occupancy"])
    if occ:
        if not Path(occ).exists():
            raise CliError(f"occupancy file not found: {occ}")
        bays_path = str(cfg["data.bays"])
        bays = read_bay_counts(bays_path) if bays_path else None
        series = read_occupancy_csv(occ, bays)
        if not series:
            raise CliError(f"{occ}: no streets")
        return series
    synth = cfgmod.synthetic_profiles_from(cfg)
    if not synth:
        raise CliError("no data source: set data.occupancy or data.synthetic")
    start = cfgmod.start_date_from(cfg)
    days = int(cfg["data.days"])
    out: dict[str, OccupancySeries] = {}
    for profile in synth:
        s = generate_synthetic(profile, days, start=start, bay_count=int(cfg["data.bay_count"]))
        if s.street_id in out:
            raise CliError(f"data.synthetic lists {s.street_id} twice")
        out[s.street_id] = s
    return out


def _split_lists(
    cfg: dict, series_map: dict[str, OccupancySeries]
) -> tuple[list[OccupancySeries], list[OccupancySeries], list[OccupancySeries]]:
    ratios = (float(cfg["split.train"]), float(cfg["split.validation"]), float(cfg["split.test"]))
    split = split_dataset(series_map, ratios)
    sids = sorted(series_map)
    tr = [series_map[s].slice_range(*split.train[s]) for s in sids]
    va = [series_map[s].slice_range(*split.validation[s]) for s in sids]
    te = [series_map[s].slice_range(*split.test[s]) for s in sids]
    return tr, va, te


def _load_checkpoint(args: argparse.Namespace, out_dir: Path) -> Checkpoint:
    path = Path(args.checkpoint) if args.checkpoint else out_dir / "checkpoint.bin"
    if not path.exists():
        raise CliError(f"checkpoint not found: {path} (train first or pass --checkpoint)")
    return Checkpoint.load(path)


def _print_streets(report) -> None:
    for r in report.per_street:
        print(f"{r.street_id}: accuracy {r.accuracy:.2f}%, savings {r.savings:.2f}%, "
              f"{r.high_minutes}/{r.total_minutes} high minutes")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    events_path = args.events or str(cfg["data.events"])
    bays_path = args.bays or str(cfg["data.bays"])
    if not events_path or not bays_path:
        raise CliError("ingest needs an events CSV (data.events) and a bays CSV (data.bays)")
    for p in (events_path, bays_path):
        if not Path(p).exists():
            raise CliError(f"input not found: {p}")
    _prepare_out(out_dir, ["occupancy.csv", "stats.csv"], args.force)

    start = cfgmod.start_date_from(cfg)
    end = start + dt.timedelta(days=int(cfg["data.days"]))
    summary = ingest_events(events_path, (start, end))
    bays = read_bay_counts(bays_path)
    series = series_from_events(summary.events, bays, (start, end),
                                min_bays=int(cfg["data.min_bays"]))
    if not series:
        raise CliError("no streets admitted (check bay counts against data.min_bays)")

    write_occupancy_csv(series.values(), out_dir / "occupancy.csv")
    stats = dataset_statistics(series.values(), cfgmod.thresholds_from(cfg))
    with (out_dir / "stats.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_CSV_HEADER)
        for st in stats.per_street:
            writer.writerow([st.street_id, st.total_minutes, st.high_minutes,
                             f"{st.high_pct:.4f}"])
    cfgmod.write_effective_config(cfg, out_dir)

    for st in stats.per_street:
        print(f"{st.street_id}: {st.total_minutes} minutes, {st.high_minutes} high "
              f"({st.high_pct:.2f}%)")
    print(f"ingest: {len(series)} street(s) admitted, {summary.rejected} event(s) rejected, "
          f"average high share {stats.avg_high_pct:.2f}%")
    return 0


def cmd_characterize(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    outputs = ["histograms_hourly.csv", "histograms_daily.csv", "clusters.csv",
               "inertia.csv", "cluster_means.csv"]
    _prepare_out(out_dir, outputs, args.force)
    series_map = _series_map(cfg)
    th = cfgmod.thresholds_from(cfg)
    seed = int(cfg["train.seed"])
    sids = sorted(series_map)

    hourly = [high_occupancy_histogram(series_map[s], HistogramAxis.HOUR_OF_DAY, th) for s in sids]
    daily = [high_occupancy_histogram(series_map[s], HistogramAxis.DAY_OF_WEEK, th) for s in sids]
    write_histogram_csv(hourly, out_dir / "histograms_hourly.csv")
    write_histogram_csv(daily, out_dir / "histograms_daily.csv")

    kh = min(args.k_hourly, len(sids))
    kd = min(args.k_daily, len(sids))
    ah = kmeans_cluster(hourly, kh, seed=seed)
    ad = kmeans_cluster(daily, kd, seed=seed)

    with (out_dir / "clusters.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CLUSTERS_CSV_HEADER)
        for i, sid in enumerate(sids):
            writer.writerow([sid, int(ah.labels[i]), int(ad.labels[i])])

    with (out_dir / "inertia.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(INERTIA_CSV_HEADER)
        for axis, hists in (("hour_of_day", hourly), ("day_of_week", daily)):
            for k, inertia in scan_inertia(hists, seed=seed).items():
                writer.writerow([axis, k, f"{inertia:.6f}"])

    # Per-cluster mean shapes, written in the histogram schema so the plot
    # emitter can render them directly.
    from .profiles import OccupancyHistogram

    means = []
    for j in range(kh):
        means.append(OccupancyHistogram(f"hourly-cluster-{j}", HistogramAxis.HOUR_OF_DAY,
                                        ah.centroids[j].copy()))
    for j in range(kd):
        means.append(OccupancyHistogram(f"daily-cluster-{j}", HistogramAxis.DAY_OF_WEEK,
                                        ad.centroids[j].copy()))
    write_histogram_csv(means, out_dir / "cluster_means.csv")
    cfgmod.write_effective_config(cfg, out_dir)

    members_h = ah.members(sids)
    members_d = ad.members(sids)
    for j in range(kh):
        print(f"hourly cluster {j}: {', '.join(members_h[j]) or '(empty)'}")
    for j in range(kd):
        print(f"daily cluster {j}: {', '.join(members_d[j]) or '(empty)'}")
    print(f"characterize: {len(sids)} street(s), hourly k={kh} inertia {ah.inertia:.4f}, "
          f"daily k={kd} inertia {ad.inertia:.4f}")
    return 0


def cmd_train(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    _prepare_out(out_dir, ["checkpoint.bin", "training_log.csv"], args.force)
    series_map = _series_map(cfg)
    tr, va, _ = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    reward = cfgmod.reward_from(cfg)
    acfg = cfgmod.agent_config_from(cfg)

    result = train(tr, reward, acfg, th, validation_series=va or None)
    result.checkpoint.save(out_dir / "checkpoint.bin")
    result.write_log_csv(out_dir / "training_log.csv")
    cfgmod.write_effective_config(cfg, out_dir)

    meta = result.checkpoint.metadata
    best = meta.get("best_validation_return")
    best_txt = f"{best:.3f}" if isinstance(best, float) else "n/a"
    print(f"train: {len(tr)} street(s), {acfg.episodes} episodes "
          f"({meta.get('global_steps', 0)} steps) in {result.wall_seconds:.1f}s, "
          f"best validation return {best_txt}")
    print(f"checkpoint: {out_dir / 'checkpoint.bin'}")
    return 0


def cmd_eval(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    outputs = ["report.csv", "aggregate.csv", "policies.svg", "trace.csv", "trace.svg"]
    _prepare_out(out_dir, outputs, args.force)
    series_map = _series_map(cfg)
    tr, _, te = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    skip = bool(cfg["eval.skip_zero_high"])
    ckpt = _load_checkpoint(args, out_dir)

    naive = fit_naive(tr, th)
    svm = fit_svm(tr, th, seed=int(cfg["train.seed"]))
    reports = [
        evaluate(ckpt, te, th, policy_name="rl", skip_zero_high=skip),
        evaluate(OptimalPolicy(), te, th, policy_name="optimal", skip_zero_high=skip),
        evaluate(naive, te, th, policy_name="naive", skip_zero_high=skip),
        evaluate(svm, te, th, policy_name="svm", skip_zero_high=skip),
    ]
    write_report_csv(reports, out_dir / "report.csv")
    write_aggregate_csv(reports, out_dir / "aggregate.csv")
    emit_plot(out_dir / "aggregate.csv", "bar", out_dir / "policies.svg")

    # Trace the trained policy over the first test street's first day.
    first = te[0]
    day_end = min(first.end, first.start + dt.timedelta(days=1))
    day = first.slice_range(first.start, day_end)
    actions = ckpt.actions_for(day, th)
    trace = rollout_trace(day, actions, ckpt.reward, th)
    write_trace_csv(trace, out_dir / "trace.csv")
    emit_plot(out_dir / "trace.csv", "policy-trace", out_dir / "trace.svg")
    cfgmod.write_effective_config(cfg, out_dir)

    _print_streets(reports[0])
    for rep in reports:
        print(rep)
    return 0


def cmd_baseline(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    name = args.policy
    outputs = [f"report_{name}.csv", f"aggregate_{name}.csv"]
    _prepare_out(out_dir, outputs, args.force)
    series_map = _series_map(cfg)
    tr, _, te = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    skip = bool(cfg["eval.skip_zero_high"])

    if name == "optimal":
        policy = OptimalPolicy()
    elif name == "naive":
        policy = fit_naive(tr, th, per_weekday=args.per_weekday)
    else:
        policy = fit_svm(tr, th, seed=int(cfg["train.seed"]))
    report = evaluate(policy, te, th, policy_name=name, skip_zero_high=skip)
    write_report_csv([report], out_dir / f"report_{name}.csv")
    write_aggregate_csv([report], out_dir / f"aggregate_{name}.csv")
    cfgmod.write_effective_config(cfg, out_dir)

    _print_streets(report)
    print(report)
    return 0


def cmd_sweep(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    _prepare_out(out_dir, ["sweep.csv", "tradeoff.svg"], args.force)
    series_map = _series_map(cfg)
    tr, va, te = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    acfg = cfgmod.agent_config_from(cfg)
    w_values = cfgmod.sweep_w_from(cfg)

    points = sweep_missed_detection_weight(
        tr, te, w_values,
        e1=float(cfg["reward.e1"]), e2=float(cfg["reward.e2"]),
        config=acfg, thresholds=th, validation_series=va or None,
    )
    write_sweep_csv(points, out_dir / "sweep.csv")
    emit_plot(out_dir / "sweep.csv", "tradeoff-curve", out_dir / "tradeoff.svg")
    cfgmod.write_effective_config(cfg, out_dir)

    for pt in points:
        print(f"w={pt.w:g} (w_hat={pt.reward.w_hat:.4f}): accuracy {pt.accuracy:.2f}%, "
              f"savings {pt.savings:.2f}%")
    return 0


def cmd_adapt(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    _prepare_out(out_dir, ["adapt.csv"], args.force)
    series_map = _series_map(cfg)
    tr, _, te = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    shifts = cfgmod.shifts_from(cfg)

    if args.policy == "naive":
        name, policy = "naive", fit_naive(tr, th)
    else:
        name, policy = "rl", _load_checkpoint(args, out_dir)

    by_shift = evaluate_shifts(policy, te, shifts, th, policy_name=name)
    extend_report = evaluate_extend(policy, te, th, policy_name=name)

    with (out_dir / "adapt.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ADAPT_CSV_HEADER)
        for h in shifts:
            rep = by_shift[h]
            writer.writerow([f"shift{h:+d}h", name,
                             f"{rep.mean_accuracy:.4f}", f"{rep.mean_savings:.4f}",
                             f"{rep.std_accuracy:.4f}", f"{rep.std_savings:.4f}"])
        writer.writerow(["extend", name,
                         f"{extend_report.mean_accuracy:.4f}", f"{extend_report.mean_savings:.4f}",
                         f"{extend_report.std_accuracy:.4f}", f"{extend_report.std_savings:.4f}"])
    cfgmod.write_effective_config(cfg, out_dir)

    for h in shifts:
        print(by_shift[h])
    print(extend_report)
    print(f"adapt: {len(shifts) + 1} report(s) for policy {name}")
    return 0


def cmd_noise(args: argparse.Namespace, cfg: dict, out_dir: Path) -> int:
    _prepare_out(out_dir, ["noise.csv"], args.force)
    series_map = _series_map(cfg)
    _, _, te = _split_lists(cfg, series_map)
    th = cfgmod.thresholds_from(cfg)
    deltas = cfgmod.noise_deltas_from(cfg)
    ckpt = _load_checkpoint(args, out_dir)

    by_delta = evaluate_noise(ckpt, te, deltas, seed=int(cfg["train.seed"]),
                              thresholds=th, policy_name="rl")
    with (out_dir / "noise.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(NOISE_CSV_HEADER)
        for d in deltas:
            rep = by_delta[d]
            writer.writerow([f"{d:g}", "rl",
                             f"{rep.mean_accuracy:.4f}", f"{rep.mean_savings:.4f}",
                             f"{rep.std_accuracy:.4f}", f"{rep.std_savings:.4f}"])
    cfgmod.write_effective_config(cfg, out_dir)

    for d in deltas:
        print(by_delta[d])
    return 0


def cmd_plot(args: argparse.Namespace, cfg: dict, out_dir: Path | None) -> int:
    csv_path = Path(args.csv)
    if not csv_path.exists():
        raise CliError(f"input not found: {csv_path}")
    svg_path = Path(args.svg) if args.svg else csv_path.with_suffix(".svg")
    if svg_path.exists() and not args.force:
        raise CliError(f"{svg_path} exists (use --force to overwrite)")
    emit_plot(csv_path, args.kind, svg_path)
    print(f"plot: {svg_path}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, metavar="FILE",
                   help="flat key = value config file (defaults apply when omitted)")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="output directory (beats CAMDUTY_OUT and output.dir)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--verbose", action="store_true", help="debug-level logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camduty",
        description="Learn and evaluate energy-saving standby schedules for "
                    "parking-analytics cameras. Weekdays are indexed Monday=0.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="build per-street occupancy series from parking events")
    p.add_argument("--events", default=None, metavar="FILE",
                   help="events CSV street_id,arrival,departure (default: data.events)")
    p.add_argument("--bays", default=None, metavar="FILE",
                   help="capacity CSV street_id,bay_count (default: data.bays)")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("characterize", help="histogram high-occupancy minutes and cluster street shapes")
    p.add_argument("--k-hourly", type=int, default=2, help="clusters over hour-of-day shapes")
    p.add_argument("--k-daily", type=int, default=3, help="clusters over day-of-week shapes")
    _add_common(p)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("train", help="train the standby policy and write a checkpoint")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score the trained policy against the baselines on test data")
    p.add_argument("--checkpoint", default=None, metavar="FILE",
                   help="policy checkpoint (default: OUT/checkpoint.bin)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="score a single baseline policy on test data")
    p.add_argument("--policy", choices=("optimal", "naive", "svm"), required=True)
    p.add_argument("--per-weekday", action="store_true",
                   help="fit the naive schedule per weekday instead of one window")
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="train once per missed-detection weight and chart the tradeoff")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("adapt", help="evaluate one policy against shifted and extended demand")
    p.add_argument("--policy", choices=("rl", "naive"), default="rl")
    p.add_argument("--checkpoint", default=None, metavar="FILE",
                   help="policy checkpoint (default: OUT/checkpoint.bin)")
    _add_common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("noise", help="evaluate the trained policy under sensor noise")
    p.add_argument("--checkpoint", default=None, metavar="FILE",
                   help="policy checkpoint (default: OUT/checkpoint.bin)")
    _add_common(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("plot", help="render one of the CSV artifacts as a standalone SVG")
    p.add_argument("--kind", choices=("policy-trace", "tradeoff-curve", "histogram", "bar"),
                   required=True)
    p.add_argument("--csv", required=True, metavar="FILE")
    p.add_argument("--svg", default=None, metavar="FILE",
                   help="output path (default: CSV path with .svg suffix)")
    _add_common(p)
    p.set_defaults(func=cmd_plot, needs_out=False)

    return parser


def _overrides(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise CliError(f"--set expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = cfgmod.load_config(args.config, _overrides(args.sets))
        if not getattr(args, "needs_out", True):
            return args.func(args, cfg, None)
        out_dir = _resolve_out(args, cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        with output_lock(out_dir):
            return args.func(args, cfg, out_dir)
    except (CliError, cfgmod.ConfigError, DataError, PlotError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
