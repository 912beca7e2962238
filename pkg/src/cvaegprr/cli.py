"""Command-line harness: generate / train / evaluate / sweep-npod.

Each subcommand takes ``--config PATH`` plus optional ``--out DIR`` and
``--seed N`` overrides.  Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .bundle import BundleFormatError, ModelBundle, load_bundle, save_bundle
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import SnapshotFormatError, read_snapshots, write_snapshots
from .pipeline import MetricRow, evaluate_bundle, fit_bundle, prepare_morlet_data, sweep_npod

__all__ = ["main", "cmd_generate", "cmd_train", "cmd_evaluate", "cmd_sweep_npod"]

RESULTS_SCHEMA = "cvae-gprr results v1"
RESULTS_FIELDS = ["method", "noise", "n_pod", "grid", "epsilon_test", "wall_seconds"]
DEFAULT_SWEEP_RANKS = (1, 2, 3, 4, 5, 10, 20, 30)


def _write_results_csv(rows: list[MetricRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {RESULTS_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(RESULTS_FIELDS)
        for r in rows:
            writer.writerow([r.method, repr(r.noise), r.n_pod, r.grid,
                             repr(r.epsilon_test), f"{r.wall_seconds:.3f}"])


def _print_results(rows: list[MetricRow]) -> None:
    print(f"{'method':<12} {'noise':>8} {'n_pod':>6} {'grid':>7} {'epsilon_test':>14} {'wall_s':>8}")
    for r in rows:
        print(f"{r.method:<12} {r.noise:>8.4g} {r.n_pod:>6d} {r.grid:>7} "
              f"{r.epsilon_test:>14.6e} {r.wall_seconds:>8.2f}")


def _write_history_csv(history, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for it, loss in history:
            writer.writerow([int(it), repr(float(loss))])


def _train_paths(out_dir: Path):
    return {
        "train_clean": out_dir / "train_clean.txt",
        "train_noisy": out_dir / "train_noisy.txt",
        "test_clean": out_dir / "test_clean.txt",
        "test_noisy": out_dir / "test_noisy.txt",
    }


def cmd_generate(cfg: ExperimentConfig, out_dir: Path) -> dict:
    """Write clean and noisy train/test snapshot files."""
    if cfg.data != "morlet":
        raise ConfigError("generate is only defined for data = morlet")
    out_dir.mkdir(parents=True, exist_ok=True)
    data = prepare_morlet_data(cfg)
    paths = _train_paths(out_dir)
    write_snapshots(data.train_clean, paths["train_clean"])
    write_snapshots(data.train_noisy, paths["train_noisy"])
    write_snapshots(data.test_clean, paths["test_clean"])
    write_snapshots(data.test_noisy, paths["test_noisy"])
    for p in paths.values():
        print(f"wrote {p}")
    return paths


def _load_train_set(cfg: ExperimentConfig, out_dir: Path):
    if cfg.data == "files":
        path = Path(cfg.train_file)
    else:
        path = _train_paths(out_dir)["train_noisy"]
    if not path.exists():
        raise FileNotFoundError(f"training file not found: {path} (run generate first?)")
    return read_snapshots(path)


def _load_test_set(cfg: ExperimentConfig, out_dir: Path):
    if cfg.data == "files":
        if not cfg.test_file:
            raise ConfigError("data=files evaluation requires test_file")
        path = Path(cfg.test_file)
    else:
        path = _train_paths(out_dir)["test_clean"]
    if not path.exists():
        raise FileNotFoundError(f"test file not found: {path} (run generate first?)")
    return read_snapshots(path)


def cmd_train(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Fit the full pipeline and persist the bundle plus the loss history."""
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = _load_train_set(cfg, out_dir)
    bundle, history = fit_bundle(train_set, cfg)
    bundle_path = out_dir / "model.bundle"
    save_bundle(bundle, bundle_path)
    _write_history_csv(history, out_dir / "loss_history.csv")
    print(f"wrote {bundle_path}")
    return bundle_path


def cmd_evaluate(cfg: ExperimentConfig, bundle: ModelBundle, out_dir: Path,
                 grid: str = "coarse") -> list[MetricRow]:
    """Report relative test mean errors for every trained method."""
    out_dir.mkdir(parents=True, exist_ok=True)
    test_set = _load_test_set(cfg, out_dir)
    rows = evaluate_bundle(bundle, test_set, cfg, grid=grid)
    _write_results_csv(rows, out_dir / f"results_{grid}.csv")
    _print_results(rows)
    return rows


def cmd_sweep_npod(cfg: ExperimentConfig, ranks, out_dir: Path) -> list[MetricRow]:
    """Rank sweep for the network model and the GPR-ROM baseline."""
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = _load_train_set(cfg, out_dir)
    test_set = _load_test_set(cfg, out_dir)
    rows, failures = sweep_npod(train_set, test_set, cfg, ranks)
    _write_results_csv(rows, out_dir / "sweep_npod.csv")
    _print_results(rows)
    for rank, message in failures:
        print(f"rank {rank} failed: {message}", file=sys.stderr)
    return rows


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvae-gprr",
                                     description="Surrogate modeling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "evaluate", "sweep-npod"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a key=value config file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        if name == "evaluate":
            p.add_argument("--bundle", default=None,
                           help="bundle path (default: <out>/model.bundle)")
            p.add_argument("--grid", choices=["coarse", "fine"], default="coarse")
        if name == "sweep-npod":
            p.add_argument("--ranks", default=",".join(str(r) for r in DEFAULT_SWEEP_RANKS),
                           help="comma-separated basis ranks")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        ranks = None
        if args.command == "sweep-npod":
            ranks = [int(t) for t in args.ranks.split(",") if t.strip()]
            if not ranks:
                raise ConfigError("--ranks must list at least one rank")
        bundle = None
        if args.command == "evaluate":
            bundle_path = Path(args.bundle) if args.bundle else out_dir / "model.bundle"
            if not bundle_path.exists():
                raise FileNotFoundError(f"bundle not found: {bundle_path}")
            bundle = load_bundle(bundle_path)
    except (ConfigError, SnapshotFormatError, BundleFormatError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "generate":
            cmd_generate(cfg, out_dir)
        elif args.command == "train":
            cmd_train(cfg, out_dir)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, bundle, out_dir, grid=args.grid)
        elif args.command == "sweep-npod":
            cmd_sweep_npod(cfg, ranks, out_dir)
    except (ValueError, FileNotFoundError) as exc:
        # includes ConfigError / SnapshotFormatError / unsupported requests
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
