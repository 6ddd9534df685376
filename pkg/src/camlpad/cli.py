"""Command-line entry points: camlpad run / synth / evaluate.

Exit codes: 0 success, 1 error, and for ``run`` specifically 2 when an alert
fired, so shell automation can branch on anomaly presence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluate
from .config import load_config
from .datamodel import DataSourceKind
from .ensemble import DETECTOR_NAMES
from .errors import CamlpadError
from .ingest_store import DirectoryStore, HttpStore, StoreQuery, StoreUnreachable, query_store
from .pipeline import run_pipeline
from .synth import SynthConfig, generate, write_store

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ALERT_FIRED = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camlpad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full anomaly-detection pipeline")
    run.add_argument("--config", required=True, type=Path, help="flat key=value config file")
    run.add_argument("--boundary", default=None, help="current-window start (ISO date), overrides config")
    run.add_argument("--dry-run", action="store_true", help="validate config and store reachability only")

    synth = sub.add_parser("synth", help="generate a synthetic multi-source store")
    synth.add_argument("--out", required=True, type=Path, help="store root directory to write")
    synth.add_argument("--seed", type=int, default=1)
    synth.add_argument("--contamination", type=float, default=0.05)
    synth.add_argument("--days", type=int, default=7, help="history days (one current day is added)")
    synth.add_argument("--records", type=int, default=500, help="records per source per day")
    synth.add_argument("--style", choices=("shift", "scatter"), default="shift")

    ev = sub.add_parser("evaluate", help="score a run's labels against ground truth")
    ev.add_argument("--run", required=True, type=Path, help="pipeline output directory")
    ev.add_argument("--truth", required=True, type=Path, help="directory of per-source truth jsonl files")
    return parser


def _dry_run(config_path: Path) -> int:
    config = load_config(config_path)
    locator = config.locator()
    if isinstance(locator, DirectoryStore):
        if not locator.root.is_dir():
            raise StoreUnreachable(f"store root does not exist: {locator.root}")
        missing = [
            config.index_for(s) for s in config.sources if not (locator.root / config.index_for(s)).is_dir()
        ]
        if missing:
            raise StoreUnreachable(f"missing index directories: {', '.join(missing)}")
    elif isinstance(locator, HttpStore):
        probe_index = config.bro_index or config.index_for(config.sources[0])
        query_store(
            locator,
            StoreQuery(index=probe_index, time_from=0, time_to=1, page_size=1, max_records=1),
            config.sources[0],
            config.time_field,
        )
    print(f"config ok: {len(config.sources)} sources, store reachable")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    if args.dry_run:
        return _dry_run(args.config)
    config = load_config(args.config)
    result = run_pipeline(config, boundary_override=args.boundary)
    print(f"run complete: window {result.window_id}, artifacts in {config.output_dir}")
    for reading in result.gauges:
        rank = "n/a" if reading.history_percentile is None else f"{reading.history_percentile:.1f}"
        print(f"  gauge {reading.scope}: score {reading.score:.6f}, percentile {rank}")
    if result.alert is not None:
        print(f"  ALERT: {result.alert.message}")
        return EXIT_ALERT_FIRED
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        seed=args.seed,
        days_history=args.days,
        records_per_source_per_day=args.records,
        contamination=args.contamination,
        anomaly_style=args.style,
    )
    result = generate(config)
    write_store(result, args.out)
    total = sum(len(b) for b in result.batches.values())
    print(f"wrote {total} records across {len(result.batches)} sources to {args.out}")
    return EXIT_OK


def _read_labels_file(path: Path) -> tuple[list[str], dict[str, list[int]]]:
    ids: list[str] = []
    vectors: dict[str, list[int]] = {name: [] for name in DETECTOR_NAMES}
    vectors["ensemble"] = []
    try:
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            ids.append(doc["row_id"])
            vectors["ensemble"].append(int(doc["label"]))
            for name in DETECTOR_NAMES:
                vectors[name].append(int(doc["votes"][name]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CamlpadError(f"corrupted label file {path}: {exc}") from None
    return ids, vectors


def _read_truth_file(path: Path) -> dict[str, int]:
    truth: dict[str, int] = {}
    try:
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            truth[doc["record_id"]] = int(doc["label"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CamlpadError(f"corrupted truth file {path}: {exc}") from None
    return truth


def _cmd_evaluate(args: argparse.Namespace) -> int:
    labels_dir = args.run / "labels"
    if not labels_dir.is_dir():
        raise CamlpadError(f"no labels directory under {args.run}")
    if not args.truth.is_dir():
        raise CamlpadError(f"truth directory not found: {args.truth}")

    per_source: dict[str, dict] = {}
    means: list[float] = []
    for labels_path in sorted(labels_dir.glob("*.jsonl")):
        source = DataSourceKind.from_name(labels_path.stem)
        ids, vectors = _read_labels_file(labels_path)
        pairwise = {
            f"{a}|{b}": evaluate.adjusted_rand_index(vectors[a], vectors[b])
            for i, a in enumerate(DETECTOR_NAMES)
            for b in DETECTOR_NAMES[i + 1 :]
        }
        mean = sum(pairwise.values()) / len(pairwise)
        entry: dict = {"pairwise_ari": pairwise, "mean_pairwise_ari": mean}

        truth_path = args.truth / f"{source.value}.jsonl"
        if truth_path.is_file():
            truth = _read_truth_file(truth_path)
            keep = [i for i, row_id in enumerate(ids) if row_id in truth]
            if len(keep) >= 2:
                truth_vector = [truth[ids[i]] for i in keep]
                entry["vs_truth"] = {
                    name: evaluate.adjusted_rand_index(
                        [vectors[name][i] for i in keep], truth_vector
                    )
                    for name in ("ensemble",) + DETECTOR_NAMES
                }
        per_source[source.value] = entry
        means.append(mean)

    if not per_source:
        raise CamlpadError(f"no label files found under {labels_dir}")
    report = {
        "per_source": per_source,
        "mean_pairwise_ari": sum(means) / len(means),
    }
    report_path = args.run / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"mean pairwise ARI: {report['mean_pairwise_ari']:.4f} (report: {report_path})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "synth": _cmd_synth, "evaluate": _cmd_evaluate}
    try:
        return handlers[args.command](args)
    except CamlpadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
