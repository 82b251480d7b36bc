"""Replicated experiments: stream -> train -> evaluate, summarized per strategy.

Streams are produced by spawning the pipeline CLI (`hybridaug serve`) and
reading its stdout; scoring goes back through `hybridaug evaluate`. The
suite emits, per strategy, (mean, sd, n) summary statistics ready for
`hybridaug ttest`, a merged loss CSV ready for `hybridaug plot-loss`, and
the per-replicate CSVs.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .train import TrainConfig, TrainResult, train

PIPELINE_CLI = [sys.executable, "-m", "hybridaug"]


@dataclass
class SummaryStat:
    mean: float
    sd: float
    n: int

    @classmethod
    def from_values(cls, values: list[float]) -> "SummaryStat":
        n = len(values)
        mean = sum(values) / n
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
        return cls(mean=mean, sd=sd, n=n)


@dataclass
class SuiteResult:
    summaries: dict[str, dict[str, SummaryStat]]  # strategy -> metric -> stat
    results: dict[str, list[TrainResult]] = field(default_factory=dict)
    merged_loss_csv: Path | None = None
    summary_json: Path | None = None


def serve_command(
    manifest: Path, store: Path, strategy: str, seed: int, cfg: TrainConfig
) -> list[str]:
    return PIPELINE_CLI + [
        "serve",
        "--manifest",
        str(manifest),
        "--store",
        str(store),
        "--strategy",
        strategy,
        "--epochs",
        str(cfg.max_epochs),
        "--seed",
        str(seed),
        "--batch-size",
        str(cfg.batch_size),
        "--image-size",
        str(cfg.input_size),
        "--sink",
        "-",
    ]


def run_one(
    manifest: Path,
    store: Path,
    val_manifest: Path,
    strategy: str,
    seed: int,
    cfg: TrainConfig,
    out_dir: Path,
) -> TrainResult:
    """Spawn one serve process and train on its stdout stream."""
    proc = subprocess.Popen(
        serve_command(manifest, store, strategy, seed, cfg),
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
    )
    try:
        result = train(proc.stdout, val_manifest, cfg, seed, out_dir)
    finally:
        proc.stdout.close()
        proc.wait()
    if proc.returncode != 0:
        raise RuntimeError(f"serve exited with status {proc.returncode}")
    return result


def evaluate_csv(preds_csv: Path, out_dir: Path) -> dict:
    """Score a predictions CSV through the pipeline CLI; returns report.json."""
    subprocess.run(
        PIPELINE_CLI + ["evaluate", "--preds", str(preds_csv), "--out", str(out_dir)],
        check=True,
        capture_output=True,
    )
    return json.loads((out_dir / "report.json").read_text())


def replicate_suite(
    manifest: Path,
    store: Path,
    val_manifest: Path,
    strategies: list[str],
    seeds: list[int],
    cfg: TrainConfig,
    out_dir: Path,
) -> SuiteResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries: dict[str, dict[str, SummaryStat]] = {}
    results: dict[str, list[TrainResult]] = {}
    merged_rows: list[str] = []

    for strategy in strategies:
        accs: list[float] = []
        f1s: list[float] = []
        results[strategy] = []
        for seed in seeds:
            result = run_one(manifest, store, val_manifest, strategy, seed, cfg, out_dir)
            results[strategy].append(result)
            report = evaluate_csv(result.preds_csv, out_dir / f"eval_{strategy}_{seed}")
            accs.append(float(report["accuracy"]))
            f1s.append(float(report["macro_f1"]))
            merged_rows.extend(
                result.loss_csv.read_text().strip().splitlines()[1:]
            )
        summaries[strategy] = {
            "accuracy": SummaryStat.from_values(accs),
            "macro_f1": SummaryStat.from_values(f1s),
        }

    merged = out_dir / "merged_loss.csv"
    merged.write_text("series,epoch,loss\n" + "\n".join(merged_rows) + "\n")
    summary_json = out_dir / "summary.json"
    summary_json.write_text(
        json.dumps(
            {
                strat: {
                    metric: {"mean": s.mean, "sd": s.sd, "n": s.n}
                    for metric, s in metrics.items()
                }
                for strat, metrics in summaries.items()
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return SuiteResult(
        summaries=summaries,
        results=results,
        merged_loss_csv=merged,
        summary_json=summary_json,
    )


def ttest_args(summaries: dict, strategy_a: str, strategy_b: str, metric: str) -> list[str]:
    """Format two summaries as `hybridaug ttest --two-sample` arguments."""
    a = summaries[strategy_a][metric]
    b = summaries[strategy_b][metric]
    return [
        "ttest",
        "--two-sample",
        f"{a.mean:.4f}",
        f"{a.sd:.4f}",
        str(a.n),
        f"{b.mean:.4f}",
        f"{b.sd:.4f}",
        str(b.n),
    ]
