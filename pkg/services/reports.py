"""
Plot-ready CSV exports of evaluation history, predictions and robustness tables.
"""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List

from schemas import EvalReport, RobustnessReport
from services.training import PARAM_NAMES, Predictions

logger = logging.getLogger(__name__)

HISTORY_FIELDS = ["step", "objective", "split", "noise_sigma", "param", "mu", "sigma"]
EVAL_FIELDS = ["split", "noise_sigma", "param", "mu", "sigma", "abs_mean", "sample_count"]
ROBUSTNESS_FIELDS = ["objective", "noise_sigma", "param", "mu", "sigma"]
PREDICTION_FIELDS = ["road_index", "mass_index", "m3", "window_start", "param", "true", "predicted", "relative_deviation"]
HISTOGRAM_FIELDS = ["param", "bin_left", "bin_right", "count"]


def _write_rows(path: Path, fieldnames: List[str], rows: Iterable[Dict]) -> Path:
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info(f"Generated {path} with {count} rows.")
    return path


def history_rows(history: Iterable[EvalReport]) -> Iterable[Dict]:
    for report in history:
        for stat in report.stats:
            yield {
                "step": report.step, "objective": report.objective or "", "split": report.split,
                "noise_sigma": repr(report.noise_sigma), "param": stat.param,
                "mu": repr(stat.mu), "sigma": repr(stat.sigma),
            }


def write_history_csv(path: Path, history: Iterable[EvalReport]) -> Path:
    return _write_rows(path, HISTORY_FIELDS, history_rows(history))


def append_history_csv(path: Path, history: Iterable[EvalReport]) -> None:
    """Append rows as training progresses; writes the header on first use."""
    path = Path(path)
    is_new = not path.exists()
    with open(path, 'a', newline='', encoding='utf-8') as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=HISTORY_FIELDS, lineterminator="\n")
        if is_new:
            writer.writeheader()
        for row in history_rows(history):
            writer.writerow(row)


def write_eval_csv(path: Path, reports: Iterable[EvalReport]) -> Path:
    rows = (
        {"split": r.split, "noise_sigma": repr(r.noise_sigma), "param": s.param, "mu": repr(s.mu),
         "sigma": repr(s.sigma), "abs_mean": repr(s.abs_mean), "sample_count": r.sample_count}
        for r in reports for s in r.stats
    )
    return _write_rows(path, EVAL_FIELDS, rows)


def write_robustness_csv(path: Path, report: RobustnessReport) -> Path:
    rows = (
        {"objective": r.objective, "noise_sigma": repr(r.noise_sigma), "param": r.param,
         "mu": repr(r.mu), "sigma": repr(r.sigma)}
        for r in report.rows
    )
    return _write_rows(path, ROBUSTNESS_FIELDS, rows)


def write_predictions_csv(path: Path, predictions: Predictions) -> Path:
    """One row per sample and parameter: the scatter and histogram plot data."""
    def rows():
        for k, sample in enumerate(predictions.samples):
            for j, name in enumerate(PARAM_NAMES):
                true, pred = predictions.truth[k, j], predictions.predicted[k, j]
                yield {
                    "road_index": sample.road_index, "mass_index": sample.mass_index, "m3": sample.m3,
                    "window_start": int(predictions.starts[k]), "param": name,
                    "true": repr(float(true)), "predicted": repr(float(pred)),
                    "relative_deviation": repr(float(abs(true - pred) / true)),
                }
    return _write_rows(path, PREDICTION_FIELDS, rows())


def write_histogram_csv(path: Path, rows: Iterable[Dict]) -> Path:
    return _write_rows(path, HISTOGRAM_FIELDS, rows)


def robustness_summary(report: RobustnessReport) -> str:
    """Human-readable table and verdict."""
    lines = [f"Robustness at noise sigma = {report.noise_sigma}", ""]
    lines.append(f"{'objective':<12}{'noise':>8}{'param':>7}{'mu':>12}{'sigma':>12}")
    for r in report.rows:
        lines.append(f"{r.objective:<12}{r.noise_sigma:>8.4g}{r.param:>7}{r.mu:>12.5f}{r.sigma:>12.5f}")
    lines.append("")
    for name in PARAM_NAMES:
        lines.append(
            f"{name}: noisy J_U < noisy J_L: {report.unlabelled_lower_noisy.get(name)}; "
            f"J_L noisy/clean ratio above J_U: {report.labelled_ratio_higher.get(name)}"
        )
    lines.append(f"Verdict: {report.verdict}")
    return "\n".join(lines) + "\n"
