"""Grid-grounded VQA dataset toolkit.

QA records are plain dicts with the JSONL wire fields.
"""

import json

from . import _gridvqa
from ._gridvqa import (
    GridVqaError,
    area_label,
    area_labels,
    average_accuracy,
    bias_row,
    cell_correlation,
    default_nomenclature,
    summarize,
)

__all__ = [
    "GridVqaError",
    "area_label",
    "area_labels",
    "average_accuracy",
    "balance",
    "bias_report",
    "bias_row",
    "cell_correlation",
    "default_nomenclature",
    "generate",
    "run_cli",
    "seg_metrics",
    "summarize",
]


def _lines(records):
    return [json.dumps(r, ensure_ascii=False) for r in records]


def generate(manifest, config, workers=1):
    """Candidate QA records for every image of a manifest."""
    return [json.loads(line) for line in _gridvqa.generate(str(manifest), str(config), workers)]


def balance(records, seed=0, per_subtype=False, workers=1):
    """Returns (kept records, audit dict)."""
    kept, audit = _gridvqa.balance(_lines(records), seed, per_subtype, workers)
    return [json.loads(line) for line in kept], json.loads(audit)


def bias_report(records, recompute_average_lb=False):
    """Bias rows as a list of dicts."""
    return json.loads(_gridvqa.bias_report(_lines(records), recompute_average_lb))


def seg_metrics(confusion, include_absent_classes=False):
    """Segmentation metrics from a square confusion matrix (rows: ground truth)."""
    rows = [[int(v) for v in row] for row in confusion]
    return json.loads(_gridvqa.seg_metrics(rows, include_absent_classes))


def run_cli(*args):
    """Runs a CLI subcommand in-process; returns (status, stdout, stderr)."""
    return _gridvqa.run_cli([str(a) for a in args])
