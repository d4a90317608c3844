"""Evaluation protocols, error metrics and reports."""

from src.evaluation.metrics import (
    AxisErrors,
    ErrorTable,
    EvalRecord,
    Stage,
    axis_errors,
)
from src.evaluation.overlay import render_overlay
from src.evaluation.protocols import (
    EvalConfig,
    eval_generalization,
    eval_random,
    eval_static,
    eval_temporal,
    static_decalibrations,
    temporal_decalibration,
)
from src.evaluation.report import (
    emit_report,
    read_errors_csv,
    write_static_histograms,
)

__all__ = [
    "AxisErrors",
    "ErrorTable",
    "EvalConfig",
    "EvalRecord",
    "Stage",
    "axis_errors",
    "emit_report",
    "eval_generalization",
    "eval_random",
    "eval_static",
    "eval_temporal",
    "read_errors_csv",
    "render_overlay",
    "static_decalibrations",
    "temporal_decalibration",
    "write_static_histograms",
]
