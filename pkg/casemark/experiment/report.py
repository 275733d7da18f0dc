"""Aggregate statistics over the evaluation rows of a run."""
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
import funml as ml

from casemark.evaluation import (
    EVAL_COLUMNS,
    PHASES,
    delta_summary_table,
    order_marking_slope,
    summarize,
)
from casemark.language import AMBIGUITY_CLASSES
from casemark.utils import PathLike, atomic_write_csv, read_table

SLOPE_COLUMNS = ["phase", "ambiguity_class", "n", "slope", "intercept", "stderr", "p_value"]


class Report(NamedTuple):
    summary: pd.DataFrame
    deltas: pd.DataFrame
    slopes: pd.DataFrame


def slope_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Order/marking regressions per phase and class; unfittable cells are NaN."""
    records = []
    for phase in PHASES:
        for cls in AMBIGUITY_CLASSES:
            fit = order_marking_slope(frame, phase, cls)
            row = {"phase": phase.value, "ambiguity_class": cls.value}
            if ml.is_some(fit):
                row.update(dict(fit.value))
            else:
                row.update(
                    n=0, slope=np.nan, intercept=np.nan, stderr=np.nan, p_value=np.nan
                )
            records.append(row)
    return pd.DataFrame.from_records(records, columns=SLOPE_COLUMNS)


def build_report(frame: pd.DataFrame, seed: int = 0) -> Report:
    return Report(
        summary=summarize(frame, seed=seed),
        deltas=delta_summary_table(frame),
        slopes=slope_table(frame),
    )


def write_report(out_dir: PathLike, seed: int = 0) -> Report:
    """Reads `eval.csv` of a run and writes `report.csv`, `deltas_summary.csv` and `slopes.csv`.

    Raises:
        SchemaError: eval.csv lacks a column
    """
    out_dir = Path(out_dir)
    report = build_report(read_table(out_dir / "eval.csv", EVAL_COLUMNS), seed=seed)
    atomic_write_csv(report.summary, out_dir / "report.csv")
    atomic_write_csv(report.deltas, out_dir / "deltas_summary.csv")
    atomic_write_csv(report.slopes, out_dir / "slopes.csv")
    return report


def format_report(report: Report) -> str:
    """Plain-text rendering of the report for the terminal."""
    means = report.summary.pivot_table(
        index=["phase", "ambiguity_class"], columns="measure", values="mean", sort=True
    )
    with pd.option_context("display.width", 160, "display.max_columns", 20):
        return "\n\n".join(
            [
                "means per phase and class\n" + means.round(3).to_string(),
                "ambiguous minus unambiguous\n"
                + report.deltas.round(4).to_string(index=False),
                "p_marked against p_sov\n"
                + report.slopes.round(4).to_string(index=False),
            ]
        )
