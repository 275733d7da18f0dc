"""SVG figures of production preferences and reconstruction accuracy.

Figures are written with a fixed hash salt and no date so the same input gives the
same file.
"""
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from casemark.evaluation import PHASES, delta_rows
from casemark.language import AMBIGUITY_CLASSES, LanguageSpec, expected_marking
from casemark.utils import PathLike, atomic_write_bytes, require_columns

PREFERENCE_COLUMNS = ["pair_id", "agent_id", "phase", "ambiguity_class", "p_sov", "p_marked"]
ACCURACY_COLUMNS = ["pair_id", "turn", "ambiguity_class", "accuracy"]

PHASE_COLORS = {"POST_SL": "tab:blue", "POST_RL": "tab:red"}
CLASS_COLORS = {"ALL": "black", "AMB": "tab:orange", "NOT_AMB": "tab:green"}
CLASS_TITLES = {"ALL": "all meanings", "AMB": "ambiguous", "NOT_AMB": "unambiguous"}


def _save_svg(fig: plt.Figure, path: PathLike) -> Path:
    buffer = io.BytesIO()
    with plt.rc_context({"svg.hashsalt": "casemark"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def _cloud(ax: plt.Axes, x: pd.Series, y: pd.Series, color: str, label: str):
    """Hollow circles per agent plus the mean with standard-deviation bars."""
    x, y = x.to_numpy(dtype=float), y.to_numpy(dtype=float)
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if x.size == 0:
        return
    ax.scatter(x, y, facecolors="none", edgecolors=color, alpha=0.6, s=24)
    x_err = np.nan_to_num(np.std(x, ddof=1)) if x.size > 1 else 0.0
    y_err = np.nan_to_num(np.std(y, ddof=1)) if y.size > 1 else 0.0
    ax.errorbar(
        x.mean(),
        y.mean(),
        xerr=x_err,
        yerr=y_err,
        fmt="o",
        color=color,
        markersize=8,
        capsize=3,
        label=label,
    )


def plot_preferences(
    frame: pd.DataFrame, language: LanguageSpec, path: PathLike
) -> Path:
    """Scatters each agent's (p_sov, p_marked) before and after interaction.

    One panel per ambiguity class plus a panel of the ambiguous-minus-unambiguous
    differences. The initial language is drawn as a solid diamond.

    Args:
        frame: tidy evaluation rows
        language: the language the agents learned
        path: where to write the SVG

    Raises:
        SchemaError: the frame lacks a needed column
    """
    require_columns(frame, PREFERENCE_COLUMNS, "evaluation table")
    fig, axes = plt.subplots(1, 4, figsize=(16, 4.4))

    for ax, cls in zip(axes, AMBIGUITY_CLASSES):
        subset = frame[frame["ambiguity_class"] == cls.value]
        for phase in PHASES:
            rows = subset[subset["phase"] == phase.value]
            _cloud(ax, rows["p_sov"], rows["p_marked"], PHASE_COLORS[phase.value], phase.value)
        ax.plot(
            [language.p_sov],
            [expected_marking(language)],
            marker="D",
            color="black",
            linestyle="none",
            label="initial language",
        )
        ax.set_xlim(-0.05, 1.05)
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(CLASS_TITLES[cls.value])
        ax.set_xlabel("proportion SOV")
        ax.set_ylabel("proportion marked")

    deltas = delta_rows(frame)
    ax = axes[-1]
    for phase in PHASES:
        rows = deltas[deltas["phase"] == phase.value]
        _cloud(ax, rows["d_sov"], rows["d_marked"], PHASE_COLORS[phase.value], phase.value)
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.axvline(0.0, color="grey", linewidth=0.8)
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_title("ambiguous − unambiguous")
    ax.set_xlabel("Δ proportion SOV")
    ax.set_ylabel("Δ proportion marked")

    axes[0].legend(loc="lower left", fontsize="small")
    fig.suptitle(language.name)
    fig.tight_layout()
    return _save_svg(fig, path)


def plot_accuracy(frame: pd.DataFrame, path: PathLike) -> Path:
    """Draws the pair-averaged held-out accuracy over interaction turns, one line per class.

    Raises:
        SchemaError: the frame lacks a needed column
    """
    require_columns(frame, ACCURACY_COLUMNS, "accuracy table")
    fig, ax = plt.subplots(figsize=(6, 4))

    for cls in AMBIGUITY_CLASSES:
        rows = frame[frame["ambiguity_class"] == cls.value]
        curve = rows.groupby("turn", sort=True)["accuracy"].agg(["mean", "std"]).fillna(0.0)
        if curve.empty:
            continue
        turns = curve.index.to_numpy(dtype=float)
        ax.plot(turns, curve["mean"], color=CLASS_COLORS[cls.value], label=CLASS_TITLES[cls.value])
        ax.fill_between(
            turns,
            curve["mean"] - curve["std"],
            curve["mean"] + curve["std"],
            color=CLASS_COLORS[cls.value],
            alpha=0.15,
        )

    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("interaction turn")
    ax.set_ylabel("reconstruction accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save_svg(fig, path)
