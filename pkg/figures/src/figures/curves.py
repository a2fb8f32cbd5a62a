"""Fitness-vs-particle-number curve figures from curve CSV artifacts."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._style import plt, save_pair

CURVE_HEADER = (
    "n", "realization", "aic", "aicc", "comic", "comicc",
    "entropy_term", "criterion_kind", "seed",
)
CRITERIA = ("aic", "aicc", "comic", "comicc")


class SchemaError(ValueError):
    """A CSV or spec does not match the documented schema."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


def load_curve_csv(path):
    """Parse a curve CSV, validating the header column by column.

    Returns ``(ns, values_by_criterion)`` where values are means over
    realizations at each distinct n (ascending).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header "
                              f"{','.join(CURVE_HEADER)}")
        for i, expected in enumerate(CURVE_HEADER):
            got = header[i] if i < len(header) else "<missing>"
            if got != expected:
                raise SchemaError(
                    f"{path}: header column {i + 1} is '{got}', expected "
                    f"'{expected}'", column=expected)
        if len(header) > len(CURVE_HEADER):
            raise SchemaError(
                f"{path}: unexpected extra column '{header[len(CURVE_HEADER)]}'",
                column=header[len(CURVE_HEADER)])
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    ns = np.array([int(r[0]) for r in rows])
    out_ns = np.unique(ns)
    values = {}
    for crit in CRITERIA:
        col = np.array([float(r[CURVE_HEADER.index(crit)]) for r in rows])
        values[crit] = np.array([col[ns == n].mean() for n in out_ns])
    return out_ns, values


@dataclass(frozen=True)
class CurvePlotSpec:
    """Declarative description of a curve figure."""

    inputs: tuple          # of (path, label, panel)
    output: str
    log_x: bool = True
    annotate_argmin: bool = True
    criterion: str = "comic"
    title: str = field(default="")

    _KEYS = {"inputs", "output", "log_x", "annotate_argmin", "criterion",
             "title"}
    _INPUT_KEYS = {"path", "label", "panel"}

    @classmethod
    def from_json(cls, path):
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(raw) - cls._KEYS
        if unknown:
            raise SchemaError(f"{path}: unknown spec key '{sorted(unknown)[0]}'",
                              column=sorted(unknown)[0])
        if "inputs" not in raw or "output" not in raw:
            raise SchemaError(f"{path}: spec requires 'inputs' and 'output'")
        inputs = []
        for i, item in enumerate(raw["inputs"]):
            unknown = set(item) - cls._INPUT_KEYS
            if unknown:
                raise SchemaError(
                    f"{path}: inputs[{i}] unknown key '{sorted(unknown)[0]}'",
                    column=sorted(unknown)[0])
            if "path" not in item:
                raise SchemaError(f"{path}: inputs[{i}] needs a 'path'")
            inputs.append((item["path"],
                           item.get("label", Path(item["path"]).stem),
                           item.get("panel", "")))
        crit = raw.get("criterion", "comic")
        if crit not in CRITERIA:
            raise SchemaError(f"{path}: unknown criterion '{crit}'", column=crit)
        return cls(inputs=tuple(inputs), output=raw["output"],
                   log_x=bool(raw.get("log_x", True)),
                   annotate_argmin=bool(raw.get("annotate_argmin", True)),
                   criterion=crit, title=raw.get("title", ""))


def plot_fitness_curves(spec: CurvePlotSpec):
    """Render one panel per distinct panel name, one series per input CSV.

    Returns the (svg, png) paths written.
    """
    panels = list(dict.fromkeys(panel for _, _, panel in spec.inputs))
    fig, axes = plt.subplots(1, len(panels), squeeze=False,
                             figsize=(5.0 * len(panels), 3.6))
    axes = axes[0]
    for ax, panel in zip(axes, panels):
        for path, label, p in spec.inputs:
            if p != panel:
                continue
            ns, values = load_curve_csv(path)
            y = values[spec.criterion]
            ax.plot(ns, y, marker="o", markersize=4, label=label)
            if spec.annotate_argmin:
                i = int(np.argmin(y))
                ax.plot([ns[i]], [y[i]], marker="v", markersize=9,
                        color="black", zorder=5)
                ax.annotate(f"n*={ns[i]}", (ns[i], y[i]),
                            textcoords="offset points", xytext=(4, 6),
                            fontsize=8)
        if spec.log_x:
            ax.set_xscale("log")
        ax.set_xlabel("particle number n")
        ax.set_ylabel(spec.criterion.upper())
        if panel:
            ax.set_title(panel)
        ax.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return save_pair(fig, spec.output)
