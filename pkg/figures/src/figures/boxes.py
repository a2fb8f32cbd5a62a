"""Estimate box plots from run-record JSON + estimates CSV artifacts."""

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from ._style import plt, save_pair
from .curves import SchemaError

ESTIMATE_HEADER = (
    "group", "method", "k", "spacing_mode", "n", "realization",
    "v_hat", "D_hat", "criterion_value", "converged", "iterations", "seed",
)
MIN_REALIZATIONS = 5


def box_stats(values):
    """Quartile/whisker statistics under the 1.5*IQR rule.

    Returns a dict usable with matplotlib's ``Axes.bxp``: median, q1, q3,
    whisker ends (most extreme data within 1.5*IQR of the box), fliers.
    """
    values = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    whislo = float(inside.min())
    whishi = float(inside.max())
    fliers = values[(values < lo_fence) | (values > hi_fence)]
    return {"med": float(med), "q1": float(q1), "q3": float(q3),
            "whislo": whislo, "whishi": whishi, "fliers": list(map(float, fliers))}


def _load_estimates(record_path):
    """Read a run record and its estimates CSV; return (true_params, groups).

    groups maps label -> {"v_hat": array, "D_hat": array}.
    """
    record_path = Path(record_path)
    record = json.loads(record_path.read_text(encoding="utf-8"))
    params = record.get("config", {}).get("params", {})
    csv_name = next((o for o in record.get("outputs", [])
                     if o == "estimates.csv"), None)
    if csv_name is None:
        raise SchemaError(f"{record_path}: record lists no estimates.csv")
    path = record_path.parent / csv_name
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for i, expected in enumerate(ESTIMATE_HEADER):
            got = header[i] if i < len(header) else "<missing>"
            if got != expected:
                raise SchemaError(
                    f"{path}: header column {i + 1} is '{got}', expected "
                    f"'{expected}'", column=expected)
        groups = {}
        for row in reader:
            g = groups.setdefault(row[0], {"v_hat": [], "D_hat": []})
            g["v_hat"].append(float(row[ESTIMATE_HEADER.index("v_hat")]))
            g["D_hat"].append(float(row[ESTIMATE_HEADER.index("D_hat")]))
    return params, groups


def plot_estimate_boxes(record_paths, output_path):
    """Box/whisker of v-hat and D-hat per estimation group, with reference
    lines at the true parameter values.

    Groups with fewer than 5 realizations are skipped with a warning.
    Returns the (svg, png) paths written.
    """
    labels = []
    stats_v, stats_d = [], []
    ref_v = ref_d = None
    for rp in record_paths:
        params, groups = _load_estimates(rp)
        ref_v = params.get("v", ref_v)
        ref_d = params.get("D", ref_d)
        for label, data in groups.items():
            count = len(data["v_hat"])
            if count < MIN_REALIZATIONS:
                warnings.warn(
                    f"group '{label}' has {count} realizations "
                    f"(< {MIN_REALIZATIONS}); skipped", stacklevel=2)
                continue
            labels.append(label)
            stats_v.append(box_stats(data["v_hat"]) | {"label": label})
            stats_d.append(box_stats(data["D_hat"]) | {"label": label})
    if not labels:
        raise SchemaError("no group with enough realizations to plot")
    fig, (ax_v, ax_d) = plt.subplots(1, 2, figsize=(5.0 + 0.8 * len(labels), 3.8))
    for ax, stats, ref, name in ((ax_v, stats_v, ref_v, "v"),
                                 (ax_d, stats_d, ref_d, "D")):
        ax.bxp(stats, showfliers=True)
        if ref is not None:
            ax.axhline(ref, color="tab:red", linewidth=1, linestyle="--")
        ax.set_ylabel(f"{name} estimate")
        ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    return save_pair(fig, output_path)
