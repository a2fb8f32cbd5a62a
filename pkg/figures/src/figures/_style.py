"""Deterministic matplotlib setup shared by all renderers."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# Stable SVG element ids and no embedded timestamps, so reruns are
# byte-identical.
matplotlib.rcParams["svg.hashsalt"] = "comic-lab-figures"


def save_pair(fig, output_path):
    """Write ``<stem>.svg`` and ``<stem>.png`` next to ``output_path``.

    Returns the two paths written.
    """
    from pathlib import Path

    base = Path(output_path)
    stem = base.with_suffix("")
    svg = stem.with_suffix(".svg")
    png = stem.with_suffix(".png")
    stem.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg, format="svg", metadata={"Date": None})
    fig.savefig(png, format="png", dpi=150)
    plt.close(fig)
    return svg, png
