"""Tests for the figures package, including the release criterion:
render E1 and E2 outputs, idempotent reruns, named-column header diagnostics.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

figures = pytest.importorskip("figures")

from figures import (  # noqa: E402
    CurvePlotSpec,
    SchemaError,
    box_stats,
    load_curve_csv,
    plot_estimate_boxes,
    plot_fitness_curves,
)
from figures.cli import EXIT_SCHEMA, main  # noqa: E402

HEADER = "n,realization,aic,aicc,comic,comicc,entropy_term,criterion_kind,seed"


def _write_curve(path, rows):
    lines = [HEADER] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _row(n, realization=0, base=-20.0):
    aic = base + 0.1 * realization
    comic = aic + np.log(n)
    return (n, realization, aic, aic, comic, comic, np.log(n), "iid", 42)


@pytest.fixture()
def curve_csv(tmp_path):
    path = tmp_path / "curve.csv"
    _write_curve(path, [_row(n) for n in (100, 1000, 10000)])
    return path


# -- schema validation -------------------------------------------------------

def test_mutated_header_names_column(tmp_path, curve_csv):
    text = curve_csv.read_text().replace("comicc", "comic_c", 1)
    bad = tmp_path / "bad.csv"
    bad.write_text(text)
    with pytest.raises(SchemaError) as exc:
        load_curve_csv(bad)
    assert exc.value.column == "comicc"
    assert "comicc" in str(exc.value)


def test_mutated_header_cli_exit_code(tmp_path, curve_csv):
    bad = tmp_path / "bad.csv"
    bad.write_text(curve_csv.read_text().replace("entropy_term", "entropy", 1))
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": [{"path": str(bad), "label": "x"}],
        "output": str(tmp_path / "fig.svg"),
    }))
    assert main(["curves", str(spec)]) == EXIT_SCHEMA


def test_missing_and_extra_columns_rejected(tmp_path):
    short = tmp_path / "short.csv"
    short.write_text("n,realization,aic\n1,0,1.0\n")
    with pytest.raises(SchemaError) as exc:
        load_curve_csv(short)
    assert exc.value.column == "aicc"
    extra = tmp_path / "extra.csv"
    extra.write_text(HEADER + ",bonus\n" + "100,0,1,1,2,2,4.6,iid,42,9\n")
    with pytest.raises(SchemaError) as exc:
        load_curve_csv(extra)
    assert exc.value.column == "bonus"


def test_unknown_spec_key_rejected(tmp_path, curve_csv):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": [{"path": str(curve_csv)}],
        "output": str(tmp_path / "f.svg"),
        "colour": "red",
    }))
    with pytest.raises(SchemaError, match="colour"):
        CurvePlotSpec.from_json(spec)


# -- curve rendering ---------------------------------------------------------

def test_load_aggregates_realizations(tmp_path):
    path = tmp_path / "c.csv"
    _write_curve(path, [_row(100, r) for r in range(4)] + [_row(1000, 0)])
    ns, values = load_curve_csv(path)
    assert list(ns) == [100, 1000]
    assert values["aic"][0] == pytest.approx(-20.0 + 0.1 * 1.5)


def test_single_row_csv_renders(tmp_path):
    path = tmp_path / "one.csv"
    _write_curve(path, [_row(500)])
    spec = CurvePlotSpec(inputs=((str(path), "only", ""),),
                         output=str(tmp_path / "one.svg"))
    svg, png = plot_fitness_curves(spec)
    assert svg.exists() and png.exists()


def test_curves_idempotent(tmp_path, curve_csv):
    spec = CurvePlotSpec(inputs=((str(curve_csv), "k=30", "MTPT"),),
                         output=str(tmp_path / "fig.svg"))
    svg1, png1 = plot_fitness_curves(spec)
    first = (svg1.read_bytes(), png1.read_bytes())
    svg2, png2 = plot_fitness_curves(spec)
    assert (svg2.read_bytes(), png2.read_bytes()) == first


def test_identical_csvs_identical_images(tmp_path, curve_csv):
    twin = tmp_path / "twin.csv"
    twin.write_text(curve_csv.read_text())
    out = []
    for i, src in enumerate((curve_csv, twin)):
        spec = CurvePlotSpec(inputs=((str(src), "k=30", ""),),
                             output=str(tmp_path / f"f{i}.svg"))
        svg, png = plot_fitness_curves(spec)
        out.append((svg.read_bytes(), png.read_bytes()))
    assert out[0] == out[1]


def test_rendering_does_not_mutate_input(tmp_path, curve_csv):
    before = curve_csv.read_bytes()
    spec = CurvePlotSpec(inputs=((str(curve_csv), "k", ""),),
                         output=str(tmp_path / "f.svg"))
    plot_fitness_curves(spec)
    assert curve_csv.read_bytes() == before


# -- box statistics and rendering --------------------------------------------

def test_box_stats_quartile_arithmetic():
    # quartiles (0.9, 1.0, 1.1): IQR 0.2, fences at 0.6 and 1.4; whiskers are
    # the most extreme data inside the fences.
    values = [0.5, 0.9, 0.9, 1.0, 1.1, 1.1, 1.3]
    s = box_stats(values)
    assert s["q1"] == pytest.approx(0.9)
    assert s["med"] == pytest.approx(1.0)
    assert s["q3"] == pytest.approx(1.1)
    assert s["whislo"] == pytest.approx(0.9)   # 0.5 < 0.6 fence -> flier
    assert s["whishi"] == pytest.approx(1.3)
    assert s["fliers"] == [0.5]


def test_box_stats_degenerate():
    s = box_stats([1.0] * 6)
    assert s["med"] == s["q1"] == s["q3"] == s["whislo"] == s["whishi"] == 1.0
    assert s["fliers"] == []


def _fake_record(tmp_path, groups, v=1.0, D=1.0):
    lines = ["group,method,k,spacing_mode,n,realization,v_hat,D_hat,"
             "criterion_value,converged,iterations,seed"]
    for label, (vs, ds) in groups.items():
        for i, (vv, dd) in enumerate(zip(vs, ds)):
            lines.append(f"{label},mtpt,30,uniform,1000,{i},{vv},{dd},"
                         f"-1.0,True,50,{i}")
    (tmp_path / "estimates.csv").write_text("\n".join(lines) + "\n")
    record = {"config": {"params": {"v": v, "D": D, "x0": 0.0, "T": 1.0}},
              "outputs": ["estimates.csv"]}
    path = tmp_path / "record.json"
    path.write_text(json.dumps(record))
    return path


def test_boxes_render_and_reference_line(tmp_path):
    rng = np.random.default_rng(0)
    rec = _fake_record(tmp_path, {
        "g1": (1.0 + 0.05 * rng.standard_normal(20),
               1.0 + 0.05 * rng.standard_normal(20)),
    })
    svg, png = plot_estimate_boxes([rec], tmp_path / "boxes.svg")
    assert svg.exists() and png.exists()


def test_boxes_skip_small_group_with_warning(tmp_path):
    rec = _fake_record(tmp_path, {
        "big": ([1.0] * 6, [1.0] * 6),
        "small": ([1.0] * 3, [1.0] * 3),
    })
    with pytest.warns(UserWarning, match="small"):
        plot_estimate_boxes([rec], tmp_path / "boxes.svg")


def test_boxes_all_groups_too_small_is_error(tmp_path):
    rec = _fake_record(tmp_path, {"only": ([1.0] * 2, [1.0] * 2)})
    with pytest.warns(UserWarning):
        with pytest.raises(SchemaError):
            plot_estimate_boxes([rec], tmp_path / "boxes.svg")


def test_boxes_idempotent(tmp_path):
    rec = _fake_record(tmp_path, {"g": ([0.9, 1.0, 1.1, 1.0, 1.05, 0.95],
                                        [1.1, 1.0, 0.9, 1.0, 0.98, 1.02])})
    svg, png = plot_estimate_boxes([rec], tmp_path / "b.svg")
    first = (svg.read_bytes(), png.read_bytes())
    svg, png = plot_estimate_boxes([rec], tmp_path / "b.svg")
    assert (svg.read_bytes(), png.read_bytes()) == first


# -- end-to-end against the harness artifacts --------------------------------

HAVE_HARNESS = shutil.which("comic-lab") is not None


@pytest.fixture(scope="module")
def harness_outputs(tmp_path_factory):
    if not HAVE_HARNESS:
        pytest.skip("comic-lab CLI not installed")
    base = tmp_path_factory.mktemp("runs")
    for exp in ("E1", "E2"):
        cfg = base / f"{exp.lower()}.json"
        cfg.write_text(json.dumps({"experiment": exp}))
        subprocess.run(["comic-lab", "run", str(cfg), "--out",
                        str(base / exp)], check=True, capture_output=True,
                       timeout=1200)
    return base


def test_render_e1_curves(harness_outputs, tmp_path):
    csvs = sorted((harness_outputs / "E1").glob("curve_*.csv"))
    assert len(csvs) == 3
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": [{"path": str(p), "label": p.stem.removeprefix("curve_"),
                    "panel": "MTPT"} for p in csvs],
        "output": str(tmp_path / "fig1.svg"),
    }))
    assert main(["curves", str(spec)]) == 0
    first = (tmp_path / "fig1.svg").read_bytes()
    assert main(["curves", str(spec)]) == 0
    assert (tmp_path / "fig1.svg").read_bytes() == first
    assert (tmp_path / "fig1.png").exists()


def test_render_e2_curves_and_boxes(harness_outputs, tmp_path):
    e2 = harness_outputs / "E2"
    csvs = sorted(e2.glob("curve_*.csv"))
    assert csvs, "E2 should write a sweep curve"
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": [{"path": str(p), "label": p.stem} for p in csvs],
        "output": str(tmp_path / "fig_e2.svg"),
    }))
    assert main(["curves", str(spec)]) == 0
    assert main(["boxes", str(e2 / "record.json"), "--out",
                 str(tmp_path / "fig2")]) == 0
    first = ((tmp_path / "fig2.svg").read_bytes(),
             (tmp_path / "fig2.png").read_bytes())
    assert main(["boxes", str(e2 / "record.json"), "--out",
                 str(tmp_path / "fig2")]) == 0
    assert ((tmp_path / "fig2.svg").read_bytes(),
            (tmp_path / "fig2.png").read_bytes()) == first
