import json
from pathlib import Path

import numpy as np
import matplotlib.pyplot as plt
import pytest

from protocolplots import (
    DatasetError,
    FigureSpec,
    build_figure,
    render,
    zero_centered_limits,
)
from protocolplots.render import main, read_wigner_grid

SAMPLES = Path(__file__).resolve().parents[1] / "sample_data"

FIG6_PANELS = ["wigner_phi_p0_125.csv", "wigner_phi_p0_0625.csv",
               "wigner_phi_m0_0625.csv", "wigner_phi_m0_125.csv"]


def spec_dict(**kw):
    base = {"kind": "wigner_heatmap", "inputs": [], "output": "out.png"}
    base.update(kw)
    return base


def write_spec(tmp_path, **kw):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec_dict(**kw)))
    return p


def test_fig6_four_panel_strip(tmp_path):
    spec_path = write_spec(
        tmp_path,
        inputs=[str(SAMPLES / n) for n in FIG6_PANELS],
        panel_titles=["phi=1/8", "phi=1/16", "phi=-1/16", "phi=-1/8"],
        manifest=str(SAMPLES / "manifest_fig6.json"),
        output=str(tmp_path / "fig6.png"),
    )
    spec = FigureSpec.from_json(spec_path)
    fig = build_figure(spec)
    # four heatmap panels (plus their colorbars)
    heat_axes = [ax for ax in fig.axes
                 if ax.get_label() != "<colorbar>" and ax.collections]
    assert len(heat_axes) == 4
    plt.close(fig)
    out = render(spec)
    assert out.exists() and out.stat().st_size > 10_000


def test_zero_centered_colormap_on_negative_panel(tmp_path):
    # the shipped phi panels contain genuinely negative regions
    x, p, vals = read_wigner_grid(str(SAMPLES / "wigner_phi_p0_125.csv"))
    assert float(np.min(vals)) < 0.0 < float(np.max(vals))
    lo, hi = zero_centered_limits(vals)
    assert lo == -hi
    spec = FigureSpec(kind="wigner_heatmap",
                      inputs=(str(SAMPLES / "wigner_phi_p0_125.csv"),),
                      output=str(tmp_path / "w.png"))
    fig = build_figure(spec)
    mesh = fig.axes[0].collections[0]
    vmin, vmax = mesh.get_clim()
    assert vmin == -vmax
    assert vmax == pytest.approx(float(np.max(np.abs(vals))))
    plt.close(fig)


def test_fig5_three_curves_with_qfi_uppermost(tmp_path):
    spec = FigureSpec(kind="lines", inputs=(str(SAMPLES / "fig5.csv"),),
                      output=str(tmp_path / "fig5.png"),
                      manifest=str(SAMPLES / "manifest_fig5.json"))
    fig = build_figure(spec)
    ax = fig.axes[0]
    assert len(ax.lines) == 3
    by_label = {ln.get_label(): ln for ln in ax.lines}
    assert set(by_label) == {"QFI", "CFI (phi basis)", "CFI (homodyne)"}
    first_x = min(by_label["QFI"].get_xdata())
    at_first = {name: ln.get_ydata()[np.argmin(ln.get_xdata())]
                for name, ln in by_label.items()}
    assert at_first["QFI"] >= at_first["CFI (phi basis)"] >= at_first["CFI (homodyne)"]
    plt.close(fig)
    assert render(spec).exists()


def test_time_curves_kind(tmp_path):
    spec = FigureSpec(kind="time_curves", inputs=(str(SAMPLES / "fig3.csv"),),
                      output=str(tmp_path / "fig3.svg"), log_x=False)
    out = render(spec)
    assert out.suffix == ".svg" and out.exists()
    fig = build_figure(spec)
    assert len(fig.axes[0].lines) == 3  # one curve per threshold
    plt.close(fig)


def test_empty_but_valid_dataset_renders_empty_axes(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t1,t2,branch,mode,cfi_homodyne,cfi_phi,qfi,unreachable\n")
    spec_path = write_spec(tmp_path, kind="lines", inputs=[str(empty)],
                           output=str(tmp_path / "empty.png"))
    rc = main(["render", str(spec_path)])
    assert rc == 0
    assert (tmp_path / "empty.png").exists()
    fig = build_figure(FigureSpec.from_json(spec_path))
    assert len(fig.axes[0].lines) == 0
    plt.close(fig)


def test_manifest_schema_mismatch_refused(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text(json.dumps({"schema_version": 99}))
    spec = FigureSpec(kind="lines", inputs=(str(SAMPLES / "fig5.csv"),),
                      output=str(tmp_path / "x.png"), manifest=str(bad))
    with pytest.raises(DatasetError, match="schema"):
        build_figure(spec)


def test_missing_columns_rejected(tmp_path):
    malformed = tmp_path / "bad.csv"
    malformed.write_text("a,b\n1,2\n")
    spec = FigureSpec(kind="time_curves", inputs=(str(malformed),),
                      output=str(tmp_path / "x.png"))
    with pytest.raises(DatasetError, match="missing column"):
        build_figure(spec)
    spec2 = FigureSpec(kind="wigner_heatmap", inputs=(str(malformed),),
                       output=str(tmp_path / "x.png"))
    with pytest.raises(DatasetError, match="missing column"):
        build_figure(spec2)


def test_spec_validation(tmp_path):
    with pytest.raises(DatasetError, match="kind"):
        FigureSpec(kind="pie", inputs=("a.csv",), output="x.png")
    with pytest.raises(DatasetError, match="input"):
        FigureSpec(kind="lines", inputs=(), output="x.png")
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"kind": "lines", "inputs": ["a.csv"],
                             "output": "x.png", "surprise": 1}))
    with pytest.raises(DatasetError, match="unknown figure-spec keys"):
        FigureSpec.from_json(p)


def test_cli_error_exit(tmp_path):
    spec_path = write_spec(tmp_path, kind="lines",
                           inputs=[str(tmp_path / "missing.csv")],
                           output=str(tmp_path / "x.png"))
    assert main(["render", str(spec_path)]) == 1


def test_fig4_style_dataset_groups_by_branch(tmp_path):
    data = tmp_path / "fig4.csv"
    data.write_text(
        "t1,t2,branch,mode,cfi_homodyne,cfi_phi,qfi,unreachable\n"
        "0.01,0,gaussian_only,immediate,2.5,nan,2.5,0\n"
        "0.01,0,nonGaussian,immediate,6.1,nan,7.0,0\n"
        "0.05,0,gaussian_only,immediate,4.0,nan,4.0,0\n"
        "0.05,0,nonGaussian,immediate,8.0,nan,9.0,0\n")
    spec = FigureSpec(kind="lines", inputs=(str(data),),
                      output=str(tmp_path / "fig4.png"))
    fig = build_figure(spec)
    labels = sorted(ln.get_label() for ln in fig.axes[0].lines)
    # cfi_phi is all-nan so only homodyne CFI and QFI per branch appear
    assert len(labels) == 4
    assert any("gaussian_only" in lb for lb in labels)
    assert any("nonGaussian" in lb for lb in labels)
    plt.close(fig)
