"""Command-line entry point: figure datasets, state dumps, self tests.

Every run writes a manifest.json (resolved config, versions, backend,
tolerances, wall time) next to its outputs, also on failure, where the
failing stage is recorded and a machine-readable error.json is emitted.
Numeric CSV cells are printed with 12 significant digits so identical
configs produce bit-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__, _kernels, core, dynamics, fock, metrology, wigner

ENV_OUTDIR = "HYBRIDSPIN_OUTDIR"
COMMANDS = ("state", "fig2", "fig3", "fig4", "fig5", "fig6", "sweep", "selftest")
SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "command", "kappa", "gamma", "kappa_over_gamma", "n_atoms", "eta",
    "p_threshold", "t1", "t2", "t1_grid", "thresholds", "phis", "mode",
    "branches", "output_dir", "format", "jobs", "grid_points", "n_max",
    "with_phi",
}


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_table(base: Path, header: list[str], rows: list[tuple], fmt: str) -> Path:
    """Dataset table as CSV (default) or a columns/rows JSON document."""
    if fmt == "json":
        def cell(v):
            if isinstance(v, float):
                if math.isnan(v):
                    return None
                if math.isinf(v):
                    return "inf" if v > 0 else "-inf"
                return float(_fmt(v))
            return v

        out = base.with_suffix(".json")
        doc = {"columns": header, "rows": [[cell(v) for v in row] for row in rows]}
        out.write_text(json.dumps(doc, sort_keys=True))
        return out
    out = base.with_suffix(".csv")
    write_csv(out, header, rows)
    return out


class ConfigError(ValueError):
    pass


def load_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    overrides = {
        "command": args.command,
        "kappa": args.kappa,
        "gamma": args.gamma,
        "kappa_over_gamma": args.kappa_over_gamma,
        "n_atoms": args.n_atoms,
        "eta": args.eta,
        "p_threshold": args.p_threshold,
        "t1": args.t1,
        "t2": args.t2,
        "thresholds": args.thresholds,
        "phis": args.phis,
        "mode": args.mode,
        "output_dir": args.output_dir,
        "format": args.format,
        "jobs": args.jobs,
        "t1_grid": args.t1_grid,
    }
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    cfg.setdefault("command", None)
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg['command']!r}")
    cfg.setdefault("gamma", 1.0)
    if "kappa_over_gamma" in cfg and cfg.get("kappa_over_gamma") is not None:
        if cfg["gamma"] <= 0:
            raise ConfigError("kappa_over_gamma needs gamma > 0")
        cfg["kappa"] = float(cfg["kappa_over_gamma"]) * cfg["gamma"]
    cfg.setdefault("kappa", 1.0)
    cfg.setdefault("n_atoms", 500)
    cfg.setdefault("eta", 1.0)
    cfg.setdefault("p_threshold", 0.2)
    cfg.setdefault("t1", 0.0)
    cfg.setdefault("t2", 0.0)
    cfg.setdefault("mode", metrology.MODE_IMMEDIATE)
    cfg.setdefault("format", "csv")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    cfg.setdefault("jobs", 1)
    cfg.setdefault("output_dir", os.environ.get(ENV_OUTDIR, "."))
    cfg.setdefault("thresholds", [0.0, 0.2, 0.5, 0.9])
    cfg.setdefault("phis", [0.125, 0.0625, -0.0625, -0.125])
    cfg.setdefault("branches",
                   [metrology.BRANCH_GAUSSIAN, metrology.BRANCH_NONGAUSSIAN])
    return cfg


def _params(cfg: dict, t1: float = 0.0, t2: float = 0.0) -> core.ProtocolParams:
    return core.ProtocolParams(
        kappa=float(cfg["kappa"]), gamma=float(cfg["gamma"]),
        n_atoms=int(cfg["n_atoms"]), eta=float(cfg["eta"]),
        t1=t1, t2=t2, p_threshold=float(cfg["p_threshold"]))


def _grid_from_config(cfg: dict, default: np.ndarray) -> np.ndarray:
    g = cfg.get("t1_grid")
    if g is None:
        return default
    if isinstance(g, str):
        vals = [float(v) for v in g.split(",")]
    elif isinstance(g, dict):
        unknown = set(g) - {"start", "stop", "num", "spacing"}
        if unknown:
            raise ConfigError(f"unknown t1_grid keys: {sorted(unknown)}")
        num = int(g.get("num", 25))
        if g.get("spacing", "linear") == "log":
            vals = np.geomspace(float(g["start"]), float(g["stop"]), num).tolist()
        else:
            vals = np.linspace(float(g["start"]), float(g["stop"]), num).tolist()
    else:
        vals = [float(v) for v in g]
    return np.asarray(vals, dtype=float)


def default_fig3_grid() -> np.ndarray:
    """Dense close to t1 = 0: the shallow runtime minimum at moderate
    thresholds sits at microscopic t1."""
    return np.unique(np.concatenate([
        [0.0],
        np.geomspace(1e-4, 0.02, 40),
        np.linspace(0.03, 0.8, 40),
    ]))


def default_fig4_grid() -> np.ndarray:
    # capped at gamma*t1 = 1.2: past that the physical state's thermal
    # occupation outgrows the Fock cutoff cap (see frame_qfi)
    return np.unique(np.concatenate([[0.0], np.geomspace(1e-3, 1.2, 30)]))


def default_fig5_grid() -> np.ndarray:
    return np.geomspace(0.005, 1.2, 12)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _dump_wigner(w: wigner.WignerGrid, path: Path, fmt: str) -> Path:
    if fmt == "csv":
        out = path.with_suffix(".csv")
        wigner.to_csv(w, out)
    else:
        out = path.with_suffix(".wig")
        wigner.to_binary(w, out)
    return out


def cmd_state(cfg: dict, outdir: Path) -> list[Path]:
    p = _params(cfg, float(cfg["t1"]), float(cfg["t2"]))
    w_post, pre, c = metrology.nongaussian_state(p)
    rho = fock.reconstruct(w_post, cfg.get("n_max"))
    moments = {
        "pre_click": {"var_x": pre.var_x, "var_p": pre.var_p},
        "bopp_damping": c,
        "post_click": dict(zip(("var_x", "var_p"),
                               metrology.post_click_variances(pre, c))),
        "detection_probability": dynamics.detection_probability(p, p.t1, p.t2),
    }
    files = []
    mpath = outdir / "moments.json"
    mpath.write_text(json.dumps(moments, indent=2, sort_keys=True))
    files.append(mpath)
    files.append(_dump_wigner(w_post, outdir / "wigner_post", cfg["format"]))
    fpath = outdir / "fock.json"
    fpath.write_text(json.dumps(fock.to_json_dict(rho), sort_keys=True))
    files.append(fpath)
    return files


def cmd_fig2(cfg: dict, outdir: Path) -> list[Path]:
    p = _params(cfg, float(cfg["t1"]), float(cfg["t2"]))
    stage = core.ProtocolStage()
    moments = core.initial_scs()

    # walk the stage machine first so one shared grid can hold every panel
    stage = stage.advance(core.StageTag.PHASE_I, p.t1)
    after1 = dynamics.integrate(lambda m, t: dynamics.phase1_rhs(m, p, t),
                                moments, p.t1).moments
    stage = stage.advance(core.StageTag.ROTATED)
    rotated = core.rotate_half_pi(after1)
    stage = stage.advance(core.StageTag.PHASE_II, p.t2)
    pre = dynamics.pre_click_moments(p)
    stage = stage.advance(core.StageTag.POST_CLICK)
    ctx = wigner.SubtractionContext.for_times(p.gamma, p.t1, p.t2, pre)
    vx_post, vp_post = metrology.post_click_variances(pre, ctx.bopp_damping)

    n = int(cfg.get("grid_points") or 512)
    vmax = max(moments.var_x, after1.var_x, after1.var_p, pre.var_x, pre.var_p,
               vx_post, vp_post)
    spec = metrology.metrology_grid_spec(vmax, vmax, n_x=n, n_p=n)

    snaps = [
        ("initial", wigner.gaussian_wigner(moments, spec)),
        ("phase1", wigner.gaussian_wigner(after1, spec)),
        ("rotated", wigner.gaussian_wigner(rotated, spec)),
        ("phase2", wigner.gaussian_wigner(pre, spec)),
        ("postclick", wigner.photon_subtract(wigner.gaussian_wigner(pre, spec),
                                             pre, ctx)),
    ]
    files = []
    for name, grid in snaps:
        files.append(_dump_wigner(grid, outdir / f"wigner_{name}", cfg["format"]))
    return files


def cmd_fig3(cfg: dict, outdir: Path) -> list[Path]:
    grid = _grid_from_config(cfg, default_fig3_grid())
    rows = []
    for thr in cfg["thresholds"]:
        p = _params(cfg)
        p = core.ProtocolParams(kappa=p.kappa, gamma=p.gamma, n_atoms=p.n_atoms,
                                eta=p.eta, p_threshold=float(thr))
        for tb in dynamics.total_time_curve(grid.tolist(), p):
            rows.append((thr, tb.t1, tb.t2, tb.total, int(tb.reachable)))
    out = write_table(outdir / "fig3", ["threshold", "t1", "t2", "total", "reachable"],
                      rows, cfg["format"])
    return [out]


def _fisher_rows(reports: list[metrology.FisherReport]) -> list[tuple]:
    rows = []
    for r in reports:
        rows.append((r.t1, r.t2, r.branch, r.mode,
                     r.cfi_homodyne,
                     r.cfi_phi if r.cfi_phi is not None else math.nan,
                     r.qfi, int(r.unreachable)))
    return rows


_FISHER_HEADER = ["t1", "t2", "branch", "mode", "cfi_homodyne", "cfi_phi",
                  "qfi", "unreachable"]


def cmd_fig4(cfg: dict, outdir: Path) -> list[Path]:
    grid = _grid_from_config(cfg, default_fig4_grid())
    spec = metrology.ScenarioSpec(_params(cfg), tuple(grid.tolist()),
                                  post_selection=cfg["mode"],
                                  comparisons=tuple(cfg["branches"]))
    reports = metrology.scenario_fig4(spec, jobs=int(cfg["jobs"]))
    out = write_table(outdir / "fig4", _FISHER_HEADER, _fisher_rows(reports),
                      cfg["format"])
    return [out]


def cmd_fig5(cfg: dict, outdir: Path) -> list[Path]:
    grid = _grid_from_config(cfg, default_fig5_grid())
    spec = metrology.ScenarioSpec(_params(cfg), tuple(grid.tolist()),
                                  post_selection=cfg["mode"])
    reports = metrology.scenario_fig5(spec, jobs=int(cfg["jobs"]))
    out = write_table(outdir / "fig5", _FISHER_HEADER, _fisher_rows(reports),
                      cfg["format"])
    return [out]


def cmd_fig6(cfg: dict, outdir: Path) -> list[Path]:
    files = []
    n = int(cfg.get("grid_points") or 512)
    spec = wigner.GridSpec(-4.0, 4.0, n, -4.0, 4.0, n)
    for ph in cfg["phis"]:
        grid = wigner.phi_wigner(wigner.PhiState(float(ph)), spec)
        tag = f"{ph:+.6g}".replace("+", "p").replace("-", "m").replace(".", "_")
        files.append(_dump_wigner(grid, outdir / f"wigner_phi_{tag}", cfg["format"]))
    return files


def cmd_sweep(cfg: dict, outdir: Path) -> list[Path]:
    grid = _grid_from_config(cfg, default_fig4_grid())
    spec = metrology.ScenarioSpec(_params(cfg), tuple(grid.tolist()),
                                  post_selection=cfg["mode"],
                                  comparisons=tuple(cfg["branches"]))
    want_phi = metrology.BRANCH_NONGAUSSIAN in cfg["branches"] and cfg.get("with_phi", True)
    reports = metrology._run_points(spec, want_phi=want_phi, jobs=int(cfg["jobs"]))
    out = write_table(outdir / "sweep", _FISHER_HEADER, _fisher_rows(reports),
                      cfg["format"])
    return [out]


def cmd_selftest(cfg: dict, outdir: Path) -> list[Path]:
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))

    m0 = core.initial_scs()
    check("initial SCS is vacuum", m0.var_x == 0.5 and m0.var_p == 0.5)
    check("rotation is an involution",
          core.rotate_half_pi(core.rotate_half_pi(core.GaussianMoments(0.1, 0.9)))
          == core.GaussianMoments(0.1, 0.9))

    p = core.ProtocolParams(kappa=1.0, gamma=0.0, n_atoms=500, t1=0.008, t2=0.004)
    after1 = dynamics.integrate(lambda m, t: dynamics.phase1_rhs(m, p, t), m0, p.t1)
    rotated = core.rotate_half_pi(after1.moments)
    after2 = dynamics.integrate(lambda m, t: dynamics.phase2_rhs(m, p, t), rotated, p.t2)
    prod = after2.moments.uncertainty_product
    check("minimum uncertainty at gamma=0", abs(prod - 0.25) < 1e-8, f"VxVp={prod:.12f}")

    pg = core.ProtocolParams(kappa=1.0, gamma=1.0, n_atoms=500, t1=0.3, t2=0.05)
    cf = dynamics.closed_form_final(pg)
    num = dynamics.pre_click_moments(core.ProtocolParams(
        kappa=1.0, gamma=0.0, n_atoms=500, t1=0.0, t2=0.0))
    after1 = dynamics.integrate(lambda m, t: dynamics.phase1_rhs(m, pg, t), m0, pg.t1)
    rot = core.rotate_half_pi(after1.moments)
    after2 = dynamics.integrate(lambda m, t: dynamics.phase2_rhs(m, pg, t), rot, pg.t2)
    rel = max(abs(cf.var_x - after2.moments.var_x) / cf.var_x,
              abs(cf.var_p - after2.moments.var_p) / cf.var_p)
    check("closed form matches integrator", rel < 1e-6, f"rel={rel:.2e}")

    p_zero = core.ProtocolParams(kappa=1.0, gamma=1.0, n_atoms=500, p_threshold=0.0)
    res_zero = dynamics.t2_for_threshold(0.1, p_zero)
    check("threshold 0 gives t2 = 0", res_zero.reachable and res_zero.t2 == 0.0)

    ai0 = wigner.airy_ai(0.0)
    check("Ai(0) anchor", abs(ai0 - 0.3550280538878172) < 1e-12, f"Ai(0)={ai0:.15f}")
    z = np.linspace(-5, 5, 12001)
    ai = wigner.airy_ai_array(z)
    h = z[1] - z[0]
    resid = np.max(np.abs((ai[2:] - 2 * ai[1:-1] + ai[:-2]) / h**2 - z[1:-1] * ai[1:-1]))
    check("Airy ODE residual", resid < 1e-6, f"max resid={resid:.2e}")

    wv = wigner.gaussian_wigner(m0)
    check("vacuum grid normalized", abs(wv.integral() - 1.0) < 1e-6)
    ctx = wigner.SubtractionContext(1.0, 0.5)
    w1 = wigner.photon_subtract(wv, m0, ctx)
    check("photon subtraction shows negativity", float(np.min(w1.values)) < 0.0,
          f"min W={np.min(w1.values):.6f}")
    pur = wigner.purity(wv)
    check("vacuum purity", abs(pur - 1.0) < 1e-4, f"purity={pur:.6f}")

    rho = fock.reconstruct(w1, 16)
    check("click on vacuum is a single excitation",
          abs(rho.elements[1, 1].real - 1.0) < 1e-5)
    check("QFI anchor |1>", abs(fock.qfi_displacement(rho) - 6.0) < 1e-3)

    ok = all(c[1] for c in checks)
    out = outdir / "selftest.json"
    out.write_text(json.dumps(
        {"passed": ok, "checks": [{"name": n, "ok": o, "detail": d}
                                  for n, o, d in checks]}, indent=2))
    if not ok:
        raise RuntimeError("selftest failures: "
                           + ", ".join(n for n, o, _ in checks if not o))
    return [out]


_DISPATCH = {
    "state": cmd_state,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
    "fig6": cmd_fig6,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}

_TOLERANCES = {
    "integrator_rel_tol": dynamics.INTEGRATOR_REL_TOL,
    "normalization_tol": wigner.NORMALIZATION_TOL,
    "tail_tol": fock.TAIL_TOL,
    "trace_deficit_tol": fock.TRACE_DEFICIT_TOL,
    "eigenvalue_floor": fock.EIGENVALUE_FLOOR,
    "qfi_pair_tol": fock.QFI_PAIR_TOL,
    "cfi_dtheta": metrology.CFI_DTHETA,
    "cfi_pdf_floor": metrology.CFI_PDF_FLOOR,
    "phi_tail_fraction": metrology.PHI_TAIL_FRACTION,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hybridspin",
        description="Hybrid homodyne + photon-detection protocol datasets")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file; flags override its values")
    ap.add_argument("--kappa", type=float)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--kappa-over-gamma", dest="kappa_over_gamma", type=float)
    ap.add_argument("--n-atoms", dest="n_atoms", type=int)
    ap.add_argument("--eta", type=float)
    ap.add_argument("--p-threshold", dest="p_threshold", type=float)
    ap.add_argument("--t1", type=float)
    ap.add_argument("--t2", type=float)
    ap.add_argument("--t1-grid", dest="t1_grid",
                    help="comma-separated t1 values")
    ap.add_argument("--thresholds",
                    type=lambda s: [float(v) for v in s.split(",")])
    ap.add_argument("--phis", type=lambda s: [float(v) for v in s.split(",")])
    ap.add_argument("--mode", choices=(metrology.MODE_IMMEDIATE,
                                       metrology.MODE_THRESHOLD))
    ap.add_argument("--output-dir", dest="output_dir")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--jobs", type=int)
    return ap


def run(cfg: dict) -> int:
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": {k: v for k, v in sorted(cfg.items())},
        "versions": {"hybridspin": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "backend": _kernels.BACKEND,
        "tolerances": _TOLERANCES,
        "status": "running",
    }
    start = time.time()
    stage = "validate"
    try:
        stage = cfg["command"]
        files = _DISPATCH[cfg["command"]](cfg, outdir)
        manifest["status"] = "ok"
        manifest["outputs"] = [f.name for f in files]
        return 0
    except Exception as err:  # noqa: BLE001 - converted to error.json + exit code
        manifest["status"] = "error"
        manifest["failure_stage"] = stage
        manifest["error"] = {"type": type(err).__name__, "message": str(err)}
        (outdir / "error.json").write_text(json.dumps(
            {"type": type(err).__name__, "message": str(err),
             "stage": stage, "traceback": traceback.format_exc()}, indent=2))
        print(f"error [{stage}]: {err}", file=sys.stderr)
        return 1
    finally:
        manifest["wall_time_s"] = time.time() - start
        (outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=str))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, core.ParameterError, json.JSONDecodeError) as err:
        outdir = Path(args.output_dir or os.environ.get(ENV_OUTDIR, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "error.json").write_text(json.dumps(
            {"type": type(err).__name__, "message": str(err),
             "stage": "config"}, indent=2))
        (outdir / "manifest.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "status": "error",
             "failure_stage": "config",
             "error": {"type": type(err).__name__, "message": str(err)}},
            indent=2, sort_keys=True))
        print(f"error [config]: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
