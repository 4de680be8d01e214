"""Command-line experiment runner: verify, evolve, fit, compare-alpha."""

from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import evolution as ev
from . import identities as idl
from . import io
from . import profiles as pr
from . import spectral as sp
from .config import MODES, SCHEMA, ConfigError, RunConfig, dump_config, load_config

EXIT_OK, EXIT_GATE, EXIT_ERROR = 0, 1, 2

# gated fits: (csv column, Lebesgue exponent, error kind)
GATED_FITS = (("err_L2", 2, "plain"), ("err_vel_L2", 2, "velocity"))
INFO_FITS = (("err_L1", 1, "plain"), ("err_Linf", np.inf, "plain"))


@dataclass
class RunResult:
    mode: str
    exit_code: int = EXIT_OK
    gates: dict = field(default_factory=dict)      # name -> (passed, detail)
    lines: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    error: str | None = None

    def gate(self, name: str, passed: bool, detail: str, enforced: bool = True):
        self.gates[name] = (bool(passed), detail, enforced)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _, enforced in self.gates.values() if enforced)


def sim_params(cfg: RunConfig, **kw) -> ev.SimParams:
    p = ev.SimParams(alpha=cfg.alpha, epsilon=cfg.epsilon, T=cfg.T, theta=cfg.theta,
                     dt=cfg.dt, t_end=cfg.t_end, output_every=cfg.output_every,
                     cfl=cfg.cfl, nonlinear=cfg.nonlinear)
    return p.with_(**kw) if kw else p


def report_row(rep: dg.EnergyReport) -> dict:
    row = {"t": rep.t, "tau": rep.tau}
    row.update({f"b{i + 1}": rep.b[i] for i in range(3)})
    row.update({f"E{i}": rep.E[i] for i in range(7)})
    errs = rep.profile_errors
    row.update(err_L1=errs.get(1, math.nan), err_L2=errs.get(2, math.nan),
               err_Linf=errs.get(np.inf, math.nan), err_vel_L2=errs.get("vel2", math.nan))
    return row


@dataclass
class Trajectory:
    rows: list
    envelopes: list
    b0: np.ndarray
    w0_norm: float
    final: ev.SimState


def run_trajectory(cfg: RunConfig, params: ev.SimParams, snapshot_dir: Path | None = None) -> Trajectory:
    """Evolve the configured initial data, sampling E0..E6 and profile errors."""
    grid = sp.make_grid(cfg.n, cfg.box_length)
    w0 = ev.make_initial_data(cfg.kind, cfg.amplitude, cfg.seed, grid, cfg.coeffs, T=params.T)
    b0 = pr.first_moments(w0, grid, warn=False).b
    rows, envelopes = [], []

    def observer(t, state):
        rep = dg.energy_sample(state, params, cfg.K, b=b0)
        rows.append(report_row(rep))
        envelopes.append(rep.envelope)
        if snapshot_dir is not None:
            io.write_snapshot(snapshot_dir / f"snap_{len(rows) - 1:04d}.sgf", state.physical(), grid, t)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", pr.BoundaryDecayWarning)
        final = ev.evolve(w0, grid, params, observer)
    return Trajectory(rows, envelopes, b0, sp.l2_norm(w0, grid), final)


def moment_gate(traj: Trajectory, tol: float) -> idl.IdentityReport:
    """beta e^tau constant, i.e. the unscaled moments b(t) stay at b(0)."""
    b = np.array([[r["b1"], r["b2"], r["b3"]] for r in traj.rows])
    drift = float(np.abs(b - b[0]).max())
    scale = max(float(np.abs(b[0]).max()), traj.w0_norm)
    return idl.equality("moment_law", drift, 0.0, tol, scale=scale)


def envelope_gate(traj: Trajectory, cap_factor: float) -> tuple[bool, float, float]:
    env = np.asarray(traj.envelopes)
    return bool(np.all(env <= cap_factor * env[0])), float(env.max()), float(env[0])


def fit_series(series: dict, T: float, theta: float) -> list[dg.DecayFit]:
    fits = []
    for col, p, kind in GATED_FITS + INFO_FITS:
        fits.append(dg.fit_decay(series["t"], series[col], T,
                                 predicted=dg.predicted_exponent(theta, p, kind), name=col))
    return fits


def _fit_lines(fits, residual_tol):
    lines = []
    for f in fits:
        gated = f.name in {c for c, _, _ in GATED_FITS}
        ok = f.passes and f.residual <= residual_tol
        tag = ("PASS" if ok else "FAIL") if gated else "info"
        lines.append(f"  fit {f.name:11s} slope {f.slope:+.4f} predicted <= {f.predicted:+.4f} "
                     f"residual {f.residual:.4f} window t in [{f.window[0]:.3g}, {f.window[1]:.3g}] "
                     f"({f.n_window} samples) {tag}")
    return lines


def _fit_record(f: dg.DecayFit) -> dict:
    return {"name": f.name, "slope": f.slope, "intercept": f.intercept, "residual": f.residual,
            "predicted": f.predicted, "margin": f.margin, "window": list(f.window),
            "n_window": f.n_window}


def _apply_fit_gate(res: RunResult, fits, cfg: RunConfig, enforced: bool, suffix=""):
    for f in fits:
        if f.name in {c for c, _, _ in GATED_FITS}:
            ok = f.passes and f.residual <= cfg.residual_tol
            res.gate(f"fit_{f.name}{suffix}", ok,
                     f"slope {f.slope:+.4f} vs {f.predicted:+.4f}, residual {f.residual:.4f}", enforced)


def _try_fits(series, cfg):
    if np.all(np.nan_to_num(series["err_L2"]) == 0.0):
        return None, "profile errors vanish identically; nothing to fit"
    try:
        return fit_series(series, cfg.T, cfg.theta), None
    except ValueError as exc:
        return None, f"fit not possible: {exc}"


# -- modes ----------------------------------------------------------------------

def _mode_verify(cfg: RunConfig, out: Path, res: RunResult):
    grid = sp.make_grid(cfg.n, cfg.box_length)
    reports = idl.run_identity_suite(grid, theta=cfg.theta)
    path = out / "identities.jsonl"
    io.write_reports_jsonl(path, reports)
    res.artifacts.append(path)
    gated = [r for r in reports if r.gated]
    failed = [r for r in gated if not r.passed]
    res.gate("identities", not failed, f"{len(gated) - len(failed)}/{len(gated)} gated checks pass")
    for r in failed:
        res.lines.append(f"  FAIL {r.name}: lhs {r.lhs:.6g} rhs {r.rhs:.6g} rel {r.rel_err:.3g} tol {r.tol:g}")
    ungated = [r for r in reports if not r.gated]
    res.lines.append(f"  {len(ungated)} informational records (not gated)")


def _evolve_into(cfg, params, out: Path, res: RunResult, tag=""):
    snaps = None
    if cfg.snapshots:
        snaps = out / f"snapshots{tag}"
        snaps.mkdir(parents=True, exist_ok=True)
    traj = run_trajectory(cfg, params, snaps)
    path = out / f"series{tag}.csv"
    io.write_series_csv(path, traj.rows)
    res.artifacts.append(path)
    mom = moment_gate(traj, cfg.moment_tol)
    res.gate(f"moment{tag}", mom.passed, f"max drift {mom.abs_err:.3g} (rel {mom.rel_err:.3g}, tol {mom.tol:g})",
             "moment" in cfg.gates)
    ok, emax, e0 = envelope_gate(traj, cfg.cap_factor)
    res.gate(f"envelope{tag}", ok, f"max {emax:.4g} vs cap {cfg.cap_factor:g} x {e0:.4g}", "envelope" in cfg.gates)
    if not mom.passed:
        heat = math.exp(-cfg.box_length**2 / (16.0 * (params.t_end + params.T)))
        helm = math.exp(-cfg.box_length / (4.0 * math.sqrt(params.alpha))) if params.alpha > 0 else 0.0
        res.lines.append(f"  tails at the box edge by t_end: heat ~ {heat:.2g}, Helmholtz ~ {helm:.2g}; "
                         f"moments leak through the periodic boundary once these exceed the tolerance")
    io.write_reports_jsonl(out / f"gates{tag}.jsonl", [mom])
    return traj, path


def _mode_evolve(cfg: RunConfig, out: Path, res: RunResult):
    params = sim_params(cfg)
    traj, path = _evolve_into(cfg, params, out, res)
    res.lines.append(f"  {len(traj.rows)} samples to t = {traj.final.t:g}; b(0) = {np.array2string(traj.b0)}")
    if "fit" in cfg.gates:
        series = io.read_series_csv(path)
        fits, why = _try_fits(series, cfg)
        if fits is None:
            res.lines.append(f"  {why}")
        else:
            _write_fits(out, fits, res)
            res.lines += _fit_lines(fits, cfg.residual_tol)
            _apply_fit_gate(res, fits, cfg, True)


def _write_fits(out: Path, fits, res: RunResult, name="fit.json"):
    path = out / name
    path.write_text(json.dumps([_fit_record(f) for f in fits], indent=2))
    res.artifacts.append(path)


def _mode_fit(cfg: RunConfig, out: Path, res: RunResult):
    src = Path(cfg.series) if cfg.series else out / "series.csv"
    if not src.exists():
        res.lines.append(f"  no series at {src}; running evolve first")
        params = sim_params(cfg)
        _, src = _evolve_into(cfg, params, out, res)
    series = io.read_series_csv(src)
    fits, why = _try_fits(series, cfg)
    if fits is None:
        res.lines.append(f"  {why}")
        return
    _write_fits(out, fits, res)
    res.lines += _fit_lines(fits, cfg.residual_tol)
    _apply_fit_gate(res, fits, cfg, True)


def _mode_compare_alpha(cfg: RunConfig, out: Path, res: RunResult):
    table = []
    for alpha in cfg.alphas:
        run_cfg = replace(cfg, alpha=float(alpha))
        tag = f"_alpha{alpha:g}"
        traj, path = _evolve_into(run_cfg, sim_params(run_cfg), out, res, tag)
        fits, why = _try_fits(io.read_series_csv(path), run_cfg)
        if fits is None:
            table.append((alpha, math.nan, math.nan, why))
            continue
        _write_fits(out, fits, res, f"fit{tag}.json")
        _apply_fit_gate(res, fits, run_cfg, "fit" in cfg.gates, tag)
        by = {f.name: f for f in fits}
        table.append((alpha, by["err_L2"].slope, by["err_vel_L2"].slope, ""))
    res.lines.append("  alpha      slope(err_L2)  slope(err_vel_L2)")
    for alpha, s2, sv, note in table:
        res.lines.append(f"  {alpha:<9g}  {s2:+.4f}        {sv:+.4f}  {note}".rstrip())


MODE_RUNNERS = {"verify": _mode_verify, "evolve": _mode_evolve, "fit": _mode_fit,
                "compare-alpha": _mode_compare_alpha}


def write_summary(cfg: RunConfig, out: Path, res: RunResult) -> Path:
    text = [f"mode: {res.mode}", f"status: {'PASS' if res.passed and not res.error else 'FAIL'}",
            f"exit code: {res.exit_code}", "", "gates:"]
    for name, (ok, detail, enforced) in res.gates.items():
        tag = ("PASS" if ok else "FAIL") if enforced else ("info-pass" if ok else "info-fail")
        text.append(f"  {tag:9s} {name}: {detail}")
    if res.lines:
        text += ["", "details:"] + res.lines
    if res.error:
        text += ["", "error:", res.error]
    text += ["", "artifacts:"] + [f"  {p}" for p in res.artifacts]
    text += ["", "configuration:", dump_config(cfg)]
    path = out / "summary.txt"
    path.write_text("\n".join(text) + "\n")
    return path


def run_experiment(cfg: RunConfig) -> RunResult:
    """Run the configured mode; write artifacts and summary.txt into cfg.output_dir.

    Exit code 0 iff every enforced gate passes, 1 on a gate failure, 2 on a
    runtime error (recorded in the summary).
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(cfg.mode)
    try:
        MODE_RUNNERS[cfg.mode](cfg, out, res)
        res.exit_code = EXIT_OK if res.passed else EXIT_GATE
    except (ev.CFLError, ev.SimulationDiverged, ev.HorizonError, ValueError, FloatingPointError) as exc:
        res.error = f"{type(exc).__name__}: {exc}\n" + traceback.format_exc(limit=3)
        res.exit_code = EXIT_ERROR
    res.artifacts.append(write_summary(cfg, out, res))
    return res


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secondgrade",
                                     description="Second-grade fluid vorticity simulator and identity checks.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--output", help="output directory (overrides run.output_dir)")
        p.add_argument("--quiet", action="store_true", help="do not print the summary")
        for section, keys in SCHEMA.items():
            for key in keys:
                if key in ("mode", "output_dir"):
                    continue
                p.add_argument(f"--{key.replace('_', '-')}", dest=f"set_{key}", metavar="VALUE",
                               help=f"override [{section}] {key}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"mode": args.mode}
    if args.output:
        overrides["output_dir"] = args.output
    for name, value in vars(args).items():
        if name.startswith("set_") and value is not None:
            overrides[name[4:]] = value
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    res = run_experiment(cfg)
    if not args.quiet:
        print((Path(cfg.output_dir) / "summary.txt").read_text(), end="")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
