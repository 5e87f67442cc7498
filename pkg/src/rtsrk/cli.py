"""Experiment command line.

Each subcommand runs one study end to end and leaves a directory with the
delimited data (CSV), a JSON summary where the experiment has one, a PNG
rendering of the same data, and a manifest recording the full effective
config, the seed, the git revision, the wall time and the content hashes
of every output.  Re-running with the same config and seed reproduces the
data files byte for byte; a manifest can itself be passed to --config to
replay the run it describes.

Config files are plain text with flat dotted keys::

    dist.kind = uniform
    dist.h = 0.1
    m_traj = 1000     # comments allowed

Unknown keys are rejected.  --set key=value overrides file values, --seed
overrides the seed.  --strict turns data-quality flags (noise-dominated
levels, diverged trajectories, stalled chains) into a nonzero exit.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import subprocess
import sys
import time
import warnings
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import analysis, bayes, plots
from .ensembles import run_ensemble
from .integrate import (
    integrate_additive_noise,
    integrate_deterministic,
    integrate_rts_rk,
    run_batch,
)
from .problems import PROBLEM_NAMES, make_problem
from .randsteps import RngStream, StepDistribution, derive_seed
from .steppers import make_stepper


class ConfigError(ValueError):
    """A config key failed validation; the message names the key."""


# ---------------------------------------------------------------------------
# config plumbing


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def read_config_file(path: Path) -> dict:
    """Parse a flat key = value config file (or a manifest, see load_run)."""
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, text = line.partition("=")
        values[key.strip()] = _parse_value(text.strip())
    return values


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"config key {key!r}: expected true or false, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r}: expected an integer, got {value!r}")
        if isinstance(value, float) and value != int(value):
            raise ConfigError(f"config key {key!r}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"config key {key!r}: expected a nonempty list, got {value!r}")
        return [float(v) for v in value]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"config key {key!r} has unsupported default type")


def build_config(experiment: str, file_values: dict, overrides: dict) -> dict:
    """Merge defaults, file values and --set overrides; reject unknown keys."""
    defaults = EXPERIMENTS[experiment].defaults
    cfg = dict(defaults)
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in defaults:
                raise ConfigError(
                    f"unknown config key {key!r} for experiment {experiment!r}"
                )
            cfg[key] = _coerce(key, value, defaults[key])
    return cfg


# ---------------------------------------------------------------------------
# output plumbing


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest exact round-trip form
    return str(value)


@dataclasses.dataclass
class RunContext:
    out_dir: Path
    seed: int
    threads: int
    extended: bool
    outputs: list = dataclasses.field(default_factory=list)
    violations: list = dataclasses.field(default_factory=list)

    def path(self, name: str) -> Path:
        target = self.out_dir / name
        self.outputs.append(target)
        return target

    def flag(self, message: str) -> None:
        self.violations.append(message)

    def write_csv(self, name: str, header, rows) -> Path:
        target = self.path(name)
        lines = [",".join(header)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        target.write_text("\n".join(lines) + "\n")
        return target

    def write_json(self, name: str, payload: dict) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return target


def _git_describe() -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
            cwd=Path(__file__).resolve().parent,
        )
        return proc.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def write_manifest(ctx: RunContext, experiment: str, cfg: dict, wall_time: float) -> Path:
    payload = {
        "experiment": experiment,
        "config": cfg,
        "seed": ctx.seed,
        "extended": ctx.extended,
        "git_describe": _git_describe(),
        "wall_time_s": round(wall_time, 3),
        "outputs": {p.name: _sha256(p) for p in ctx.outputs},
    }
    target = ctx.out_dir / "manifest.json"
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return target


# ---------------------------------------------------------------------------
# shared experiment pieces


def _make_dist(kind: str, h: float, p: float, half_width_exponent=None) -> StepDistribution:
    return StepDistribution(
        kind=kind, h=h, p=p, half_width_exponent=half_width_exponent
    )


def _h_grid(h_base: float, n_levels: int) -> np.ndarray:
    return h_base * 0.5 ** np.arange(n_levels)


def _study_csv_rows(method: str, p: float, study) -> list:
    rows = []
    for h, err, se, fl, fc in zip(
        study.h_grid, study.errors, study.stderrs, study.flagged, study.failed_counts
    ):
        rows.append([method, p, h, err, se, int(fl), int(fc)])
    return rows


def _study_summary(method: str, p: float, study) -> dict:
    return {
        "method": method,
        "p": p,
        "fitted_order": study.fitted_order,
        "theory_order": study.theory_order,
        "m_traj": study.m_traj,
        "seed": study.base_seed,
        "fit_includes_flagged": study.fit_includes_flagged,
    }


def _flag_study(ctx: RunContext, label: str, study) -> None:
    if np.any(study.flagged):
        ctx.flag(f"{label}: {int(np.sum(study.flagged))} noise-dominated level(s)")
    if np.any(study.failed_counts > 0):
        ctx.flag(f"{label}: {int(np.sum(study.failed_counts))} diverged trajectories")


def _order_table(ctx: RunContext, cfg: dict, weak: bool, phi=None) -> None:
    problem = make_problem(cfg["problem"])
    grid = _h_grid(cfg["h_base"], cfg["n_levels"])
    if ctx.extended:
        m_traj = cfg["extended_m_traj"]
        method_rows = [("heun", cfg["extended_heun_p"]), ("rk4", cfg["extended_rk4_p"])]
    else:
        m_traj = cfg["m_traj"]
        method_rows = [("heun", cfg["heun_p"]), ("rk4", cfg["rk4_p"])]
    # The weak table pins the step law to half-width h^p; the mean-square
    # table uses the default h^(p + 1/2).
    hwe = (lambda p: p) if weak else (lambda p: None)

    y_ref = analysis.reference_solution(
        problem, cfg["t_final"], h_ref=grid[-1] / analysis.REFERENCE_REFINEMENT
    )
    rows, summaries, panels = [], [], []
    for mi, (method, p_list) in enumerate(method_rows):
        stepper = make_stepper(method)
        studies = []
        for pi, p in enumerate(p_list):
            kwargs = dict(
                base_seed=derive_seed(ctx.seed, mi, pi),
                dist_kind=cfg["dist.kind"],
                half_width_exponent=hwe(p),
                y_ref=y_ref,
                threads=ctx.threads,
            )
            if weak:
                study = analysis.study_weak(
                    stepper, p, grid, m_traj, problem, cfg["t_final"], phi, **kwargs
                )
            else:
                study = analysis.study_mean_square(
                    stepper, p, grid, m_traj, problem, cfg["t_final"], **kwargs
                )
            study.label = f"p = {p:g}"
            rows.extend(_study_csv_rows(method, p, study))
            summaries.append(_study_summary(method, p, study))
            _flag_study(ctx, f"{method} p={p:g}", study)
            studies.append(study)
        panels.append((method, studies))

    name = "table_weak" if weak else "table_ms"
    kind = "weak error" if weak else "rms error"
    ctx.write_csv(
        f"{name}.csv", ["method", "p", "h", "error", "stderr", "flagged", "failed"], rows
    )
    ctx.write_json(f"{name}.json", {"rows": summaries, "m_traj": m_traj})
    plots.save_order_panels(panels, ctx.path(f"{name}.png"), kind)


# ---------------------------------------------------------------------------
# experiment runners


def run_integrate(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    h, n = cfg["dist.h"], cfg["n_steps"]
    scheme = cfg["scheme"]
    if scheme == "det":
        traj = integrate_deterministic(stepper, problem, h, n)
    elif scheme == "rts":
        dist = _make_dist(cfg["dist.kind"], h, cfg["dist.p"])
        traj = integrate_rts_rk(stepper, dist, problem, n, RngStream(ctx.seed, 0))
    elif scheme == "add":
        traj = integrate_additive_noise(
            stepper, problem, h, cfg["dist.p"], n, RngStream(ctx.seed, 0)
        )
    else:
        raise ConfigError(f"config key 'scheme': unknown scheme {scheme!r}")
    header = ["k", "t_nominal", "t_realized"] + [f"y_{j}" for j in range(problem.dim)]
    t_real = traj.times_realized
    rows = [
        [k, traj.times_nominal[k], t_real[k]] + list(traj.states[k])
        for k in range(traj.n_steps + 1)
    ]
    ctx.write_csv("trajectory.csv", header, rows)
    plots.save_trajectory(
        traj, ctx.path("trajectory.png"),
        title=f"{problem.name}, {cfg['stepper']}, scheme {scheme}",
    )


def run_lorenz_fan(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    h, m_traj = cfg["h"], cfg["m_traj"]
    n = analysis._steps_for(h, cfg["t_final"])
    stride = cfg["record_stride"]
    rec = np.unique(np.concatenate([np.arange(0, n + 1, stride), [n]]))
    times = rec * h
    rows, panels = [], []
    for si, scale in enumerate(cfg["noise_scales"]):
        rng = RngStream(derive_seed(ctx.seed, si), 0).generator()
        y0 = np.tile(problem.default_y0, (m_traj, 1))
        y0[:, 0] += scale * rng.standard_normal(m_traj)
        states, failed = run_batch(stepper, problem, y0, n, float(h), record=rec)
        if np.any(failed >= 0):
            ctx.flag(f"scale {scale:g}: {int(np.sum(failed >= 0))} diverged trajectories")
        first = states[:, :, 0]
        for traj_id in range(m_traj):
            rows.extend(
                [scale, traj_id, times[j], first[traj_id, j]] for j in range(rec.size)
            )
        panels.append((scale, times, first))
    ctx.write_csv("fan.csv", ["scale", "traj", "t", "x"], rows)
    plots.save_fan(panels, ctx.path("fan.png"))


def run_err_estimator(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    comp = analysis.error_estimator_comparison(
        make_stepper(cfg["stepper"]), problem, cfg["h"], cfg["m_traj"],
        cfg["t_final"], p=cfg["p"], base_seed=ctx.seed,
    )
    rows = list(zip(comp.times, comp.true_error, comp.embedded_estimate, comp.spread_indicator))
    ctx.write_csv(
        "estimator.csv", ["t", "true_error", "embedded_estimate", "spread_indicator"], rows
    )
    plots.save_estimator(comp, ctx.path("estimator.png"))


def run_table_ms(cfg: dict, ctx: RunContext) -> None:
    _order_table(ctx, cfg, weak=False)


def run_table_weak(cfg: dict, ctx: RunContext) -> None:
    _order_table(ctx, cfg, weak=True, phi=lambda y: np.sum(y * y, axis=-1))


def run_mc_mse(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    grid = _h_grid(cfg["h_base"], cfg["n_levels"])
    index = cfg["observable_index"]
    if not 0 <= index < problem.dim:
        raise ConfigError("config key 'observable_index': out of range for the problem")

    def phi(y):
        return y[..., index]

    knee = analysis.study_estimator_mse(
        stepper, cfg["p"], grid, cfg["m_traj"], cfg["n_replicas"], problem,
        cfg["t_final"], phi, base_seed=ctx.seed, dist_kind=cfg["dist.kind"],
        threads=ctx.threads,
    )
    single = analysis.study_estimator_mse(
        stepper, cfg["pq_p"], grid, cfg["pq_m_traj"], cfg["pq_replicas"], problem,
        cfg["t_final"], phi, base_seed=derive_seed(ctx.seed, 1),
        dist_kind=cfg["dist.kind"], threads=ctx.threads,
    )
    coarse, fine, split = analysis.split_slopes(knee.h_grid, knee.mse)
    single_slope = analysis.fit_order(single.h_grid, np.sqrt(single.mse)) * 2.0
    rows = [["ensemble", h, m, s] for h, m, s in zip(knee.h_grid, knee.mse, knee.stderrs)]
    rows += [["single", h, m, s] for h, m, s in zip(single.h_grid, single.mse, single.stderrs)]
    ctx.write_csv("mse.csv", ["variant", "h", "mse", "stderr"], rows)
    ctx.write_json("mse.json", {
        "ensemble": {
            "coarse_slope": coarse, "fine_slope": fine, "split_index": int(split),
            "crossover_index": knee.crossover_index(),
            "bias_exponent": knee.bias_exponent,
            "variance_exponent": knee.variance_exponent,
            "m_traj": knee.m_traj, "n_replicas": knee.n_replicas,
        },
        "single": {
            "slope": single_slope, "bias_exponent": single.bias_exponent,
            "m_traj": single.m_traj, "n_replicas": single.n_replicas,
        },
    })
    plots.save_mse(
        knee, f"M = {knee.m_traj}, p = {cfg['p']:g}",
        single, f"M = 1, p = q = {cfg['pq_p']:g}",
        ctx.path("mse.png"),
    )


def run_chemistry(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    h, m_traj, p = cfg["h"], cfg["m_traj"], cfg["p"]
    n = analysis._steps_for(h, cfg["t_final"])
    stride = cfg["record_stride"]
    rec = np.unique(np.concatenate([np.arange(0, n + 1, stride), [n]]))
    times = rec * h
    dist = _make_dist(cfg["dist.kind"], h, p)

    report, rows, blocks = {}, [], []
    for scheme in ("rts", "add"):
        first_neg = np.full(m_traj, -1, dtype=int)

        def watch(k, y, alive, first_neg=first_neg):
            fresh = alive & (first_neg < 0) & np.any(y < 0.0, axis=-1)
            first_neg[fresh] = k

        kwargs = dict(base_seed=ctx.seed, record=rec, observer=watch, keep_steps=False)
        if scheme == "rts":
            ens = run_ensemble("rts", stepper, problem, n, m_traj, dist=dist, **kwargs)
        else:
            ens = run_ensemble("add", stepper, problem, n, m_traj, h=h, p=p, **kwargs)
        negatives = first_neg >= 0
        report[scheme] = {
            "negative_trajectories": int(np.sum(negatives)),
            "first_negative_time": (
                float(np.min(first_neg[negatives]) * h) if np.any(negatives) else None
            ),
            "failed_trajectories": int(ens.failed_count),
        }
        # Divergence is this experiment's finding, not a data-quality
        # problem, so it is reported in positivity.json rather than flagged.
        for traj_id in range(m_traj):
            for j in range(rec.size):
                rows.append([scheme, traj_id, times[j]] + list(ens.states[traj_id, j]))
        blocks.append((scheme, ens.states))
    header = ["scheme", "traj", "t"] + [f"y_{j}" for j in range(problem.dim)]
    ctx.write_csv("chemistry.csv", header, rows)
    ctx.write_json("positivity.json", report)
    plots.save_chemistry(
        times, blocks, ctx.path("chemistry.png"),
        [f"y_{j}" for j in range(problem.dim)],
    )


def run_kepler_invariant(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    h, p = cfg["h"], cfg["p"]
    n = analysis._steps_for(h, cfg["t_final"])
    dist = _make_dist(cfg["dist.kind"], h, p)
    traj_rts = integrate_rts_rk(
        stepper, dist, problem, n, RngStream(derive_seed(ctx.seed, 0), 0)
    )
    traj_add = integrate_additive_noise(
        stepper, problem, h, p, n, RngStream(derive_seed(ctx.seed, 1), 0)
    )
    integral = problem.integrals[0]
    drift_rts = analysis.integral_drift(traj_rts, integral)
    drift_add = analysis.integral_drift(traj_add, integral)
    idx = np.concatenate([[0], analysis.log_sample_indices(n, cfg["per_decade"])])
    rows = list(zip(idx * h, drift_rts.values[idx], drift_add.values[idx]))
    ctx.write_csv("kepler.csv", ["t", "drift_rts", "drift_add"], rows)
    ctx.write_json("kepler.json", {
        "integral": integral.name,
        "max_drift_rts": float(np.max(drift_rts.values)),
        "final_drift_rts": float(drift_rts.values[-1]),
        "final_drift_add": float(drift_add.values[-1]),
        "final_ratio": float(drift_add.values[-1] / max(drift_rts.values[-1], 1e-300)),
    })
    plots.save_drift(
        [("random steps", drift_rts), ("additive noise", drift_add)],
        ctx.path("kepler.png"), f"|{integral.name} drift|",
    )


def run_pendulum_longtime(cfg: dict, ctx: RunContext) -> None:
    problem = make_problem(cfg["problem"])
    stepper = make_stepper(cfg["stepper"])
    rows, reports, plateaus = [], [], {}
    for h in cfg["h_values"]:
        dist = _make_dist(cfg["dist.kind"], h, cfg["p"])
        report = analysis.hamiltonian_error_longtime(
            stepper, dist, problem, cfg["m_traj"], cfg["t_final"],
            base_seed=ctx.seed, per_decade=cfg["per_decade"],
        )
        rows.extend([h, t, v] for t, v in zip(report.times, report.values))
        plateaus[f"{h:g}"] = analysis.plateau_level(report, cfg["window_lo"], cfg["window_hi"])
        reports.append((h, report))
    hs = [f"{h:g}" for h in cfg["h_values"]]
    ctx.write_csv("pendulum.csv", ["h", "t", "mean_energy_error"], rows)
    ctx.write_json("pendulum.json", {
        "plateaus": plateaus,
        "plateau_window": [cfg["window_lo"], cfg["window_hi"]],
        "ratios": {
            f"{hs[i]}/{hs[i + 1]}": plateaus[hs[i]] / plateaus[hs[i + 1]]
            for i in range(len(hs) - 1)
        },
        "bounds_2h2": {f"{h:g}": 2.0 * h**2 for h in cfg["h_values"]},
    })
    plots.save_longtime(reports, ctx.path("pendulum.png"))


def run_linear_posterior(cfg: dict, ctx: RunContext) -> None:
    h, p, y0_star = cfg["h"], cfg["p"], cfg["y0_star"]
    z = float(RngStream(derive_seed(ctx.seed, 7), 0).generator().standard_normal())
    grid = np.linspace(cfg["grid_lo"], cfg["grid_hi"], cfg["grid_points"])
    rows, blocks, summary = [], [], {"shared_noise_z": z, "sigmas": {}}
    for sigma in cfg["sigmas"]:
        d = y0_star * math.exp(-h) + sigma * z
        curves, info = {}, {"data": d}
        for kind in ("true", "det", "add", "rts"):
            density = bayes.linear_analytic_posterior(kind, h, sigma, d, p=p)
            values = density(grid)
            curves[kind] = values
            rows.extend(
                [sigma, kind, theta, value] for theta, value in zip(grid, values)
            )
            if density.mean is not None:
                info[kind] = {"mean": density.mean, "variance": density.variance}
            else:
                info[kind] = {"support": list(density.support)}
        summary["sigmas"][f"{sigma:g}"] = info
        blocks.append((sigma, grid, curves))
    ctx.write_csv("posterior.csv", ["sigma", "kind", "theta", "density"], rows)
    ctx.write_json("posterior.json", summary)
    plots.save_densities(blocks, ctx.path("posterior.png"), truth=y0_star)


def run_infer_henon(cfg: dict, ctx: RunContext) -> None:
    ip = bayes.build_henon_heiles_inverse_problem(
        seed=derive_seed(ctx.seed, 3), sigma=cfg["sigma"], t_obs=cfg["t_obs"],
        prior_scale=cfg["prior_scale"], h_truth=cfg["h_truth"],
    )
    stepper = make_stepper(cfg["stepper"])
    chain_seed = derive_seed(ctx.seed, 4)
    truth = make_problem("henon_heiles").default_y0
    # Start at the true state: a prior-mean start can sit in the escaping
    # region of the Hamiltonian, where the forward solve diverges.
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg["scheme"] == "rts":
            dist = _make_dist(cfg["dist.kind"], cfg["h"], cfg["p"])
            chain = bayes.pmmh(
                ip, stepper, dist, cfg["n_steps"],
                proposal_scale=cfg["proposal_scale"], n_estimator=cfg["n_estimator"],
                seed=chain_seed, warmup=cfg["warmup"], theta0=truth,
            )
        elif cfg["scheme"] == "det":
            chain = bayes.rwmh(
                ip, stepper, cfg["h"], cfg["n_steps"],
                proposal_scale=cfg["proposal_scale"], seed=chain_seed,
                warmup=cfg["warmup"], theta0=truth,
            )
        else:
            raise ConfigError("config key 'scheme': expected rts or det")
    for warning in caught:
        ctx.flag(f"chain: {warning.message}")
    chain.to_csv(ctx.path("chain.csv"))
    ctx.write_json("infer.json", {
        "kind": chain.kind,
        "acceptance_rate": chain.acceptance_rate,
        "proposal_scale_used": chain.proposal_scale,
        "posterior_mean": [float(v) for v in np.mean(chain.samples, axis=0)],
        "posterior_std": [float(v) for v in np.std(chain.samples, axis=0)],
        "true_initial_condition": [float(v) for v in truth],
        "data": [float(v) for v in ip.data],
        "note": "prior center and chain length are experiment defaults, "
                "not prescribed by the source tables",
    })
    plots.save_chain_hist(
        chain.samples, truth, ctx.path("chain.png"),
        ["v_1", "v_2", "w_1", "w_2"],
    )


# ---------------------------------------------------------------------------
# registry


@dataclasses.dataclass(frozen=True)
class Experiment:
    runner: Callable[[dict, RunContext], None]
    defaults: dict
    help: str


EXPERIMENTS = {
    "integrate": Experiment(
        run_integrate,
        {
            "problem": "linear_decay", "stepper": "euler", "scheme": "rts",
            "dist.kind": "degenerate", "dist.h": 0.5, "dist.p": 1.0, "n_steps": 2,
        },
        "dump a single trajectory (any problem, stepper and scheme)",
    ),
    "lorenz-fan": Experiment(
        run_lorenz_fan,
        {
            "problem": "lorenz", "stepper": "heun", "h": 0.01, "t_final": 40.0,
            "m_traj": 20, "noise_scales": [1e-2, 1e-4, 1e-6], "record_stride": 5,
        },
        "trajectory fans under initial-condition noise on a chaotic system",
    ),
    "err-estimator": Experiment(
        run_err_estimator,
        {
            "problem": "lorenz", "stepper": "euler", "h": 0.02, "t_final": 10.0,
            "m_traj": 128, "p": 1.0,
        },
        "embedded local-error estimate vs random-step ensemble spread",
    ),
    "table-ms": Experiment(
        run_table_ms,
        {
            "problem": "fitzhugh_nagumo", "t_final": 1.0, "m_traj": 1000,
            "h_base": 0.01, "n_levels": 5, "dist.kind": "uniform",
            "heun_p": [0.5, 1.0, 1.5, 2.0, 2.5], "rk4_p": [2.5, 3.0, 3.5, 4.0, 4.5],
            "extended_m_traj": 10000, "extended_heun_p": [0.5, 1.0, 1.5, 2.0, 2.5],
            "extended_rk4_p": [2.5, 3.0, 3.5, 4.0, 4.5],
        },
        "mean-square convergence orders over a p grid (heun and rk4 rows)",
    ),
    "table-weak": Experiment(
        run_table_weak,
        {
            "problem": "fitzhugh_nagumo", "t_final": 1.0, "m_traj": 100000,
            "h_base": 0.1, "n_levels": 6, "dist.kind": "uniform",
            "heun_p": [1.0, 1.5], "rk4_p": [1.0, 1.5],
            "extended_m_traj": 1000000, "extended_heun_p": [1.0, 1.5, 2.0],
            "extended_rk4_p": [1.0, 1.5, 2.0, 2.5, 3.0],
        },
        "weak convergence orders for phi(x) = x.x (--extended adds the "
        "high-order rows at 10^6 trajectories)",
    ),
    "mc-mse": Experiment(
        run_mc_mse,
        {
            "problem": "fitzhugh_nagumo", "stepper": "heun", "t_final": 2.0,
            "observable_index": 1, "p": 1.0, "m_traj": 1000, "n_replicas": 32,
            "h_base": 0.125, "n_levels": 8, "dist.kind": "uniform",
            "pq_p": 2.0, "pq_m_traj": 1, "pq_replicas": 128,
        },
        "Monte Carlo estimator MSE against h: bias/variance knee and the "
        "p = q single-sample decay",
    ),
    "chemistry": Experiment(
        run_chemistry,
        {
            "problem": "olsen_peroxide", "stepper": "rkc", "h": 0.05,
            "t_final": 100.0, "m_traj": 50, "p": 1.0, "dist.kind": "uniform",
            "record_stride": 4,
        },
        "stiff kinetics positivity: random steps vs additive noise",
    ),
    "kepler-invariant": Experiment(
        run_kepler_invariant,
        {
            "problem": "kepler_perturbed", "stepper": "midpoint", "h": 0.01,
            "t_final": 4000.0, "p": 2.0, "dist.kind": "uniform", "per_decade": 96,
        },
        "angular momentum drift of the implicit midpoint rule over long time",
    ),
    "pendulum-longtime": Experiment(
        run_pendulum_longtime,
        {
            "problem": "pendulum", "stepper": "midpoint", "p": 2.0, "m_traj": 20,
            "t_final": 1e5, "h_values": [0.2, 0.1], "dist.kind": "uniform",
            "per_decade": 128, "window_lo": 10.0, "window_hi": 100.0,
        },
        "long-time mean energy error plateaus and their h^2 scaling",
    ),
    "linear-posterior": Experiment(
        run_linear_posterior,
        {
            "h": 0.5, "p": 1.0, "y0_star": 1.0,
            "sigmas": [0.1, 0.05, 0.025, 0.0125],
            "grid_lo": -1.0, "grid_hi": 9.0, "grid_points": 2001,
        },
        "analytic posteriors of the scalar decay problem as the noise shrinks",
    ),
    "infer-henon": Experiment(
        run_infer_henon,
        {
            "sigma": 5e-4, "t_obs": 10.0, "h": 0.1, "stepper": "verlet",
            "scheme": "rts", "p": 2.0, "dist.kind": "uniform", "n_steps": 5000,
            "n_estimator": 1, "proposal_scale": 0.5, "warmup": 3000,
            "prior_scale": 0.05, "h_truth": 1e-3,
        },
        "posterior over a chaotic initial condition from one noisy snapshot",
    ),
}


# ---------------------------------------------------------------------------
# entry point


def load_run(args) -> tuple:
    """Resolve (experiment, config, seed, extended) from flags and files."""
    experiment = args.experiment
    file_values: dict = {}
    seed = 0
    extended = bool(args.extended)
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        if path.suffix == ".json":
            payload = json.loads(path.read_text())
            if not isinstance(payload, dict) or "config" not in payload:
                raise ConfigError(f"{path}: not a manifest (missing 'config')")
            if payload.get("experiment") != experiment:
                raise ConfigError(
                    f"{path}: manifest is for experiment "
                    f"{payload.get('experiment')!r}, not {experiment!r}"
                )
            file_values = dict(payload["config"])
            seed = int(payload.get("seed", 0))
            extended = extended or bool(payload.get("extended", False))
        else:
            file_values = read_config_file(path)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, text = item.partition("=")
        overrides[key.strip()] = _parse_value(text.strip())
    cfg = build_config(experiment, file_values, overrides)
    if args.seed is not None:
        seed = args.seed
    return experiment, cfg, seed, extended


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rtsrk",
        description="run the random time-step integrator experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name, exp in EXPERIMENTS.items():
        cmd = sub.add_parser(name, help=exp.help)
        cmd.add_argument("--config", help="config file (flat key = value) or a manifest.json")
        cmd.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        cmd.add_argument("--threads", type=int, default=1, help="worker thread bound")
        cmd.add_argument("--out", default=None, help="output directory (default out/<experiment>)")
        cmd.add_argument("--strict", action="store_true",
                         help="nonzero exit on noise flags or diverged trajectories")
        cmd.add_argument("--extended", action="store_true",
                         help="run the large-sample variant where one exists")
        cmd.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a config key (repeatable)")
    args = parser.parse_args(argv)

    try:
        experiment, cfg, seed, extended = load_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else Path("out") / experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(
        out_dir=out_dir, seed=seed, threads=max(1, args.threads), extended=extended
    )
    started = time.perf_counter()
    try:
        EXPERIMENTS[experiment].runner(cfg, ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report, do not traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = write_manifest(ctx, experiment, cfg, time.perf_counter() - started)
    for target in ctx.outputs + [manifest]:
        print(target)
    if ctx.violations:
        for message in ctx.violations:
            print(f"flag: {message}", file=sys.stderr)
        if args.strict:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
