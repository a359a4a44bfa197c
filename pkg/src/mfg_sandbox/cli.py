"""Experiment configuration and orchestration.

Experiments are described by a flat JSON config (exact key names below) and
run in one of four modes: "sandbox" (one instrumented learning run),
"oracle" (equilibrium solve only), "compare" (oracle solve plus num_seeds
learning runs and a joint report), and "probe" (empirical operator-Lipschitz
estimate). Outputs are CSV and JSON files in output_dir; identical config
and seed reproduce identical bytes, so wall-clock time is logged rather
than written into the summary files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import snapshots
from .core import l1_norm, tv_norm
from .environment import CongestionGridParams, make_congestion_env, make_two_class_env
from .oracle import DiagnosticsOracle, probe_contraction, solve_bmfe
from .sandbox import EpisodeDiagnostics, NonFiniteError, SandboxConfig, run_sandbox
from .schedules import ScheduleParams, build_epsilon_net, feasible_mesh

logger = logging.getLogger("mfg_sandbox")

MODES = ("sandbox", "oracle", "compare", "probe")
ENV_KINDS = ("congestion", "two_class")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NON_FINITE = 2
EXIT_IO = 3

CSV_COLUMNS = ("k", "e_pi", "e_mu", "eps_P", "eps_Q", "residual_mu")

# JSON key -> dataclass field, for names Python reserves.
_KEY_ALIASES = {"lambda": "lam"}
_FIELD_ALIASES = {v: k for k, v in _KEY_ALIASES.items()}


@dataclass(frozen=True)
class EnvironmentSpec:
    """Environment block of the config file."""

    kind: str
    side: int = 5
    jostle_p: float = 0.1
    congestion_c: float = 0.5
    favorable_reward: float = 1.0
    baseline_reward: float = 0.1
    favorable_states: tuple | None = None

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ValueError(f"environment kind must be one of {ENV_KINDS}, got {self.kind!r}")
        if self.favorable_states is not None:
            cells = tuple(tuple(int(v) for v in cell) for cell in self.favorable_states)
            object.__setattr__(self, "favorable_states", cells)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    mode: str
    environment: EnvironmentSpec
    c_mu: float = 0.5
    c_pi: float = 0.5
    gamma: float = 0.6
    theta: float = 0.55
    zeta: float = 1.1
    c_beta: float = 5.0
    nu: float = 0.55
    psi: float = 0.2
    lam: float = 1.0
    constant_psi: bool = False
    epsilon_net_mesh: float = 0.5
    use_projection: bool = False
    net_point_budget: int = 1_000_000
    K: int = 300
    T: int = 50_000
    rho: float = 0.7
    seed: int = 0
    num_seeds: int = 1
    output_dir: str = "runs"
    diagnostics_every: int = 1
    per_step_residual: bool = False
    validate_every: int = 100
    damping: float = 0.5
    bmfe_tol: float = 1e-8
    bmfe_max_iter: int = 10_000
    vi_tol: float = 1e-10
    probe_pairs: int = 64

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.K < 2:
            raise ValueError("K (episodes) must be >= 2")
        if self.T < 2:
            raise ValueError("T (steps per episode) must be >= 2")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be >= 1")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")
        if self.probe_pairs < 1:
            raise ValueError("probe_pairs must be >= 1")
        # Re-run the schedule constraints so bad configs fail at load time
        # with the offending field named.
        self.schedule()

    def schedule(self) -> ScheduleParams:
        return ScheduleParams(
            c_mu=self.c_mu,
            c_pi=self.c_pi,
            gamma=self.gamma,
            theta=self.theta,
            zeta=self.zeta,
            c_beta=self.c_beta,
            nu=self.nu,
            psi=self.psi,
            lam=self.lam,
            constant_psi=self.constant_psi,
        )


def _check_keys(given: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ValueError(f"unknown {where} keys: {', '.join(unknown)}")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file (unknown keys are rejected)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"config parse error at {path}:{err.lineno}:{err.colno}: {err.msg}") from err
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")

    env_fields = {f.name for f in dataclasses.fields(EnvironmentSpec)}
    cfg_fields = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"environment", "lam"}
    _check_keys(raw, cfg_fields | {"environment", "lambda"}, "config")

    env_raw = raw.get("environment")
    if not isinstance(env_raw, dict):
        raise ValueError("config requires an 'environment' object")
    _check_keys(env_raw, env_fields, "environment")
    if "kind" not in env_raw:
        raise ValueError("environment requires a 'kind'")
    environment = EnvironmentSpec(**env_raw)

    kwargs = {}
    for key, value in raw.items():
        if key == "environment":
            continue
        kwargs[_KEY_ALIASES.get(key, key)] = value
    if "mode" not in kwargs:
        raise ValueError("config requires a 'mode'")
    return ExperimentConfig(environment=environment, **kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready dict using the external key names; loads back unchanged."""
    doc = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "environment":
            continue
        doc[_FIELD_ALIASES.get(f.name, f.name)] = getattr(cfg, f.name)
    env = dataclasses.asdict(cfg.environment)
    if env["favorable_states"] is not None:
        env["favorable_states"] = [list(c) for c in env["favorable_states"]]
    else:
        del env["favorable_states"]
    doc["environment"] = env
    return doc


def build_environment(spec: EnvironmentSpec):
    params = CongestionGridParams(
        side=spec.side,
        jostle_p=spec.jostle_p,
        congestion_c=spec.congestion_c,
        favorable_reward=spec.favorable_reward,
        baseline_reward=spec.baseline_reward,
        favorable_states=spec.favorable_states,
    )
    if spec.kind == "two_class":
        return make_two_class_env(params)
    return make_congestion_env(params)


def _format_number(x: float) -> str:
    return "" if math.isnan(x) else format(x, ".17g")


def write_episode_csv(path, episodes) -> None:
    """Per-episode diagnostics table; blank cells stand for NaN."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for d in episodes:
            writer.writerow(
                [d.k]
                + [_format_number(v) for v in (d.e_pi, d.e_mu, d.eps_P, d.eps_Q, d.residual_mu)]
            )


def read_episode_csv(path) -> list[EpisodeDiagnostics]:
    """Load a per-episode CSV back into diagnostics records."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns in {path}: {reader.fieldnames}")
        for row in reader:
            values = {
                name: (math.nan if row[name] == "" else float(row[name]))
                for name in CSV_COLUMNS[1:]
            }
            out.append(EpisodeDiagnostics(k=int(row["k"]), **values))
    return out


def _build_net(cfg: ExperimentConfig, num_states: int):
    if not cfg.use_projection:
        return None
    try:
        return build_epsilon_net(num_states, cfg.epsilon_net_mesh, cfg.net_point_budget)
    except ValueError:
        coarser = feasible_mesh(num_states, cfg.epsilon_net_mesh, cfg.net_point_budget)
        logger.warning(
            "net mesh %g over %d states exceeds the %d-point budget; using mesh %g",
            cfg.epsilon_net_mesh,
            num_states,
            cfg.net_point_budget,
            coarser,
        )
        return build_epsilon_net(num_states, coarser, cfg.net_point_budget)


def _solve_reference(cfg: ExperimentConfig, env):
    return solve_bmfe(
        env,
        lam=cfg.lam,
        rho=cfg.rho,
        damping=cfg.damping,
        tol=cfg.bmfe_tol,
        max_iter=cfg.bmfe_max_iter,
        vi_tol=cfg.vi_tol,
    )


def _write_bmfe(out_dir: Path, cfg: ExperimentConfig, pair) -> None:
    doc = snapshots.equilibrium_snapshot(pair)
    doc.update({"lambda": cfg.lam, "rho": cfg.rho, "damping": cfg.damping, "tol": cfg.bmfe_tol})
    snapshots.write_json(out_dir / "bmfe.json", doc)


def _run_one_seed(cfg: ExperimentConfig, env, oracle, seed: int, out_dir: Path):
    run_config = SandboxConfig(
        env=env,
        schedule=cfg.schedule(),
        num_episodes=cfg.K,
        steps_per_episode=cfg.T,
        rho=cfg.rho,
        seed=seed,
        use_projection=cfg.use_projection,
        net=_build_net(cfg, env.dims.num_states),
        diagnostics_oracle=oracle,
        diagnostics_every=cfg.diagnostics_every,
        per_step_residual=cfg.per_step_residual,
        validate_every=cfg.validate_every,
    )
    started = time.perf_counter()
    result = run_sandbox(run_config)
    elapsed = time.perf_counter() - started
    logger.info("seed %d finished in %.1f s", seed, elapsed)
    write_episode_csv(out_dir / f"episodes_seed{seed}.csv", result.per_episode)
    summary = {
        "schema_version": snapshots.SCHEMA_VERSION,
        "kind": "run_summary",
        "seed": seed,
        "num_episodes": cfg.K,
        "steps_per_episode": cfg.T,
        "avg_mean_field": result.avg_mean_field.probs.tolist(),
        "avg_policy": result.avg_policy.table.tolist(),
        "min_policy_entry": result.min_policy_entry,
    }
    snapshots.write_json(out_dir / f"summary_seed{seed}.json", summary)
    return result


def _run_sandbox_mode(cfg: ExperimentConfig, out_dir: Path) -> int:
    env = build_environment(cfg.environment)
    pair = _solve_reference(cfg, env)
    _write_bmfe(out_dir, cfg, pair)
    oracle = DiagnosticsOracle(env, cfg.lam, cfg.rho, pair.mean_field.probs, vi_tol=cfg.vi_tol)
    _run_one_seed(cfg, env, oracle, cfg.seed, out_dir)
    return EXIT_OK


def _run_oracle_mode(cfg: ExperimentConfig, out_dir: Path) -> int:
    env = build_environment(cfg.environment)
    pair = _solve_reference(cfg, env)
    _write_bmfe(out_dir, cfg, pair)
    if not pair.converged:
        logger.warning("equilibrium solve hit max_iter; residual_mu=%g", pair.residual_mu)
    return EXIT_OK


def _run_probe_mode(cfg: ExperimentConfig, out_dir: Path) -> int:
    env = build_environment(cfg.environment)
    rng = np.random.default_rng(cfg.seed)
    estimate = probe_contraction(env, cfg.lam, cfg.rho, cfg.probe_pairs, rng, vi_tol=cfg.vi_tol)
    snapshots.write_json(
        out_dir / "contraction.json",
        {
            "schema_version": snapshots.SCHEMA_VERSION,
            "kind": "contraction_probe",
            "seed": cfg.seed,
            "num_pairs": estimate.num_pairs,
            "d1_hat": estimate.d1_hat,
            "d2_hat": estimate.d2_hat,
            "d3_hat": estimate.d3_hat,
            "d_hat": estimate.d_hat,
            "contraction_verified": estimate.d_hat < 1.0,
        },
    )
    return EXIT_OK


def _run_compare_mode(cfg: ExperimentConfig, out_dir: Path) -> int:
    env = build_environment(cfg.environment)
    pair = _solve_reference(cfg, env)
    _write_bmfe(out_dir, cfg, pair)
    oracle = DiagnosticsOracle(env, cfg.lam, cfg.rho, pair.mean_field.probs, vi_tol=cfg.vi_tol)
    seeds = [cfg.seed + i for i in range(cfg.num_seeds)]
    # Runs are independent (own generator and estimators, read-only env), so
    # they may execute concurrently; the aggregate is written after all join.
    with ThreadPoolExecutor(max_workers=min(len(seeds), 8)) as pool:
        futures = [pool.submit(_run_one_seed, cfg, env, oracle, seed, out_dir) for seed in seeds]
        results = [f.result() for f in futures]
    per_seed = [
        {
            "seed": seed,
            "l1_mean_field": l1_norm(res.avg_mean_field.probs - pair.mean_field.probs),
            "tv_policy": tv_norm(res.avg_policy.table - pair.policy.table),
        }
        for seed, res in zip(seeds, results)
    ]
    aggregate = {
        "schema_version": snapshots.SCHEMA_VERSION,
        "kind": "compare_aggregate",
        "seeds": seeds,
        "per_seed": per_seed,
        "median_l1_mean_field": statistics.median(r["l1_mean_field"] for r in per_seed),
        "median_tv_policy": statistics.median(r["tv_policy"] for r in per_seed),
        "bmfe_converged": pair.converged,
    }
    snapshots.write_json(out_dir / "aggregate.json", aggregate)
    return EXIT_OK


_MODE_RUNNERS = {
    "sandbox": _run_sandbox_mode,
    "oracle": _run_oracle_mode,
    "probe": _run_probe_mode,
    "compare": _run_compare_mode,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns a process exit code."""
    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        code = _MODE_RUNNERS[cfg.mode](cfg, out_dir)
        logger.info("mode %s finished in %.1f s", cfg.mode, time.perf_counter() - started)
        return code
    except NonFiniteError as err:
        logger.error("%s; state snapshot written to abort_snapshot.json", err)
        try:
            snapshots.write_json(out_dir / "abort_snapshot.json", err.snapshot)
        except OSError:
            logger.error("could not write abort snapshot")
        return EXIT_NON_FINITE
    except OSError as err:
        logger.error("I/O failure: %s", err)
        return EXIT_IO


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfg-sandbox",
        description="Learn and verify Boltzmann mean-field equilibria on grid congestion games.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--output-dir", default=None, help="override the config output_dir")
    parser.add_argument("--mode", default=None, choices=MODES, help="override the config mode")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.output_dir is not None:
            overrides["output_dir"] = args.output_dir
        if args.mode is not None:
            overrides["mode"] = args.mode
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
