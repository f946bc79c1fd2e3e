"""Command-line entry point.

Subcommands wire a model JSON file to the solvers, the simulator and the
analysis outputs, and ``uav-demo`` reproduces the bundled vehicle-tracking
study end to end.  All outputs are deterministic given (config, seed).

Exit codes: 0 success, 2 configuration error, 3 infeasible finite-horizon
problem, 4 not stabilizable / assumption violated, 5 gains file missing.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analysis, riccati, simulate, uav
from .controller import as_gain_schedule
from .errors import AssumptionViolated, InfeasibleProblem, NcsError, NotStabilizable
from .model import NcsModel, load_model, save_model
from .simulate import SimConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_STABILIZABLE = 4
EXIT_MISSING_GAINS = 5

DEFAULT_SEED = 2024
DEFAULT_ROLLOUTS = 10000
DEFAULT_TOL = riccati.DEFAULT_TOL


class ConfigError(Exception):
    pass


class MissingGains(Exception):
    pass


@dataclass
class RunConfig:
    model_path: Path | None
    out_dir: Path
    seed: int
    rollouts: int
    horizon: int
    p: float | None
    tol: float
    max_iter: int
    noise: bool
    p_grid: list[float] | None
    gains_path: Path | None
    trace_count: int


def _parse_p_grid(arg: str) -> list[float]:
    try:
        a, b, step = (float(v) for v in arg.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--p-grid must be a:b:step, got {arg!r}") from exc
    if step <= 0:
        raise ConfigError(f"--p-grid step must be > 0, got {step}")
    grid = []
    i = 0
    while True:
        v = a + i * step
        if v > b + 1e-12:
            break
        grid.append(round(v, 12))
        i += 1
    if not grid:
        raise ConfigError(f"--p-grid {arg!r} is empty")
    return grid


def _build_run_config(args) -> RunConfig:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.config) if getattr(args, "config", None) else None
    if model_path is not None and not model_path.is_file():
        raise ConfigError(f"model file not found: {model_path}")
    p = getattr(args, "p", None)
    grid = _parse_p_grid(args.p_grid) if getattr(args, "p_grid", None) else None
    return RunConfig(
        model_path=model_path,
        out_dir=out_dir,
        seed=args.seed,
        rollouts=args.rollouts,
        horizon=args.horizon,
        p=p,
        tol=args.tol,
        max_iter=args.max_iter,
        noise=(getattr(args, "noise", "on") == "on"),
        p_grid=grid,
        gains_path=Path(args.gains) if getattr(args, "gains", None) else None,
        trace_count=getattr(args, "trace", 0),
    )


def _load_model(cfg: RunConfig) -> NcsModel:
    if cfg.model_path is None:
        raise ConfigError("a --config model file is required")
    try:
        model = load_model(cfg.model_path)
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"cannot read model {cfg.model_path}: {exc}") from exc
    if cfg.p is not None:
        model = dataclasses.replace(model, p=cfg.p)
    return model


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_gain_csv(sol: riccati.FiniteHorizonSolution, path: Path) -> None:
    sched = as_gain_schedule(sol)
    m, n = sol.K.shape[1], sol.K.shape[2]
    mL = sol.local_dim
    header = (["k"]
              + [f"K_{i}_{j}" for i in range(m) for j in range(n)]
              + [f"corr_{i}_{j}" for i in range(mL) for j in range(n)])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(sol.N + 1):
            K_k, corr_k = sched.gains_at(k)
            row = ([str(k)]
                   + [repr(float(v)) for v in K_k.ravel()]
                   + [repr(float(v)) for v in corr_k.ravel()])
            fh.write(",".join(row) + "\n")


def cmd_solve_finite(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    sol = riccati.backward_recursion(model, cfg.horizon)
    cost = riccati.finite_optimal_cost(model, sol)
    riccati.save_solution(sol, cfg.out_dir / "finite_solution.json")
    _write_gain_csv(sol, cfg.out_dir / "finite_gains.csv")
    _write_json(cfg.out_dir / "cost_summary.json",
                {"horizon": cfg.horizon, "p": model.p, "optimal_cost": cost})
    print(f"solved horizon {cfg.horizon} at p={model.p}: optimal cost {cost:.6f}")


def cmd_solve_infinite(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    gains = riccati.value_iteration(model, tol=cfg.tol, max_iter=cfg.max_iter)
    report = analysis.stability_margin(model, gains)
    riccati.save_solution(gains, cfg.out_dir / "stationary_gains.json")
    doc = analysis.stability_report_to_dict(report)
    doc["regulator_spectral_radius"] = analysis.regulator_spectral_radius(model, gains)
    doc["average_stage_cost"] = riccati.stationary_average_cost(gains, model.Q_omega, model.p)
    _write_json(cfg.out_dir / "stability_report.json", doc)
    print(f"stationary gains at p={model.p}: rho={report.rho:.6f} "
          f"({gains.iterations_used} iterations, residual {gains.residual:.2e})")


def _load_gains(cfg: RunConfig):
    path = cfg.gains_path
    if path is None:
        for name in ("stationary_gains.json", "finite_solution.json"):
            cand = cfg.out_dir / name
            if cand.is_file():
                path = cand
                break
    if path is None or not Path(path).is_file():
        raise MissingGains(
            f"no gains file found (looked for --gains, "
            f"{cfg.out_dir / 'stationary_gains.json'} and "
            f"{cfg.out_dir / 'finite_solution.json'})")
    return riccati.load_solution(path)


def cmd_simulate(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    gains = _load_gains(cfg)
    config = SimConfig(seed=cfg.seed, rollouts=cfg.rollouts, horizon=cfg.horizon,
                       noise_enabled=cfg.noise, record_trace=cfg.trace_count > 0)
    agg = simulate.monte_carlo(model, gains, config)
    simulate.write_aggregates_json(agg, cfg.out_dir / "aggregates.json")
    series = f"p{model.p:g}-noise-{'on' if cfg.noise else 'off'}"
    simulate.write_curve_csv(cfg.out_dir / "mean_square_state.csv",
                             [(series, agg.mean_square_state)])
    for i in range(cfg.trace_count):
        trace = simulate.rollout(model, gains, config, i)
        simulate.write_trace_csv(trace, cfg.out_dir / f"trace_{i:03d}.csv")
    print(f"simulated {cfg.rollouts} rollouts (noise "
          f"{'on' if cfg.noise else 'off'}): mean cost {agg.mean_total_cost:.6f} "
          f"+/- {agg.cost_std_error:.6f}")


def cmd_sweep_p(cfg: RunConfig) -> None:
    model = _load_model(cfg)
    if not cfg.p_grid:
        raise ConfigError("--p-grid is required for sweep-p")
    table = analysis.cost_sweep(model, cfg.horizon, cfg.p_grid)
    analysis.write_sweep_csv(table, cfg.out_dir / "cost_vs_p.csv")
    print(f"swept {len(table)} drop probabilities over horizon {cfg.horizon}")


def cmd_uav_demo(cfg: RunConfig) -> None:
    out = cfg.out_dir
    N = cfg.horizon
    model = uav.uav_model()
    save_model(model, out / "model.json")

    # Finite-horizon solve + closed-form cost at the bundled p.
    finite_cfg = dataclasses.replace(cfg, model_path=out / "model.json", p=None)
    cmd_solve_finite(finite_cfg)

    # Energy cost against the drop probability.
    sweep_cfg = dataclasses.replace(finite_cfg, p_grid=[round(0.1 * i, 12) for i in range(11)])
    cmd_sweep_p(sweep_cfg)

    # Velocity trajectories (one seeded rollout per drop probability).
    velocity_curves = []
    for p in (0.0, 0.5, 1.0):
        m_p = uav.uav_model(p)
        sol = riccati.backward_recursion(m_p, N)
        trace = simulate.rollout(
            m_p, sol, SimConfig(seed=cfg.seed, rollouts=1, horizon=N), 0)
        velocity = trace.u_local[:, 0] + trace.u_remote[:, 0]
        velocity_curves.append((f"p{p:g}", velocity))
    simulate.write_curve_csv(out / "fig_velocity.csv", velocity_curves)

    # Mean-square state trajectories: noise-free decay and noisy plateau.
    p_decay = cfg.p if cfg.p is not None else 0.5
    p_plateau = cfg.p if cfg.p is not None else 0.6
    for tag, p, noise in (("noise_off", p_decay, False), ("noise_on", p_plateau, True)):
        m_p = uav.uav_model(p)
        gains = riccati.value_iteration(m_p, tol=cfg.tol, max_iter=cfg.max_iter)
        riccati.save_solution(gains, out / f"stationary_gains_{tag}.json")
        report = analysis.stability_margin(m_p, gains)
        doc = analysis.stability_report_to_dict(report)
        doc["regulator_spectral_radius"] = analysis.regulator_spectral_radius(m_p, gains)
        doc["average_stage_cost"] = riccati.stationary_average_cost(gains, m_p.Q_omega, p)
        _write_json(out / f"stability_report_{tag}.json", doc)
        agg = simulate.monte_carlo(
            m_p, gains, SimConfig(seed=cfg.seed, rollouts=cfg.rollouts,
                                  horizon=N, noise_enabled=noise))
        simulate.write_aggregates_json(agg, out / f"aggregates_{tag}.json")
        simulate.write_curve_csv(out / f"fig_msq_{tag}.csv",
                                 [(f"p{p:g}-{tag}", agg.mean_square_state)])
    print(f"demo artifacts written to {out}")


def _add_common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
    if needs_config:
        p.add_argument("--config", required=True, help="model JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--rollouts", type=int, default=DEFAULT_ROLLOUTS)
    p.add_argument("--horizon", type=int, default=uav.DEFAULT_HORIZON)
    p.add_argument("--p", type=float, default=None, help="override drop probability")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=riccati.DEFAULT_MAX_ITER)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncslqg",
        description="Optimal local+remote control over a packet-drop channel")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-finite", help="backward recursion over a horizon")
    _add_common(p)

    p = sub.add_parser("solve-infinite", help="stationary gains by value iteration")
    _add_common(p)

    p = sub.add_parser("simulate", help="seeded Monte Carlo of the closed loop")
    _add_common(p)
    p.add_argument("--noise", choices=("on", "off"), default="on")
    p.add_argument("--gains", default=None,
                   help="gains JSON (default: look in the output directory)")
    p.add_argument("--trace", type=int, default=0,
                   help="export this many rollout traces as CSV")

    p = sub.add_parser("sweep-p", help="optimal cost over a drop-probability grid")
    _add_common(p)
    p.add_argument("--p-grid", required=True, help="grid as a:b:step")

    p = sub.add_parser("uav-demo", help="run the bundled vehicle-tracking study")
    _add_common(p, needs_config=False)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {
        "solve-finite": cmd_solve_finite,
        "solve-infinite": cmd_solve_infinite,
        "simulate": cmd_simulate,
        "sweep-p": cmd_sweep_p,
        "uav-demo": cmd_uav_demo,
    }
    try:
        cfg = _build_run_config(args)
        commands[args.command](cfg)
    except MissingGains as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_GAINS
    except InfeasibleProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NotStabilizable, AssumptionViolated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_STABILIZABLE
    except (ConfigError, NcsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
