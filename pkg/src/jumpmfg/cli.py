"""``jumpmfg`` command line.

Every subcommand reads a run configuration (``--config``, default: the
bundled calibration), applies flag overrides, writes CSV (and SVG) outputs
into ``--out`` together with ``manifest.json``.  Timing lives in a separate
``run_time.json`` so the rest of the output directory is reproducible.

Exit codes: 0 ok, 2 configuration error, 3 solver or simulation failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .best_response import BestResponseInput, best_response_partials, g_value, solve_best_response
from .config import RunConfig, load_config
from .errors import ConfigError, ConvergenceError, SimulationError, SolverError
from .experiments import (DEFAULT_GRIDS, SCENARIOS, SWEEP_PARAMS, best_response_surface, competition_uplift,
                          convergence_study, loglog_slope, scenario_spec, sensitivity_sweep, write_rows_csv)
from .fixedpoint import fmt, write_trace_csv
from .mfe import MfeProblem, contraction_epsilon, empirical_lipschitz, equilibrium_strategies, solve_mfe
from .model import Population, sample_roster
from .nash import NashProblem, solve_nash, verify_nash_by_deviation, write_solution_csv
from .sim import simulate_wealth, terminal_moments, wealth_paths

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> list[float]:
    """``lo:hi:n`` (inclusive linspace) or an explicit comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must be lo:hi:n")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError("grid needs n >= 1")
        return [float(x) for x in np.linspace(lo, hi, n)]
    return _floats(text)


def _agent(text: str):
    try:
        pop, idx = text.split(":")
        pop, idx = int(pop), int(idx)
    except ValueError:
        raise argparse.ArgumentTypeError("agent must look like POP:INDEX, e.g. 2:0") from None
    if pop not in (1, 2) or idx < 0:
        raise argparse.ArgumentTypeError("population must be 1 or 2 and index >= 0")
    return pop, idx


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (default: bundled calibration)")
    common.add_argument("--seed", type=int, help="overrides every seed in the configuration")
    common.add_argument("--samples", type=int, help="frozen sample size per population")
    common.add_argument("--tol", type=float, help="best-response root tolerance")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")

    p = argparse.ArgumentParser(prog="jumpmfg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("best-response", parents=[common], help="best response of the mean type at given loadings")
    s.add_argument("--pop", type=int, choices=(1, 2), default=2)
    s.add_argument("--u", type=_floats, default=[0.0], help="comma list of u values")
    s.add_argument("--v", type=_floats, default=[0.0], help="comma list of v values")
    s.add_argument("--n-players", type=int, help="use the finite-game form with this population size")

    sub.add_parser("mfe", parents=[common], help="mean-field equilibrium of both populations")

    sub.add_parser("nash", parents=[common], help="Nash equilibrium of the finite roster in [game]")

    s = sub.add_parser("simulate", parents=[common], help="simulate terminal wealth at the Nash strategies")
    s.add_argument("--agent", type=_agent, default=(2, 0), help="agent whose paths are plotted (POP:INDEX)")
    s.add_argument("--paths-out", type=int, default=1000, help="paths written to terminal.csv")

    s = sub.add_parser("deviation-check", parents=[common], help="Monte Carlo unilateral deviation test")
    s.add_argument("--agent", type=_agent, default=(2, 0))
    s.add_argument("--h", type=_floats, default=[0.1, 0.5, 1.0], help="comma list of perturbation sizes")

    s = sub.add_parser("surface", parents=[common], help="best-response surface over (u, v)")
    s.add_argument("--pop", type=int, choices=(1, 2), default=2)
    s.add_argument("--u-grid", type=_grid, default=_grid("-2:2:21"))
    s.add_argument("--v-grid", type=_grid, default=_grid("-2:2:21"))

    s = sub.add_parser("converge", parents=[common], help="distance of Nash means to the MFE as N grows")
    s.add_argument("--schedule", type=_ints, default=[125, 250, 500, 1000, 2000])
    s.add_argument("--no-corrections", action="store_true", help="drop the finite-N terms")

    s = sub.add_parser("sweep", parents=[common], help="sensitivity sweep of E[pi*] in one parameter")
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--scenario", choices=SCENARIOS, required=True)
    s.add_argument("--grid", type=_grid, help="lo:hi:n or comma list (default: built-in grid)")

    s = sub.add_parser("uplift", parents=[common], help="mean-type strategy with vs without competition")
    s.add_argument("--scenario", choices=SCENARIOS, default="d3")

    s = sub.add_parser("check-contraction", parents=[common], help="contraction threshold and empirical Lipschitz")
    s.add_argument("--pairs", type=int, default=1000)
    s.add_argument("--radius", type=float, default=10.0)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.solver["seed"] = cfg.game["seed"] = cfg.sim["seed"] = args.seed
    if args.samples is not None:
        cfg.solver["samples"] = args.samples
    if args.tol is not None:
        cfg.solver["tol"] = args.tol
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    cfg.settings()
    if cfg.solver["samples"] < 1:
        raise ConfigError("samples must be >= 1")
    if not cfg.solver["tol"] > 0:
        raise ConfigError("tol must be > 0")
    return cfg


def _mfe_problem(cfg: RunConfig) -> MfeProblem:
    s = cfg.solver
    return MfeProblem(cfg.spec1, cfg.spec2, expectation_sample_size=s["samples"], expectation_seed=s["seed"],
                      fp_tol=s["fp_tol"], fp_max_iter=s["fp_max_iter"], damping=s["damping"], tol=s["tol"])


def _nash_problem(cfg: RunConfig) -> NashProblem:
    s, g = cfg.solver, cfg.game
    roster = sample_roster(cfg.spec1, cfg.spec2, g["n1"], g["n2"], g["seed"])
    return NashProblem(roster, fp_tol=s["fp_tol"], fp_max_iter=s["fp_max_iter"], damping=s["damping"], tol=s["tol"])


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(x) for x in r) + "\n")


def cmd_best_response(cfg, args, out):
    spec = cfg.spec1 if args.pop == 1 else cfg.spec2
    zeta = spec.mean_type()
    if args.n_players is not None and args.n_players < 1:
        raise ConfigError("--n-players must be >= 1")
    own = zeta.lambda1 if args.pop == 1 else zeta.lambda2
    corr = 0.0 if args.n_players is None else own / args.n_players
    rows = []
    for u in args.u:
        for v in args.v:
            inp = BestResponseInput(zeta, u, v, corr, Population(args.pop))
            pi = solve_best_response(inp, cfg.solver["tol"])
            du, dv = best_response_partials(pi, inp)
            rows.append((u, v, pi, du, dv, g_value(pi, inp)))
    _write_csv(out / "best_response.csv", ["u", "v", "pi", "dpi_du", "dpi_dv", "g"], rows)
    for r in rows:
        print(f"u={fmt(r[0])} v={fmt(r[1])} pi*={fmt(r[2])}")


def cmd_mfe(cfg, args, out):
    problem = _mfe_problem(cfg)
    res = solve_mfe(problem)
    m = res.means
    _write_csv(out / "equilibrium.csv", ["x1", "x2", "y", "residual", "iterations"],
               [(m.x1, m.x2, m.y, res.residual, res.iterations)])
    write_trace_csv(res.trace, out / "trace.csv")
    pi1, pi2 = equilibrium_strategies(problem, m)
    _write_csv(out / "strategy_summary.csv", ["population", "mean_pi", "min_pi", "max_pi"],
               [(1, pi1.mean(), pi1.min(), pi1.max()), (2, pi2.mean(), pi2.min(), pi2.max())])
    plotting.plot_trace(res.trace, out / "trace.svg")
    print(f"x1={fmt(m.x1)} x2={fmt(m.x2)} y={fmt(m.y)} residual={res.residual:.3g} iterations={res.iterations}")


def cmd_nash(cfg, args, out):
    problem = _nash_problem(cfg)
    sol = solve_nash(problem)
    m = sol.means
    _write_csv(out / "nash.csv", ["x1", "x2", "y", "residual", "iterations"],
               [(m.x1, m.x2, m.y, sol.residual, sol.iterations)])
    write_solution_csv(sol, problem.roster, out / "strategies.csv")
    write_trace_csv(sol.trace, out / "trace.csv")
    print(f"x1={fmt(m.x1)} x2={fmt(m.x2)} y={fmt(m.y)} residual={sol.residual:.3g} iterations={sol.iterations}")


def cmd_simulate(cfg, args, out):
    problem = _nash_problem(cfg)
    sol = solve_nash(problem)
    roster = problem.roster
    pop, idx = args.agent
    if idx >= (roster.n1 if pop == 1 else roster.n2):
        raise ConfigError(f"agent index {idx} out of range for population {pop}")
    sc = cfg.sim_config()
    bundle = simulate_wealth(roster, (sol.strategies_pop1, sol.strategies_pop2), None, None, sc)
    rows = []
    for p, sample, strat in ((1, roster.pop1, sol.strategies_pop1), (2, roster.pop2, sol.strategies_pop2)):
        x = bundle.terminal_wealth(p)
        exact_m, exact_v = terminal_moments(sample, strat, sc.horizon_T)
        for i in range(len(sample)):
            rows.append((p, i, strat[i], x[:, i].mean(), x[:, i].var(ddof=1), exact_m[i], exact_v[i],
                         x[:, i].std(ddof=1) / np.sqrt(sc.n_paths)))
    _write_csv(out / "moments.csv", ["population", "index", "strategy", "mean", "var", "exact_mean",
                                     "exact_var", "mean_se"], rows)
    k = min(args.paths_out, sc.n_paths)
    trows = [(path, p, i, x[path, i])
             for p, x in ((1, bundle.terminal_wealth1), (2, bundle.terminal_wealth2))
             for path in range(k) for i in range(x.shape[1])]
    _write_csv(out / "terminal.csv", ["path", "population", "agent", "X_T"], trows)
    t, paths = wealth_paths(bundle, roster, pop, idx, n_paths=20)
    plotting.plot_wealth(t, paths, bundle.terminal_wealth(pop)[:, idx], out / "wealth.svg",
                         title=f"population {pop}, agent {idx}")
    print(f"simulated {sc.n_paths} paths for {roster.n1}+{roster.n2} agents")


def cmd_deviation(cfg, args, out):
    problem = _nash_problem(cfg)
    sol = solve_nash(problem)
    rep = verify_nash_by_deviation(sol, problem, args.agent, cfg.sim_config(), tuple(args.h))
    rows = [(0.0, rep.strategy, rep.utility, rep.utility_ci, 0.0, 0.0, 1)]
    rows += [(r.h, r.strategy, r.utility, r.utility_ci, r.diff, r.diff_ci, int(r.ok)) for r in rep.rows]
    _write_csv(out / "deviation.csv", ["h", "strategy", "utility", "utility_ci", "diff", "diff_ci", "ok"], rows)
    print(f"agent {rep.population}:{rep.index} pi*={fmt(rep.strategy)} utility={fmt(rep.utility)}"
          f" +- {rep.utility_ci:.3g}")
    for r in rep.rows:
        print(f"  h={r.h:+g}: diff={r.diff:.4g} +- {r.diff_ci:.3g} {'ok' if r.ok else 'BEATEN'}")
    print("PASS" if rep.ok else "FAIL")


def cmd_surface(cfg, args, out):
    spec = cfg.spec1 if args.pop == 1 else cfg.spec2
    rows = best_response_surface(spec.mean_type(), args.u_grid, args.v_grid, cfg.solver["tol"])
    write_rows_csv(rows, out / "surface.csv")
    plotting.plot_surface(rows, out / "surface.svg")
    print(f"{len(rows)} grid points written")


def cmd_converge(cfg, args, out):
    rows = convergence_study(cfg.spec1, cfg.spec2, args.schedule, cfg.seed, cfg.settings(),
                             reference_size=cfg.solver["samples"], corrections=not args.no_corrections)
    write_rows_csv(rows, out / "convergence.csv")
    plotting.plot_convergence(rows, out / "convergence.svg")
    finite = [r for r in rows if r["n"] > 0 and r["distance"] > 0]
    for r in rows[:-1]:
        print(f"n={r['n']}: distance={r['distance']:.4g}")
    if len(finite) >= 2:
        print(f"log-log slope: {loglog_slope([r['n'] for r in finite], [r['distance'] for r in finite]):.3f}")


def cmd_sweep(cfg, args, out):
    grid = args.grid if args.grid is not None else list(DEFAULT_GRIDS[args.param])
    rows = sensitivity_sweep(args.scenario, args.param, grid, cfg.spec1, cfg.spec2, cfg.seed,
                             cfg.settings(), threads=args.threads)
    stem = f"sweep_{args.scenario}_{args.param}"
    write_rows_csv(rows, out / f"{stem}.csv", [args.param, "mean_pi", "mean_type_pi", "x1", "x2", "y"])
    plotting.plot_sweep(rows, args.param, out / f"{stem}.svg", title=f"scenario {args.scenario}")
    for r in rows:
        print(f"{args.param}={fmt(r[args.param])}: E[pi*]={fmt(r['mean_pi'])}")


def cmd_uplift(cfg, args, out):
    spec = cfg.spec1 if args.scenario != "d3" else cfg.spec2
    if args.scenario == "d1":
        spec = scenario_spec("d1", cfg.spec1, cfg.spec2)
    r = competition_uplift(spec, cfg.seed, args.scenario, cfg.settings())
    cols = ["pi_with", "pi_without", "pi_gamma0", "shortfall", "uplift", "x1", "x2", "y"]
    _write_csv(out / "uplift.csv", cols, [[r[c] for c in cols]])
    print(f"with competition {fmt(r['pi_with'])}, without {fmt(r['pi_without'])}, gamma=0 {fmt(r['pi_gamma0'])}")
    print(f"without is {100 * r['shortfall']:.2f}% lower; with is {100 * r['uplift']:.2f}% higher")


def cmd_contraction(cfg, args, out):
    problem = _mfe_problem(cfg)
    chk = contraction_epsilon(problem)
    lhat = empirical_lipschitz(problem, args.pairs, args.radius, seed=cfg.seed)
    ok = chk.within and lhat < 5 / 6
    _write_csv(out / "contraction.csv", ["epsilon", "lambda_sup", "L_hat", "pass"],
               [(chk.epsilon, chk.lambda_sup, lhat, int(ok))])
    print(f"epsilon={fmt(chk.epsilon)}")
    print(f"lambda_sup={fmt(chk.lambda_sup)}")
    print(f"L_hat={fmt(lhat)}")
    print("PASS" if ok else "FAIL")


COMMANDS = {
    "best-response": cmd_best_response, "mfe": cmd_mfe, "nash": cmd_nash, "simulate": cmd_simulate,
    "deviation-check": cmd_deviation, "surface": cmd_surface, "converge": cmd_converge, "sweep": cmd_sweep,
    "uplift": cmd_uplift, "check-contraction": cmd_contraction,
}


def _manifest(cfg: RunConfig, args, argv) -> dict:
    import matplotlib

    return {
        "command": args.command,
        "argv": list(argv),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": {"jumpmfg": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "matplotlib": matplotlib.__version__},
    }


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    try:
        cfg = resolve_config(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args, out)
        with open(out / "manifest.json", "w") as fh:
            json.dump(_manifest(cfg, args, argv), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "run_time.json", "w") as fh:
            json.dump({"started": stamp, "wall_time_s": round(time.perf_counter() - start, 3)}, fh, indent=2)
            fh.write("\n")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"no convergence: {exc} (last residual {exc.residual:.3g})", file=sys.stderr)
        return EXIT_SOLVER
    except (SolverError, SimulationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
