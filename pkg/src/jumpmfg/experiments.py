"""Numerical studies: best-response surfaces, Nash-to-MFE convergence,
sensitivity sweeps and the competition uplift.

Single-population scenarios
---------------------------
``d1``  population 1, Brownian noise only (gamma forced to 0)
``d2``  population 1 with idiosyncratic Poisson jumps
``d3``  population 2 with Poisson common noise

In each scenario the focal population ignores the other one (cross weight
set to 0) and the other population is an inert placeholder that holds
nothing.  The focal sample is drawn from a scenario-independent stream, so
all scenarios and all grid points of a sweep share the same standardized
draws (common random numbers).
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .best_response import DEFAULT_TOL, jump_free_root, partials_array, solve_array
from .errors import ConfigError
from .fixedpoint import EquilibriumMeans, fmt
from .mfe import MfeProblem, best_responses, equilibrium_strategies, solve_mfe
from .model import (AgentRoster, Population, PopulationSpec, TypeSample, TypeVector,
                    deterministic_spec, sample_population, sample_roster, substream)
from .nash import NashProblem, solve_nash

SCENARIOS = ("d1", "d2", "d3")
SWEEP_PARAMS = ("gamma", "sigma0", "lambda")
DEFAULT_GRIDS = {
    "gamma": np.linspace(-0.1, -0.01, 11),
    "sigma0": np.linspace(0.05, 0.2, 11),
    "lambda": np.linspace(0.0, 0.3, 11),
}


@dataclass(frozen=True)
class SolverSettings:
    samples: int = 2000
    fp_tol: float = 1e-10
    fp_max_iter: int = 10_000
    damping: float = 1.0
    tol: float = DEFAULT_TOL


def focal_population(scenario: str) -> Population:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    return Population.POP2 if scenario == "d3" else Population.POP1


def own_field(pop) -> str:
    return "lambda1" if Population(pop) == Population.POP1 else "lambda2"


def cross_field(pop) -> str:
    return "lambda2" if Population(pop) == Population.POP1 else "lambda1"


def scenario_spec(scenario: str, spec1: PopulationSpec, spec2: PopulationSpec) -> PopulationSpec:
    """Focal population spec of a scenario (cross weight zeroed, gamma=0 for d1)."""
    pop = focal_population(scenario)
    spec = spec1 if pop == Population.POP1 else spec2
    spec = spec.with_marginal(cross_field(pop), 0.0, 0.0)
    if scenario == "d1":
        spec = spec.with_marginal("gamma", 0.0, 0.0)
    return spec


def inert_spec(pop) -> PopulationSpec:
    return deterministic_spec(pop, nu=0.0, sigma=1.0)


def scenario_roster(spec: PopulationSpec, n: int, seed: int) -> AgentRoster:
    focal = sample_population(spec, n, substream(seed, "experiment/focal"))
    other_pop = Population.POP2 if spec.population_id == Population.POP1 else Population.POP1
    other = sample_population(inert_spec(other_pop), 1, substream(seed, "experiment/inert"))
    return AgentRoster(focal, other, seed) if other_pop == Population.POP2 else AgentRoster(other, focal, seed)


def type_strategy(zeta: TypeVector, pop, means: EquilibriumMeans, n_players=None, tol=DEFAULT_TOL) -> float:
    """Equilibrium strategy of a given type (e.g. the mean type) at ``means``."""
    pop = Population(pop)
    one = TypeSample.from_types(pop, [zeta])
    dummy = TypeSample.from_types(Population.POP2 if pop == Population.POP1 else Population.POP1,
                                  [TypeVector(0, 1, 0, 0, 0, 1, 0, 0, 0)])
    roster = AgentRoster(one, dummy) if pop == Population.POP1 else AgentRoster(dummy, one)
    nps = None if n_players is None else (n_players, n_players)
    pi1, pi2 = best_responses(roster, means.array(), nps, tol)
    return float((pi1 if pop == Population.POP1 else pi2)[0])


@dataclass
class ScenarioResult:
    scenario: str
    means: EquilibriumMeans
    mean_pi: float  # sample average of equilibrium strategies
    mean_type_pi: float
    iterations: int
    residual: float


def solve_scenario(scenario: str, spec: PopulationSpec, seed: int,
                   settings: SolverSettings = SolverSettings()) -> ScenarioResult:
    """Solve the single-population MFE of ``scenario`` for focal ``spec``."""
    pop = focal_population(scenario)
    if spec.population_id != pop:
        raise ConfigError(f"scenario {scenario} needs a population-{int(pop)} spec")
    roster = scenario_roster(spec, settings.samples, seed)
    problem = MfeProblem.from_sample(roster, fp_tol=settings.fp_tol, fp_max_iter=settings.fp_max_iter,
                                     damping=settings.damping, tol=settings.tol)
    res = solve_mfe(problem)
    pi1, pi2 = equilibrium_strategies(problem, res.means)
    pis = pi1 if pop == Population.POP1 else pi2
    mt = type_strategy(spec.mean_type(), pop, res.means, tol=settings.tol)
    return ScenarioResult(scenario, res.means, float(np.mean(pis)), mt, res.iterations, res.residual)


def with_param(spec: PopulationSpec, param: str, value: float, rel_std: float = 0.1) -> PopulationSpec:
    """Set a parameter mean; std follows as ``rel_std`` * |mean|."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    name = own_field(spec.population_id) if param == "lambda" else param
    return spec.with_marginal(name, float(value), rel_std * abs(float(value)))


def sensitivity_sweep(scenario: str, param: str, grid, spec1: PopulationSpec, spec2: PopulationSpec,
                      seed: int, settings: SolverSettings = SolverSettings(), rel_std: float = 0.1,
                      threads: int = 1) -> list[dict]:
    """E[pi*] of a scenario's MFE at each grid value of ``param``."""
    base = scenario_spec(scenario, spec1, spec2)
    if scenario == "d1" and param == "gamma":
        raise ConfigError("scenario d1 has no jumps; sweep gamma in d2 or d3")

    def one(value):
        r = solve_scenario(scenario, with_param(base, param, value, rel_std), seed, settings)
        return {param: float(value), "mean_pi": r.mean_pi, "mean_type_pi": r.mean_type_pi,
                "x1": r.means.x1, "x2": r.means.x2, "y": r.means.y}

    grid = [float(g) for g in grid]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, grid))


def best_response_surface(zeta: TypeVector, u_grid, v_grid, tol: float = DEFAULT_TOL) -> list[dict]:
    """pi*(u, v) on the product grid plus the gamma=0 reference pi (linear in u)."""
    u, v = np.meshgrid(np.asarray(u_grid, float), np.asarray(v_grid, float), indexing="ij")
    z = zeta
    pi = solve_array(z.delta, z.mu, z.sigma, z.sigma0, z.gamma, z.nu, u, v, tol=tol)
    ref = jump_free_root(z.delta, z.mu, z.sigma, z.sigma0, u)
    du, dv = partials_array(pi, z.delta, z.sigma, z.sigma0, z.gamma, z.nu, v)
    return [{"u": float(a), "v": float(b), "pi": float(p), "pi_gamma0": float(r),
             "dpi_du": float(c), "dpi_dv": float(d)}
            for a, b, p, r, c, d in zip(u.ravel(), v.ravel(), pi.ravel(), ref.ravel(), du.ravel(), dv.ravel())]


def convergence_study(spec1: PopulationSpec, spec2: PopulationSpec, n_schedule, seed: int,
                      settings: SolverSettings = SolverSettings(), reference_size: int | None = None,
                      corrections: bool = True) -> list[dict]:
    """Nash means on the first n agents per population versus the MFE.

    The MFE is solved on a frozen sample of ``reference_size`` agents (default
    the largest n); the Nash rosters are prefixes of that same sample.
    """
    ns = [int(n) for n in n_schedule]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ConfigError("n_schedule must be positive and strictly increasing")
    m = max(ns[-1], reference_size or 0)
    sample = sample_roster(spec1, spec2, m, m, seed)
    mfe = solve_mfe(MfeProblem.from_sample(sample, fp_tol=settings.fp_tol, fp_max_iter=settings.fp_max_iter,
                                           damping=settings.damping, tol=settings.tol))
    ref = mfe.means.array()
    rows = []
    for n in ns:
        prob = NashProblem(sample.head(n), fp_tol=settings.fp_tol, fp_max_iter=settings.fp_max_iter,
                           damping=settings.damping, tol=settings.tol, corrections=corrections)
        sol = solve_nash(prob)
        nps = n if corrections else None
        rows.append({
            "n": n, "x1": sol.means.x1, "x2": sol.means.x2, "y": sol.means.y,
            "pi1_mean_type": type_strategy(spec1.mean_type(), 1, sol.means, nps, settings.tol),
            "pi2_mean_type": type_strategy(spec2.mean_type(), 2, sol.means, nps, settings.tol),
            "distance": float(np.linalg.norm(sol.means.array() - ref)),
        })
    rows.append({
        "n": 0, "x1": mfe.means.x1, "x2": mfe.means.x2, "y": mfe.means.y,
        "pi1_mean_type": type_strategy(spec1.mean_type(), 1, mfe.means, None, settings.tol),
        "pi2_mean_type": type_strategy(spec2.mean_type(), 2, mfe.means, None, settings.tol),
        "distance": 0.0,
    })
    return rows


def loglog_slope(ns, distances) -> float:
    """Least-squares slope of log(distance) against log(n)."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(distances, float)), 1)[0])


def competition_uplift(spec: PopulationSpec, seed: int, scenario: str = "d3",
                       settings: SolverSettings = SolverSettings()) -> dict:
    """Mean-type equilibrium strategy with and without relative-performance concerns.

    ``shortfall`` = 1 - pi_without / pi_with is how much lower the no-competition
    strategy is; ``uplift`` = pi_with / pi_without - 1.  A gamma=0 run (competition
    kept, jumps removed) is reported alongside.
    """
    pop = focal_population(scenario)
    base = spec.with_marginal(cross_field(pop), 0.0, 0.0)
    with_comp = solve_scenario(scenario, base, seed, settings)
    no_comp = solve_scenario(scenario, base.with_marginal(own_field(pop), 0.0, 0.0), seed, settings)
    no_jump = solve_scenario(scenario, base.with_marginal("gamma", 0.0, 0.0), seed, settings)
    pw, po = with_comp.mean_type_pi, no_comp.mean_type_pi
    return {"pi_with": pw, "pi_without": po, "pi_gamma0": no_jump.mean_type_pi,
            "shortfall": 1.0 - po / pw, "uplift": pw / po - 1.0,
            "x1": with_comp.means.x1, "x2": with_comp.means.x2, "y": with_comp.means.y}


def write_rows_csv(rows: list[dict], path, columns=None) -> None:
    columns = columns or list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
