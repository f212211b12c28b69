"""Nash equilibrium of the finite game with N1 + N2 players.

The equilibrium is found through the same three roster averages as the
mean-field problem; each agent's best response uses the finite-game form of
g (own weight over N).  Per-agent strategies follow from one last
best-response pass at the converged means.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import fixedpoint
from .best_response import DEFAULT_TOL
from .errors import ConfigError
from .fixedpoint import EquilibriumMeans, fmt
from .mfe import aggregate, best_responses
from .model import TYPE_FIELDS, AgentRoster, Population


@dataclass(frozen=True)
class NashProblem:
    roster: AgentRoster
    nu1: float | None = None  # overrides population 1's idiosyncratic intensity
    nu: float | None = None  # overrides population 2's common intensity
    fp_tol: float = 1e-10
    fp_max_iter: int = 10_000
    damping: float = 1.0
    tol: float = DEFAULT_TOL
    corrections: bool = True  # False drops the own-weight/N terms (mean-field form on the roster)

    def __post_init__(self):
        fixedpoint.check_settings(self.fp_tol, self.fp_max_iter, self.damping)
        r = self.roster
        if self.nu1 is not None or self.nu is not None:
            pop1 = r.pop1 if self.nu1 is None else r.pop1.replace(nu=self.nu1)
            pop2 = r.pop2 if self.nu is None else r.pop2.replace(nu=self.nu)
            object.__setattr__(self, "roster", AgentRoster(pop1, pop2, r.seed))

    @property
    def n_players(self):
        return (self.roster.n1, self.roster.n2) if self.corrections else None


@dataclass
class NashSolution:
    means: EquilibriumMeans
    strategies_pop1: np.ndarray
    strategies_pop2: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    trace: list = field(default_factory=list)

    def strategy(self, pop, index) -> float:
        s = self.strategies_pop1 if Population(pop) == Population.POP1 else self.strategies_pop2
        return float(s[index])


def nash_map(z, problem: NashProblem) -> EquilibriumMeans:
    r = problem.roster
    return EquilibriumMeans.of(aggregate(r, *best_responses(r, z, problem.n_players, problem.tol)))


def nash_map_batch(zs, problem: NashProblem) -> np.ndarray:
    r = problem.roster
    return aggregate(r, *best_responses(r, np.atleast_2d(zs), problem.n_players, problem.tol))


def solve_nash(problem: NashProblem, z0=(0.0, 0.0, 0.0)) -> NashSolution:
    res = fixedpoint.iterate(lambda z: nash_map(z, problem), z0, problem.fp_tol,
                             problem.fp_max_iter, problem.damping)
    pi1, pi2 = best_responses(problem.roster, res.means.array(), problem.n_players, problem.tol)
    return NashSolution(res.means, pi1, pi2, res.iterations, res.residual, res.trace)


def write_solution_csv(solution: NashSolution, roster: AgentRoster, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["population", "index", *TYPE_FIELDS, "nu", "strategy"])
        for pop, sample, strat in ((1, roster.pop1, solution.strategies_pop1),
                                   (2, roster.pop2, solution.strategies_pop2)):
            for i in range(len(sample)):
                row = [fmt(getattr(sample, f)[i]) for f in (*TYPE_FIELDS, "nu")]
                w.writerow([pop, i, *row, fmt(strat[i])])


@dataclass
class DeviationRow:
    h: float
    strategy: float
    utility: float
    utility_ci: float
    diff: float  # equilibrium utility minus deviating utility
    diff_ci: float

    @property
    def ok(self) -> bool:
        """Equilibrium not beaten beyond twice the paired CI half-width."""
        return self.diff >= -2.0 * self.diff_ci


@dataclass
class DeviationReport:
    population: int
    index: int
    strategy: float
    utility: float
    utility_ci: float
    rows: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def verify_nash_by_deviation(solution: NashSolution, problem: NashProblem, agent, sim_config,
                             h_values=(0.1, 0.5, 1.0)) -> DeviationReport:
    """Monte Carlo check that one agent cannot gain by moving to pi +- h.

    All candidate strategies are evaluated on the same simulated noise; only
    the deviating agent's allocation changes (which also moves its own
    benchmark through the population average).
    """
    from .sim import paired_utilities, simulate_wealth

    pop, idx = Population(agent[0]), int(agent[1])
    roster = problem.roster
    n = roster.n1 if pop == Population.POP1 else roster.n2
    if not 0 <= idx < n:
        raise ConfigError(f"agent index {idx} out of range for population {int(pop)}")
    bundle = simulate_wealth(roster, (solution.strategies_pop1, solution.strategies_pop2), None, None, sim_config)
    base = solution.strategy(pop, idx)
    candidates = [base]
    for h in h_values:
        candidates += [base - h, base + h]
    est = paired_utilities(bundle, roster, pop, idx, candidates)
    rows = []
    hs = [h for h in h_values for _ in (0, 1)]
    for j, h in enumerate(hs, start=1):
        sign = -1.0 if j % 2 else 1.0
        rows.append(DeviationRow(sign * h, candidates[j], est.means[j], est.cis[j],
                                 est.diffs[j], est.diff_cis[j]))
    return DeviationReport(int(pop), idx, base, est.means[0], est.cis[0], rows)
