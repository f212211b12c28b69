"""Mean-field equilibrium: the three-equation fixed point in (x1, x2, y).

Expectations over each population's type distribution are replaced by
averages over a frozen sample drawn once from ``expectation_seed``; the map
is then deterministic and the iteration converges cleanly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import fixedpoint
from .best_response import DEFAULT_TOL, solve_population
from .errors import ConfigError
from .fixedpoint import EquilibriumMeans, FixedPointResult
from .model import AgentRoster, PopulationSpec, TypeSample, sample_roster, substream


@dataclass(frozen=True)
class MfeProblem:
    spec1: PopulationSpec | None
    spec2: PopulationSpec | None
    expectation_sample_size: int = 2000
    expectation_seed: int = 0
    fp_tol: float = 1e-10
    fp_max_iter: int = 10_000
    damping: float = 1.0
    tol: float = DEFAULT_TOL
    sample: AgentRoster | None = None  # explicit frozen sample; overrides the specs

    def __post_init__(self):
        fixedpoint.check_settings(self.fp_tol, self.fp_max_iter, self.damping)
        if self.sample is None:
            if self.spec1 is None or self.spec2 is None:
                raise ConfigError("MfeProblem needs both population specs or an explicit sample")
            if self.expectation_sample_size < 1:
                raise ConfigError("expectation_sample_size must be >= 1")

    @classmethod
    def from_sample(cls, sample: AgentRoster, **kw) -> "MfeProblem":
        return cls(None, None, sample=sample, **kw)

    @cached_property
    def frozen(self) -> AgentRoster:
        if self.sample is not None:
            return self.sample
        m = self.expectation_sample_size
        return sample_roster(self.spec1, self.spec2, m, m, self.expectation_seed)


def loadings(pop1: TypeSample, pop2: TypeSample, z):
    """Per-agent (u, v) for both populations; ``z`` may carry leading batch axes."""
    z = np.asarray(z, dtype=float)
    x1, x2, y = (z[..., i, None] for i in range(3))
    u1 = pop1.lambda1 * x1 + pop1.lambda2 * x2
    u2 = pop2.lambda1 * x1 + pop2.lambda2 * x2
    v2 = pop2.lambda2 * y
    return u1, u2, v2


def best_responses(roster: AgentRoster, z, n_players=None, tol=DEFAULT_TOL):
    """Strategies of every agent against the benchmark implied by ``z``.

    ``n_players`` is ``None`` (mean-field form) or ``(N1, N2)``.
    Population 1 always uses ``v = 0``.
    """
    n1, n2 = (None, None) if n_players is None else n_players
    u1, u2, v2 = loadings(roster.pop1, roster.pop2, z)
    pi1 = solve_population(roster.pop1, u1, 0.0, n1, tol)
    pi2 = solve_population(roster.pop2, u2, v2, n2, tol)
    return pi1, pi2


def aggregate(roster: AgentRoster, pi1, pi2) -> np.ndarray:
    """(mean pi1*sigma0, mean pi2*sigma0, mean pi2*gamma) over the last axis."""
    return np.stack([np.mean(pi1 * roster.pop1.sigma0, axis=-1),
                     np.mean(pi2 * roster.pop2.sigma0, axis=-1),
                     np.mean(pi2 * roster.pop2.gamma, axis=-1)], axis=-1)


def mfe_map(z, problem: MfeProblem) -> EquilibriumMeans:
    roster = problem.frozen
    return EquilibriumMeans.of(aggregate(roster, *best_responses(roster, z, None, problem.tol)))


def mfe_map_batch(zs, problem: MfeProblem) -> np.ndarray:
    """``mfe_map`` over an (n, 3) array of points."""
    roster = problem.frozen
    return aggregate(roster, *best_responses(roster, np.atleast_2d(zs), None, problem.tol))


def solve_mfe(problem: MfeProblem, z0=(0.0, 0.0, 0.0)) -> FixedPointResult:
    return fixedpoint.iterate(lambda z: mfe_map(z, problem), z0, problem.fp_tol,
                              problem.fp_max_iter, problem.damping)


def equilibrium_strategies(problem: MfeProblem, means: EquilibriumMeans):
    return best_responses(problem.frozen, means.array(), None, problem.tol)


class ContractionCheck(NamedTuple):
    epsilon: float
    lambda_sup: float
    within: bool


def epsilon_terms(sigma0, gamma) -> np.ndarray:
    """min(sqrt(1+(s/g)^2), sqrt(1+(g/s)^2)) = sqrt(1 + (min/max)^2), guarded at zeros."""
    a, b = np.abs(np.asarray(sigma0, float)), np.abs(np.asarray(gamma, float))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    ratio = np.divide(lo, hi, out=np.zeros_like(hi), where=hi > 0)
    return np.sqrt(1.0 + ratio**2)


def contraction_epsilon(problem: MfeProblem) -> ContractionCheck:
    """Threshold on ||lambda||_inf under which the map is a contraction."""
    roster = problem.frozen
    eps = 1.0 / (6.0 * float(epsilon_terms(roster.pop2.sigma0, roster.pop2.gamma).max()))
    lam = roster.lambda_sup()
    return ContractionCheck(eps, lam, lam < eps)


def empirical_lipschitz(problem: MfeProblem, n_pairs: int, box_radius: float, seed: int = 0,
                        map_batch=None) -> float:
    """max ||R(z) - R(z')|| / ||z - z'|| over random pairs in [-r, r]^3."""
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    map_batch = map_batch or (lambda zs: mfe_map_batch(zs, problem))
    rng = substream(seed, "lipschitz")
    a = rng.uniform(-box_radius, box_radius, size=(n_pairs, 3))
    b = rng.uniform(-box_radius, box_radius, size=(n_pairs, 3))
    ratios = []
    for start in range(0, n_pairs, 256):
        sl = slice(start, start + 256)
        ra, rb = map_batch(a[sl]), map_batch(b[sl])
        ratios.append(np.linalg.norm(ra - rb, axis=1) / np.linalg.norm(a[sl] - b[sl], axis=1))
    return float(np.concatenate(ratios).max())


# jump-free population 1: closed forms ---------------------------------------

def _require_jump_free(pop1: TypeSample):
    if np.any(pop1.gamma * pop1.nu != 0):
        raise ConfigError("closed form needs a jump-free population 1 (gamma = 0)")


def _variance_share(pop1: TypeSample, n_players):
    c = 0.0 if n_players is None else pop1.lambda1 / n_players
    return (1.0 - c) * pop1.sigma**2 + pop1.sigma0**2


def closed_form_AB(pop1: TypeSample, n_players: int | None = None) -> tuple[float, float]:
    """Slope/intercept of the linear relation x1 = A x2 + B (jump-free population 1).

    With ``n_players`` the finite-game constants are returned.
    """
    _require_jump_free(pop1)
    den = _variance_share(pop1, n_players)
    denom = 1.0 - np.mean(pop1.sigma0**2 * pop1.lambda1 / den)
    A = np.mean(pop1.sigma0**2 * pop1.lambda2 / den) / denom
    B = np.mean(pop1.mu * pop1.sigma0 / (pop1.delta * den)) / denom
    return float(A), float(B)


def closed_form_mfe_pop1(pop1: TypeSample, n_players: int | None = None) -> np.ndarray:
    """Per-agent equilibrium strategy of a jump-free population 1 with lambda12 = 0."""
    _require_jump_free(pop1)
    if np.any(pop1.lambda2 != 0):
        raise ConfigError("closed form needs lambda12 = 0")
    _, B = closed_form_AB(pop1, n_players)
    den = _variance_share(pop1, n_players)
    return pop1.sigma0 * pop1.lambda1 * B / den + pop1.mu / (pop1.delta * den)


def merton_ratio(mu, delta, sigma, sigma0):
    return mu / (delta * (sigma**2 + sigma0**2))
