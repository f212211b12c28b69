"""Monte Carlo wealth and relative-performance utility under constant strategies.

With a constant allocation ``pi`` the terminal wealth is

    X_T = xi + pi * (mu*T + sigma*W_T + sigma0*W0_T + gamma*(J_T - nu*T)),

so drawing ``W_T``, ``W0_T`` (Gaussian) and ``J_T`` (Poisson) is exact in law.
The bracketed factor is stored per agent and path as the *unit gain*, which
makes re-pricing any other constant strategy on the same noise free.

Noise sources (seeded substreams of ``SimConfig.seed``):
``W0`` and ``N`` are common to all agents of a path (``N`` drives population
2's jumps); ``W1``/``W2`` and population 1's jump counts are per agent.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SimulationError
from .fixedpoint import fmt
from .model import AgentRoster, Population, TypeSample, substream

Z95 = 1.959963984540054
LOG_MAX = 709.0


@dataclass(frozen=True)
class SimConfig:
    horizon_T: float = 1.0
    n_steps: int = 50
    n_paths: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise ConfigError("horizon_T must be > 0")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ConfigError("n_steps and n_paths must be >= 1")


@dataclass
class PathBundle:
    config: SimConfig
    common_brownian: np.ndarray  # W0_T, (paths,)
    common_jumps: np.ndarray  # N_T counts, (paths,)
    idio_brownian1: np.ndarray  # (paths, N1)
    idio_brownian2: np.ndarray  # (paths, N2)
    idio_jumps1: np.ndarray  # population 1 jump counts, (paths, N1)
    unit_gain1: np.ndarray
    unit_gain2: np.ndarray
    strategies1: np.ndarray
    strategies2: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    @property
    def terminal_wealth1(self) -> np.ndarray:
        return self.xi1 + self.strategies1 * self.unit_gain1

    @property
    def terminal_wealth2(self) -> np.ndarray:
        return self.xi2 + self.strategies2 * self.unit_gain2

    def terminal_wealth(self, pop) -> np.ndarray:
        return self.terminal_wealth1 if Population(pop) == Population.POP1 else self.terminal_wealth2


def _unit_gain(sample: TypeSample, T, w_idio, w0, jumps):
    return (sample.mu * T + sample.sigma * w_idio + sample.sigma0 * w0[:, None]
            + sample.gamma * (jumps - sample.nu * T))


def simulate_wealth(roster: AgentRoster, strategies, nu1: float | None, nu: float | None,
                    config: SimConfig) -> PathBundle:
    """Terminal wealth of every roster agent on ``config.n_paths`` paths."""
    s1, s2 = (np.asarray(s, dtype=float) for s in strategies)
    if s1.shape != (roster.n1,) or s2.shape != (roster.n2,):
        raise ConfigError("one strategy per roster agent is required")
    if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(s2))):
        raise ConfigError("strategies must be finite")
    pop1 = roster.pop1 if nu1 is None else roster.pop1.replace(nu=nu1)
    pop2 = roster.pop2 if nu is None else roster.pop2.replace(nu=nu)
    P, T, seed = config.n_paths, config.horizon_T, config.seed
    sd = math.sqrt(T)
    w0 = substream(seed, "sim/W0").normal(0.0, sd, P)
    # one Poisson clock per path; every population-2 agent loads on it
    nu_common = float(pop2.nu[0])
    if np.any(pop2.nu != nu_common):
        raise ConfigError("population 2 agents must share the common jump intensity")
    n_common = substream(seed, "sim/N").poisson(nu_common * T, P).astype(float)
    w1 = substream(seed, "sim/W1").normal(0.0, sd, (P, roster.n1))
    w2 = substream(seed, "sim/W2").normal(0.0, sd, (P, roster.n2))
    j1 = substream(seed, "sim/N1").poisson(np.broadcast_to(pop1.nu * T, (P, roster.n1))).astype(float)
    g1 = _unit_gain(pop1, T, w1, w0, j1)
    g2 = _unit_gain(pop2, T, w2, w0, n_common[:, None])
    return PathBundle(config, w0, n_common, w1, w2, j1, g1, g2, s1, s2, pop1.xi, pop2.xi)


class UtilityEstimate(NamedTuple):
    mean: float
    ci_halfwidth: float
    max_exponent: float


class PairedUtilities(NamedTuple):
    means: np.ndarray
    cis: np.ndarray
    diffs: np.ndarray  # candidate 0 minus candidate j, per candidate
    diff_cis: np.ndarray
    max_exponent: float


def _benchmark(bundle: PathBundle, w1, w2):
    return (w1 * bundle.terminal_wealth1.mean(axis=1) + w2 * bundle.terminal_wealth2.mean(axis=1))


def _agent(roster, pop, idx):
    sample = roster.population(pop)
    return sample, sample[int(idx)]


def _mean_ci(x):
    n = x.shape[-1]
    sd = x.std(axis=-1, ddof=1) if n > 1 else np.zeros(x.shape[:-1])
    return x.mean(axis=-1), Z95 * sd / math.sqrt(n)


def estimate_relative_utility(bundle: PathBundle, roster: AgentRoster, agent, weights=None) -> UtilityEstimate:
    """Mean of -exp(-delta (X_T - H))/delta over paths with a 95% CI half-width.

    ``H = lambda1*avg(X^1_T) + lambda2*avg(X^2_T)`` within each path; the
    weights default to the agent's own type.
    """
    pop, idx = Population(agent[0]), int(agent[1])
    _, zeta = _agent(roster, pop, idx)
    w1, w2 = (zeta.lambda1, zeta.lambda2) if weights is None else weights
    x = bundle.terminal_wealth(pop)[:, idx]
    e = -zeta.delta * (x - _benchmark(bundle, w1, w2))
    emax = float(e.max())
    if emax > LOG_MAX:
        raise SimulationError(f"utility exponent {emax:.4g} overflows; reduce delta * wealth scale", emax)
    scaled = np.exp(e - emax)
    m, ci = _mean_ci(scaled)
    k = math.exp(emax) / zeta.delta
    return UtilityEstimate(-k * float(m), k * float(ci), emax)


def paired_utilities(bundle: PathBundle, roster: AgentRoster, pop, idx, candidates) -> PairedUtilities:
    """Utilities of one agent for several constant strategies on shared noise.

    Everyone else keeps their bundle strategy; the agent's change moves its
    own population average by ``(pi - pi_bundle) * gain / N``.
    """
    pop, idx = Population(pop), int(idx)
    _, zeta = _agent(roster, pop, idx)
    gain = (bundle.unit_gain1 if pop == Population.POP1 else bundle.unit_gain2)[:, idx]
    n_own = roster.n1 if pop == Population.POP1 else roster.n2
    w_own = zeta.lambda1 if pop == Population.POP1 else zeta.lambda2
    base_pi = (bundle.strategies1 if pop == Population.POP1 else bundle.strategies2)[idx]
    x_base = bundle.terminal_wealth(pop)[:, idx]
    h_base = _benchmark(bundle, zeta.lambda1, zeta.lambda2)
    c = np.asarray(candidates, dtype=float)[:, None] - base_pi
    x = x_base + c * gain
    h = h_base + w_own * c * gain / n_own
    e = -zeta.delta * (x - h)
    emax = float(e.max())
    if emax > LOG_MAX:
        raise SimulationError(f"utility exponent {emax:.4g} overflows; reduce delta * wealth scale", emax)
    k = math.exp(emax) / zeta.delta
    u = -np.exp(e - emax)  # utility / k
    means, cis = _mean_ci(u)
    d_means, d_cis = _mean_ci(u[:1] - u)
    return PairedUtilities(k * means, k * cis, k * d_means, k * d_cis, emax)


def wealth_paths(bundle: PathBundle, roster: AgentRoster, pop, idx, n_paths: int | None = None):
    """Intermediate wealth on the ``n_steps`` grid, consistent with ``X_T``.

    Brownian motions are filled in by Brownian bridges pinned at the stored
    terminal values; jump times are uniform order statistics given the
    stored counts.  Returns ``(times, paths)`` with paths of shape
    ``(n_paths, n_steps + 1)``.
    """
    cfg = bundle.config
    pop, idx = Population(pop), int(idx)
    P = cfg.n_paths if n_paths is None else min(int(n_paths), cfg.n_paths)
    T, K = cfg.horizon_T, cfg.n_steps
    t = np.linspace(0.0, T, K + 1)
    sample, zeta = _agent(roster, pop, idx)
    w0 = _bridge(substream(cfg.seed, "bridge/W0"), bundle.common_brownian[:P], t)
    if pop == Population.POP1:
        w = _bridge(substream(cfg.seed, f"bridge/W1/{idx}"), bundle.idio_brownian1[:P, idx], t)
        j = _jump_path(substream(cfg.seed, f"bridge/N1/{idx}"), bundle.idio_jumps1[:P, idx], t)
        pi = bundle.strategies1[idx]
    else:
        w = _bridge(substream(cfg.seed, f"bridge/W2/{idx}"), bundle.idio_brownian2[:P, idx], t)
        j = _jump_path(substream(cfg.seed, "bridge/N"), bundle.common_jumps[:P], t)
        pi = bundle.strategies2[idx]
    gain = zeta.mu * t + zeta.sigma * w + zeta.sigma0 * w0 + zeta.gamma * (j - zeta.nu * t)
    return t, zeta.xi + pi * gain


def _bridge(rng, terminal, t):
    dt = np.diff(t)
    free = np.concatenate([np.zeros((len(terminal), 1)),
                           np.cumsum(rng.normal(size=(len(terminal), len(dt))) * np.sqrt(dt), axis=1)], axis=1)
    return free - (t / t[-1]) * (free[:, -1:] - terminal[:, None])


def _jump_path(rng, counts, t):
    counts = counts.astype(int)
    width = max(int(counts.max()), 1)
    times = rng.uniform(0.0, t[-1], size=(len(counts), width))
    live = np.arange(width)[None, :] < counts[:, None]
    # jumps at or before t_k; the last grid point gets the full count
    path = ((times[:, :, None] <= t[None, None, :]) & live[:, :, None]).sum(axis=1).astype(float)
    path[:, -1] = counts
    return path


def write_terminal_csv(bundle: PathBundle, path) -> None:
    """One row per (path, agent): path, population, agent, X_T."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "population", "agent", "X_T"])
        for pop, x in ((1, bundle.terminal_wealth1), (2, bundle.terminal_wealth2)):
            for p in range(x.shape[0]):
                for i in range(x.shape[1]):
                    w.writerow([p, pop, i, fmt(x[p, i])])


def terminal_moments(sample: TypeSample, strategies, T):
    """Exact mean and variance of X_T per agent under constant strategies."""
    pi = np.asarray(strategies, dtype=float)
    mean = sample.xi + pi * sample.mu * T
    var = pi**2 * (sample.sigma**2 + sample.sigma0**2 + sample.gamma**2 * sample.nu) * T
    return mean, var
