"""Best-response first-order condition and its unique root.

For an agent with type ``zeta`` facing a benchmark whose common-noise
loadings are ``u`` (Brownian) and ``v`` (Poisson), the optimal constant
allocation is the root of

    g(pi) = -delta*gamma*nu*(exp(-delta*(c_j*pi*gamma - v)) - 1)
            + delta**2*(c_s*sigma**2 + sigma0**2)*pi - delta**2*sigma0*u - delta*mu

with ``c_s = c_j = 1`` in the mean-field game.  In the finite game the own
contribution to the benchmark enters through ``c = lambda_own/N``:
population 1 uses ``c_s = c_j = 1 - c``, population 2 uses ``c_s = 1 - c``
and ``c_j = 1``.

``g`` is strictly increasing in ``pi`` whenever ``sigma**2 + sigma0**2 > 0``,
so the root is found by Newton steps safeguarded by a sign bracket.  All
array functions broadcast over their arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError
from .model import Population, TypeSample, TypeVector

#: Largest exponent evaluated while bracketing; exp(700) ~ 1e304.
EXP_CAP = 700.0
DEFAULT_TOL = 1e-12
MAX_DOUBLINGS = 200
MAX_NEWTON = 200
POLISH_STEPS = 3


@dataclass(frozen=True)
class BestResponseInput:
    zeta: TypeVector
    u: float = 0.0
    v: float = 0.0
    n_correction: float | None = None
    population_id: Population = Population.POP2

    def __post_init__(self):
        object.__setattr__(self, "population_id", Population(self.population_id))
        c = self.n_correction
        if c is not None and not (0.0 <= c < 1.0):
            raise ConfigError(f"n_correction must lie in [0, 1), got {c}")

    def factors(self) -> tuple[float, float]:
        return form_factors(self.population_id, self.n_correction)

    def arrays(self):
        z = self.zeta
        sf, jf = self.factors()
        return dict(delta=z.delta, mu=z.mu, sigma=z.sigma, sigma0=z.sigma0, gamma=z.gamma,
                    nu=z.nu, u=self.u, v=self.v, sigma_factor=sf, jump_factor=jf)


def form_factors(population_id, n_correction):
    """(sigma^2 factor, exponent factor) for the selected form of g."""
    if n_correction is None:
        return 1.0, 1.0
    one_minus = 1.0 - n_correction
    if Population(population_id) == Population.POP1:
        return one_minus, one_minus
    return one_minus, 1.0


def _exponent(pi, delta, gamma, v, jump_factor):
    return -delta * (jump_factor * pi * gamma - v)


def g_array(pi, delta, mu, sigma, sigma0, gamma, nu, u, v, sigma_factor=1.0, jump_factor=1.0,
            exp_cap=None, extended=False):
    """g at ``pi``; ``extended=True`` evaluates in long double and rounds to float64.

    Near a root the jump and diffusion terms can both be large and cancel, and
    the float64 rounding of the exponent then leaves noise above the root
    tolerance.  Where numpy's long double is no wider than float64 the two
    modes agree.
    """
    if extended:
        pi, delta, mu, sigma, sigma0, gamma, nu, u, v, sigma_factor, jump_factor = (
            np.asarray(a, dtype=np.longdouble)
            for a in (pi, delta, mu, sigma, sigma0, gamma, nu, u, v, sigma_factor, jump_factor))
    e = _exponent(pi, delta, gamma, v, jump_factor)
    if exp_cap is not None:
        e = np.minimum(e, exp_cap)
    gn = gamma * nu
    with np.errstate(over="ignore", invalid="ignore"):
        jump = np.where(gn == 0, 0.0, -delta * gn * np.expm1(e))
    g = (jump + delta**2 * (sigma_factor * sigma**2 + sigma0**2) * pi
         - delta**2 * sigma0 * u - delta * mu)
    if extended:
        with np.errstate(over="ignore"):
            return g.astype(float)
    return g


def dg_dpi_array(pi, delta, sigma, sigma0, gamma, nu, v, sigma_factor=1.0, jump_factor=1.0,
                 exp_cap=None):
    e = _exponent(pi, delta, gamma, v, jump_factor)
    if exp_cap is not None:
        e = np.minimum(e, exp_cap)
    gn = gamma * nu
    with np.errstate(over="ignore", invalid="ignore"):
        jump = np.where(gn == 0, 0.0, jump_factor * gamma * gn * np.exp(e))
    return delta**2 * (jump + sigma_factor * sigma**2 + sigma0**2)


def jump_free_root(delta, mu, sigma, sigma0, u, sigma_factor=1.0):
    """Root of g when gamma*nu = 0; also the Newton seed in general."""
    return (sigma0 * u + mu / delta) / (sigma_factor * sigma**2 + sigma0**2)


def solve_array(delta, mu, sigma, sigma0, gamma, nu, u, v, sigma_factor=1.0, jump_factor=1.0,
                tol=DEFAULT_TOL):
    """Vectorized root of g; returns an array of the broadcast shape.

    Convergence: ``|g| <= tol*(1 + |delta*mu|)`` or the bracket has shrunk to
    adjacent floats.  The result is then re-checked with the extended-precision
    g and, where needed, refined to the float with the smallest residual.  Raises :class:`SolverError` carrying the flat index of
    the first failing element.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be > 0, got {tol}")
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in
                                 (delta, mu, sigma, sigma0, gamma, nu, u, v, sigma_factor, jump_factor)))
    shape = arrs[0].shape
    delta, mu, sigma, sigma0, gamma, nu, u, v, sf, jf = (a.ravel() for a in arrs)
    kw = dict(delta=delta, mu=mu, sigma=sigma, sigma0=sigma0, gamma=gamma, nu=nu, u=u, v=v,
              sigma_factor=sf, jump_factor=jf, exp_cap=EXP_CAP)

    def G(p):
        return g_array(p, **kw)

    def dG(p):
        return dg_dpi_array(p, delta, sigma, sigma0, gamma, nu, v, sf, jf, exp_cap=EXP_CAP)

    tol_g = tol * (1.0 + np.abs(delta * mu))
    x = jump_free_root(delta, mu, sigma, sigma0, u, sf)
    gx = G(x)
    _check_finite(x, gx, "seed")

    lo = np.where(gx <= 0, x, -np.inf)
    hi = np.where(gx >= 0, x, np.inf)
    need_hi = gx < 0
    need_lo = gx > 0
    step = np.maximum(1.0, np.abs(x))
    for _ in range(MAX_DOUBLINGS):
        pending = need_hi | need_lo
        if not pending.any():
            break
        trial = np.where(need_hi, x + step, x - step)
        gt = G(trial)
        up_hi = need_hi & (gt >= 0)
        hi = np.where(up_hi, trial, hi)
        lo = np.where(need_hi & (gt < 0), trial, lo)
        up_lo = need_lo & (gt <= 0)
        lo = np.where(up_lo, trial, lo)
        hi = np.where(need_lo & (gt > 0), trial, hi)
        need_hi &= ~up_hi
        need_lo &= ~up_lo
        step = step * 2.0
    else:
        if (need_hi | need_lo).any():
            i = int(np.flatnonzero(need_hi | need_lo)[0])
            raise SolverError(f"no sign change after {MAX_DOUBLINGS} doublings (element {i})", index=i)

    done = np.abs(gx) <= tol_g
    last_step = hi - lo
    for _ in range(MAX_NEWTON):
        active = ~done
        if not active.any():
            break
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            xn = x - gx / dG(x)
        # bisect when Newton leaves the bracket or fails to halve the previous step
        # (slow progress on the exponential branch)
        newton = np.isfinite(xn) & (xn > lo) & (xn < hi) & (np.abs(xn - x) <= 0.5 * np.abs(last_step))
        xn = np.where(newton, xn, 0.5 * (lo + hi))
        last_step = np.where(active, xn - x, last_step)
        gn = G(xn)
        lo = np.where(active & (gn < 0), xn, lo)
        hi = np.where(active & (gn > 0), xn, hi)
        x = np.where(active, xn, x)
        gx = np.where(active, gn, gx)
        collapsed = np.nextafter(lo, np.inf) >= hi
        done |= (np.abs(gx) <= tol_g) | collapsed
    if not done.all():
        i = int(np.flatnonzero(~done)[0])
        raise SolverError(f"root not reached after {MAX_NEWTON} safeguarded steps (element {i})", index=i)
    x, gx = _polish(x, tol_g, kw)
    _check_finite(x, gx, "root")
    e = _exponent(x, delta, gamma, v, jf)
    binds = (e >= EXP_CAP) & (gamma * nu != 0)
    if np.any(binds):
        i = int(np.flatnonzero(binds)[0])
        raise SolverError(f"exponent clamp binds at the root (element {i}, exponent {e[i]:.4g})", index=i)
    return x.reshape(shape)


def _polish(x, tol_g, kw):
    """Re-check roots with the extended-precision g and refine those still above tolerance.

    A few Newton steps in extended precision, then the best of the float and
    its two neighbours.  Only the flagged elements are touched.
    """
    gx = g_array(x, extended=True, **kw)
    idx = np.flatnonzero(np.abs(gx) > tol_g)
    if idx.size == 0:
        return x, gx
    sub = {k: np.asarray(a)[idx] for k, a in kw.items() if k != "exp_cap"}
    sub["exp_cap"] = EXP_CAP
    d = {k: sub[k] for k in ("delta", "sigma", "sigma0", "gamma", "nu", "v")}
    xs, gs = x[idx], gx[idx]
    for _ in range(POLISH_STEPS):
        step = gs / dg_dpi_array(xs, sigma_factor=sub["sigma_factor"], jump_factor=sub["jump_factor"],
                                 exp_cap=EXP_CAP, **d)
        trial = xs - step
        gt = g_array(trial, extended=True, **sub)
        better = np.isfinite(gt) & (np.abs(gt) < np.abs(gs))
        xs, gs = np.where(better, trial, xs), np.where(better, gt, gs)
    for direction in (-np.inf, np.inf):
        trial = np.nextafter(xs, direction)
        gt = g_array(trial, extended=True, **sub)
        better = np.abs(gt) < np.abs(gs)
        xs, gs = np.where(better, trial, xs), np.where(better, gt, gs)
    x, gx = x.copy(), gx.copy()
    x[idx], gx[idx] = xs, gs
    return x, gx


def _check_finite(x, gx, stage):
    bad = ~(np.isfinite(x) & np.isfinite(gx))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise SolverError(f"non-finite value at {stage} (element {i}: pi={x[i]!r}, g={gx[i]!r})", index=i)


def partials_array(pi, delta, sigma, sigma0, gamma, nu, v, sigma_factor=1.0, jump_factor=1.0):
    """(d pi*/du, d pi*/dv) by the implicit function theorem."""
    gn = gamma * nu
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.where(gn == 0, 0.0, gn * np.exp(_exponent(pi, delta, gamma, v, jump_factor)))
    den = sigma_factor * sigma**2 + sigma0**2 + jump_factor * gamma * w
    return sigma0 / den, w / den


# scalar API --------------------------------------------------------------

def g_value(pi: float, inp: BestResponseInput) -> float:
    """g at ``pi``, evaluated in extended precision."""
    return float(g_array(pi, extended=True, **inp.arrays()))


def solve_best_response(inp: BestResponseInput, tol: float = DEFAULT_TOL) -> float:
    try:
        return float(solve_array(tol=tol, **inp.arrays()))
    except SolverError as exc:
        raise SolverError(f"{exc} for {inp}", agent=inp.zeta) from exc


def best_response_partials(pi_star: float, inp: BestResponseInput) -> tuple[float, float]:
    a = inp.arrays()
    du, dv = partials_array(pi_star, a["delta"], a["sigma"], a["sigma0"], a["gamma"], a["nu"], a["v"],
                            a["sigma_factor"], a["jump_factor"])
    return float(du), float(dv)


def hjb_constant(pi: float, inp: BestResponseInput, eta: float = 0.0) -> float:
    """Bracketed term of the value-factor ODE evaluated at ``pi`` (mean-field form)."""
    z = inp.zeta
    jump = (pi * z.gamma - inp.v)
    return (-z.delta * (pi * z.mu - eta - jump * z.nu)
            + 0.5 * z.delta**2 * (pi**2 * z.sigma**2 + (pi * z.sigma0 - inp.u)**2)
            + (math.expm1(-z.delta * jump) * z.nu if z.nu else 0.0))


def value_factor(inp: BestResponseInput, eta: float, t: float, T: float) -> float:
    """f(t) with f' + c f = 0, f(T) = 1, so V(x,t) = -exp(-delta x) f(t)/delta.

    Coefficients are constant in time, hence ``f(t) = exp(c (T - t))``.
    Only the mean-field form is supported.
    """
    if inp.n_correction is not None:
        raise ConfigError("value_factor is defined for the mean-field form only")
    if not 0.0 <= t <= T:
        raise ConfigError(f"need 0 <= t <= T, got t={t}, T={T}")
    c = hjb_constant(solve_best_response(inp), inp, eta)
    return math.exp(c * (T - t))


# population helpers -------------------------------------------------------

def population_factors(sample: TypeSample, n_players: int | None):
    """Per-agent form factors; ``n_players=None`` selects the mean-field form."""
    if n_players is None:
        return 1.0, 1.0
    c = sample.own_lambda / n_players
    if np.any(c >= 1.0) or np.any(c < 0):
        raise ConfigError("own competition weight must satisfy 0 <= lambda < N")
    one_minus = 1.0 - c
    if sample.population_id == Population.POP1:
        return one_minus, one_minus
    return one_minus, 1.0


def solve_population(sample: TypeSample, u, v, n_players: int | None = None, tol: float = DEFAULT_TOL):
    """Best responses of every agent in ``sample`` to per-agent loadings (u, v)."""
    sf, jf = population_factors(sample, n_players)
    try:
        return solve_array(sample.delta, sample.mu, sample.sigma, sample.sigma0, sample.gamma, sample.nu,
                           u, v, sf, jf, tol=tol)
    except SolverError as exc:
        agent = sample[exc.index] if exc.index is not None and exc.index < len(sample) else None
        raise SolverError(f"{exc}; population {int(sample.population_id)} agent {exc.index}: {agent}",
                          index=exc.index, agent=agent) from exc
