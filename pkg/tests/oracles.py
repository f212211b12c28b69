"""Independent reference computations used as test oracles.

Nothing here imports the package's solvers: the first-order conditions are
rebuilt from the exponential-utility log-MGF of the agent's exposure, roots
come from plain bisection or scipy, and Jacobians from finite differences.
"""
import math

import numpy as np
from scipy import optimize, stats


def log_mgf_rate(pi, delta, mu, sigma, sigma0, gamma, nu, u, v, own=0.0, eta=0.0):
    """Exponent rate c(pi) of E[exp(-delta (X_T - H_T))] = exp(T c) exp(-delta(x - h)).

    ``own`` is lambda_own / N, the agent's own share of the benchmark, which
    removes that fraction of each of the agent's exposures.  ``u`` and ``v``
    are the benchmark's remaining (other agents') common-noise loadings.
    """
    a = 1.0 - own
    jump = a * pi * gamma - v
    return (-delta * (a * pi * mu - eta)
            + 0.5 * delta**2 * ((a * pi * sigma) ** 2 + (a * pi * sigma0 - u) ** 2)
            + (nu * (math.exp(-delta * jump) - 1.0 + delta * jump) if nu else 0.0))


def g_reference(pi, delta, mu, sigma, sigma0, gamma, nu, u, v):
    """Mean-field first-order condition written out term by term."""
    jump = 0.0 if gamma * nu == 0 else -delta * gamma * nu * (math.exp(-delta * (pi * gamma - v)) - 1.0)
    return (jump + delta**2 * (sigma**2 + sigma0**2) * pi - delta**2 * sigma0 * u - delta * mu)


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def argmin_rate(delta, mu, sigma, sigma0, gamma, nu, u, v, own=0.0):
    """Optimal constant allocation: minimizer of the strictly convex log-MGF rate.

    The analytic derivative of ``log_mgf_rate`` is bracketed around the
    jump-free optimum and solved with Brent's method.
    """
    a = ja = 1.0 - own

    def d_rate(p):
        jump = ja * p * gamma - v
        smooth = -delta * a * mu + delta**2 * (a * a * p * sigma**2 + a * sigma0 * (a * p * sigma0 - u))
        if not gamma * nu:
            return smooth
        if -delta * jump > 700:  # exponential term dominates; its sign is that of -gamma
            return -math.copysign(math.inf, gamma)
        return smooth + nu * delta * ja * gamma * (1.0 - math.exp(-delta * jump))

    p0 = (a * sigma0 * u + a * mu / delta) / (a * a * (sigma**2 + sigma0**2))
    step = max(1.0, abs(p0))
    lo, hi = p0 - step, p0 + step
    while d_rate(lo) > 0:
        lo -= step
        step *= 2
    step = max(1.0, abs(p0))
    while d_rate(hi) < 0:
        hi += step
        step *= 2
    return optimize.brentq(d_rate, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def finite_game_strategies(types1, types2, z):
    """Per-agent finite-game best responses to symmetric means z = (x1, x2, y).

    Each agent's benchmark is rewritten with the means of the *other* agents
    plus its own share; the optimum is then the minimizer of its log-MGF rate.
    ``types*`` are lists of dicts with keys delta, mu, sigma, sigma0, gamma,
    nu, lambda1, lambda2.
    """
    x1, x2, y = z
    n1, n2 = len(types1), len(types2)
    out1, out2 = [], []
    for t in types1:
        own = t["lambda1"] / n1

        # others' loading is the symmetric mean minus the agent's own share, which
        # depends on the agent's strategy p: solve p = best reply to the others
        def resid(p, t=t, own=own):
            u_hat = t["lambda1"] * (x1 - p * t["sigma0"] / n1) + t["lambda2"] * x2
            return argmin_rate(t["delta"], t["mu"], t["sigma"], t["sigma0"], t["gamma"], t["nu"],
                               u_hat, 0.0, own=own) - p

        out1.append(_solve_scalar(resid))
    for t in types2:
        own = t["lambda2"] / n2

        def resid(p, t=t, own=own):
            u_hat = t["lambda1"] * x1 + t["lambda2"] * (x2 - p * t["sigma0"] / n2)
            v_hat = t["lambda2"] * (y - p * t["gamma"] / n2)
            return argmin_rate(t["delta"], t["mu"], t["sigma"], t["sigma0"], t["gamma"], t["nu"],
                               u_hat, v_hat, own=own) - p

        out2.append(_solve_scalar(resid))
    return np.array(out1), np.array(out2)


def _solve_scalar(resid):
    lo, hi = -1.0, 1.0
    while resid(lo) < 0:
        lo *= 2
    while resid(hi) > 0:
        hi *= 2
    return optimize.brentq(resid, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def dense_newton_nash(types1, types2, z0=(0.0, 0.0, 0.0), tol=1e-13, max_iter=60, h=1e-6):
    """Solve F(z) = R_N(z) - z = 0 by Newton with a central-difference Jacobian."""
    s1 = np.array([t["sigma0"] for t in types1])
    s2 = np.array([t["sigma0"] for t in types2])
    g2 = np.array([t["gamma"] for t in types2])

    def F(z):
        p1, p2 = finite_game_strategies(types1, types2, z)
        return np.array([np.mean(p1 * s1), np.mean(p2 * s2), np.mean(p2 * g2)]) - z

    z = np.asarray(z0, dtype=float)
    for _ in range(max_iter):
        f = F(z)
        if np.linalg.norm(f) < tol:
            break
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            J[:, k] = (F(z + e) - F(z - e)) / (2 * h)
        z = z - np.linalg.solve(J, f)
    return z


def rk4_backward(rate, T, t, h=1e-3):
    """Integrate f' = -rate * f backwards from f(T) = 1 to time t with classic RK4."""
    n = max(1, int(round((T - t) / h)))
    step = (T - t) / n
    f = 1.0

    def rhs(x):
        return rate * x  # d f / d(T - s)

    for _ in range(n):
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * step * k1)
        k3 = rhs(f + 0.5 * step * k2)
        k4 = rhs(f + step * k3)
        f += step * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return f


def truncated_normal_var(std, k):
    return float(stats.truncnorm(-k, k, loc=0.0, scale=std).var())


def poisson_chisquare_pvalue(counts, lam):
    """Goodness of fit of integer counts to Poisson(lam), tail cells pooled to expected >= 5."""
    counts = np.asarray(counts, dtype=int)
    n = counts.size
    kmax = int(counts.max())
    ks = np.arange(kmax + 1)
    probs = stats.poisson.pmf(ks, lam)
    probs[-1] = stats.poisson.sf(kmax - 1, lam)
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = probs * n
    # pool small cells from both ends
    cells_o, cells_e, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        cells_o[-1] += acc_o
        cells_e[-1] += acc_e
    stat, p = stats.chisquare(cells_o, cells_e)
    return float(p)
