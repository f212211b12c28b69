"""Type vectors, population distributions and reproducible sampling.

Every field of a type vector is drawn independently from a Gaussian
truncated to ``[mean - k*std, mean + k*std]``.  Draws are made on the
standardized scale (``z`` in ``[-k, k]`` by rejection) and then mapped to
``mean + std*z``, so two specs that differ only in mean/std reuse the same
underlying ``z`` for a given seed.  The sensitivity sweeps rely on this for
common random numbers.

Random streams are numpy ``Generator(Philox)`` instances keyed by
``(seed, label)``; see :func:`substream`.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, fields, replace
from enum import IntEnum
from typing import Iterator, Mapping

import numpy as np

from .errors import ConfigError

#: Sampled fields, in draw order.  Changing the order changes every roster.
TYPE_FIELDS = ("xi", "delta", "lambda1", "lambda2", "mu", "sigma", "sigma0", "gamma")


class Population(IntEnum):
    POP1 = 1
    POP2 = 2


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent Philox stream for ``(seed, label)``.

    The label is hashed with CRC-32 into the ``SeedSequence`` spawn key, so
    the stream is stable across platforms and Python versions.
    """
    seq = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(zlib.crc32(label.encode()),))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class TypeVector:
    """One agent's parameters.

    ``lambda1``/``lambda2`` weight the population-1/population-2 mean wealth
    in the agent's benchmark.  ``nu`` is the intensity of the Poisson measure
    ``gamma`` loads on: idiosyncratic for population 1, common for population 2.
    """

    xi: float
    delta: float
    lambda1: float
    lambda2: float
    mu: float
    sigma: float
    sigma0: float
    gamma: float
    nu: float

    def __post_init__(self):
        vals = [getattr(self, f.name) for f in fields(self)]
        if not all(math.isfinite(x) for x in vals):
            raise ConfigError(f"non-finite type vector field: {self}")
        if self.delta <= 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if self.nu < 0:
            raise ConfigError(f"nu must be >= 0, got {self.nu}")
        if self.sigma < 0 or self.sigma0 < 0:
            raise ConfigError("volatilities must be >= 0")
        if self.sigma**2 + self.sigma0**2 <= 0:
            raise ConfigError("sigma^2 + sigma0^2 must be > 0")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("competition weights must be >= 0")


@dataclass(frozen=True)
class Marginal:
    mean: float
    std: float = 0.0

    def bounds(self, k: float) -> tuple[float, float]:
        return self.mean - k * self.std, self.mean + k * self.std


@dataclass(frozen=True)
class PopulationSpec:
    """Truncated-Gaussian description of one population's type vector."""

    marginals: Mapping[str, Marginal]
    population_id: Population
    nu: float
    truncation_halfwidth: float = 3.0

    def __post_init__(self):
        missing = set(TYPE_FIELDS) - set(self.marginals)
        if missing:
            raise ConfigError(f"population spec missing fields: {sorted(missing)}")
        extra = set(self.marginals) - set(TYPE_FIELDS)
        if extra:
            raise ConfigError(f"unknown population fields: {sorted(extra)}")
        object.__setattr__(self, "population_id", Population(self.population_id))
        self.validate()

    def validate(self) -> None:
        k = self.truncation_halfwidth
        if not (math.isfinite(k) and k > 0):
            raise ConfigError(f"truncation_halfwidth must be > 0, got {k}")
        if not (math.isfinite(self.nu) and self.nu >= 0):
            raise ConfigError(f"nu must be >= 0, got {self.nu}")
        for name, m in self.marginals.items():
            if not (math.isfinite(m.mean) and math.isfinite(m.std)) or m.std < 0:
                raise ConfigError(f"{name}: need finite mean and std >= 0, got {m}")
        lo = {name: m.bounds(k)[0] for name, m in self.marginals.items()}
        if lo["delta"] <= 0:
            raise ConfigError(f"truncation admits delta <= 0 (lower bound {lo['delta']:.6g})")
        for name in ("sigma", "sigma0", "lambda1", "lambda2"):
            if lo[name] < 0:
                raise ConfigError(f"truncation admits {name} < 0 (lower bound {lo[name]:.6g})")
        if lo["sigma"] <= 0 and lo["sigma0"] <= 0:
            raise ConfigError("truncation admits sigma^2 + sigma0^2 = 0")

    def mean_type(self) -> TypeVector:
        return TypeVector(nu=self.nu, **{f: self.marginals[f].mean for f in TYPE_FIELDS})

    def with_marginal(self, name: str, mean: float, std: float | None = None) -> "PopulationSpec":
        std = self.marginals[name].std if std is None else std
        return replace(self, marginals={**self.marginals, name: Marginal(mean, std)})

    def with_nu(self, nu: float) -> "PopulationSpec":
        return replace(self, nu=nu)


def standard_truncated_normal(rng: np.random.Generator, k: float, size: int) -> np.ndarray:
    """``size`` draws of N(0,1) conditioned on ``|z| <= k``, by rejection."""
    z = rng.standard_normal(size)
    bad = np.abs(z) > k
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > k
    return z


@dataclass(frozen=True)
class TypeSample:
    """Struct-of-arrays sample of one population (length ``n``).

    Indexing with an int gives a :class:`TypeVector`; with a slice, a
    shorter ``TypeSample``.
    """

    population_id: Population
    xi: np.ndarray
    delta: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    sigma0: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray

    def __len__(self):
        return len(self.delta)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return TypeVector(**{f: float(getattr(self, f)[idx]) for f in (*TYPE_FIELDS, "nu")})
        return TypeSample(self.population_id, **{f: getattr(self, f)[idx] for f in (*TYPE_FIELDS, "nu")})

    def __iter__(self) -> Iterator[TypeVector]:
        return (self[i] for i in range(len(self)))

    @property
    def own_lambda(self) -> np.ndarray:
        """Weight on the agent's own population mean."""
        return self.lambda1 if self.population_id == Population.POP1 else self.lambda2

    @classmethod
    def from_types(cls, population_id, types) -> "TypeSample":
        types = list(types)
        cols = {f: np.array([getattr(t, f) for t in types], dtype=float) for f in (*TYPE_FIELDS, "nu")}
        return cls(Population(population_id), **cols)

    def replace(self, **cols) -> "TypeSample":
        cols = {k: np.broadcast_to(np.asarray(v, dtype=float), self.delta.shape).copy() for k, v in cols.items()}
        return replace(self, **cols)


def sample_population(spec: PopulationSpec, n: int, rng: np.random.Generator) -> TypeSample:
    """Draw ``n`` independent type vectors; fields are drawn in ``TYPE_FIELDS`` order."""
    if n < 1:
        raise ConfigError(f"sample size must be >= 1, got {n}")
    k = spec.truncation_halfwidth
    cols = {}
    for name in TYPE_FIELDS:
        m = spec.marginals[name]
        z = standard_truncated_normal(rng, k, n)
        cols[name] = m.mean + m.std * z
    cols["nu"] = np.full(n, float(spec.nu))
    return TypeSample(spec.population_id, **cols)


def sample_type_vector(spec: PopulationSpec, rng: np.random.Generator) -> TypeVector:
    return sample_population(spec, 1, rng)[0]


@dataclass(frozen=True)
class AgentRoster:
    pop1: TypeSample
    pop2: TypeSample
    seed: int | None = None

    def __post_init__(self):
        if len(self.pop1) < 1 or len(self.pop2) < 1:
            raise ConfigError("roster needs at least one agent per population")
        if self.pop1.population_id != Population.POP1 or self.pop2.population_id != Population.POP2:
            raise ConfigError("roster populations are out of order")

    @property
    def n1(self) -> int:
        return len(self.pop1)

    @property
    def n2(self) -> int:
        return len(self.pop2)

    def population(self, pop) -> TypeSample:
        return self.pop1 if Population(pop) == Population.POP1 else self.pop2

    def head(self, n1: int, n2: int | None = None) -> "AgentRoster":
        """Roster of the first ``n1`` / ``n2`` agents of each population."""
        n2 = n1 if n2 is None else n2
        return AgentRoster(self.pop1[:n1], self.pop2[:n2], self.seed)

    def lambda_sup(self) -> float:
        return float(max(np.abs(self.pop1.lambda1).max(), np.abs(self.pop1.lambda2).max(),
                         np.abs(self.pop2.lambda1).max(), np.abs(self.pop2.lambda2).max()))


def sample_roster(spec1: PopulationSpec, spec2: PopulationSpec, n1: int, n2: int, seed: int) -> AgentRoster:
    """Reproducible roster: each population reads its own substream of ``seed``."""
    if spec1.population_id != Population.POP1 or spec2.population_id != Population.POP2:
        raise ConfigError("sample_roster expects (pop1 spec, pop2 spec)")
    pop1 = sample_population(spec1, n1, substream(seed, "roster/pop1"))
    pop2 = sample_population(spec2, n2, substream(seed, "roster/pop2"))
    return AgentRoster(pop1, pop2, seed)


def deterministic_spec(population_id, nu: float, **means: float) -> PopulationSpec:
    """Spec with zero std in every field (missing fields default to 0, delta to 1)."""
    base = {f: 0.0 for f in TYPE_FIELDS}
    base["delta"] = 1.0
    base.update(means)
    return PopulationSpec({f: Marginal(v, 0.0) for f, v in base.items()}, Population(population_id), nu)


CALIBRATION_MEANS = dict(delta=1.0, gamma=-0.04, nu=4.7, sigma=0.11, sigma0=0.11, mu=0.25)


def calibrated_spec(population_id, own_lambda=(0.2, 0.02), cross_lambda=(0.0, 0.0),
                rel_std: float = 0.1, xi: float = 1.0, k: float = 3.0) -> PopulationSpec:
    """Market calibration: means from the reference table, std = ``rel_std`` * |mean|.

    ``own_lambda``/``cross_lambda`` are (mean, std) of the weights on the own
    and the other population's mean wealth.
    """
    pop = Population(population_id)
    m = {name: Marginal(CALIBRATION_MEANS[name], rel_std * abs(CALIBRATION_MEANS[name]))
         for name in ("delta", "gamma", "sigma", "sigma0", "mu")}
    own, cross = Marginal(*own_lambda), Marginal(*cross_lambda)
    m["lambda1"], m["lambda2"] = (own, cross) if pop == Population.POP1 else (cross, own)
    m["xi"] = Marginal(xi, 0.0)
    return PopulationSpec(m, pop, CALIBRATION_MEANS["nu"], k)
