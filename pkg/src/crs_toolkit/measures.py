"""Target/proposal pairs: construction, proposal sampling, density ratios.

Four families share one interface. Sample spaces are concrete carriers: real
scalars (laplace, synthetic on the unit interval), real vectors (gaussian
product pairs with equal per-dimension mean and scale), and integer indices
(discrete). Pairs are immutable after construction and safe to share across
threads; all randomness flows through keyed RngStream substreams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import InvalidParameterError
from .streams import RngStream
from .width import WidthFunction, gaussian_log_ratio_constants

LN2 = math.log(2.0)

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class LaplaceSpec:
    """Q = Laplace(0, b) against P = Laplace(0, 1), 0 < b <= 1."""

    b: float
    family: str = field(default="laplace", init=False)

    def __post_init__(self):
        if not (0.0 < self.b <= 1.0):
            raise InvalidParameterError(f"laplace scale must be in (0, 1], got {self.b}")


@dataclass(frozen=True)
class GaussianSpec:
    """Q = N(mu, sigma^2)^d against P = N(0, 1)^d, 0 < sigma < 1."""

    mu: float
    sigma: float
    d: int
    family: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if not (0.0 < self.sigma < 1.0):
            raise InvalidParameterError(f"gaussian sigma must be in (0, 1), got {self.sigma}")
        if self.d < 1 or self.d != int(self.d):
            raise InvalidParameterError(f"gaussian dimension must be a positive integer, got {self.d}")


@dataclass(frozen=True)
class DiscreteSpec:
    """Probability vectors (q, p) of equal length with Q << P."""

    q: tuple[float, ...]
    p: tuple[float, ...]
    family: str = field(default="discrete", init=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.ndim != 1 or q.shape != p.shape or q.size == 0:
            raise InvalidParameterError("q and p must be equal-length non-empty vectors")
        if np.any(q < 0.0) or np.any(p < 0.0):
            raise InvalidParameterError("probability vectors must be non-negative")
        if abs(q.sum() - 1.0) > _SUM_TOL or abs(p.sum() - 1.0) > _SUM_TOL:
            raise InvalidParameterError("q and p must each sum to 1 within 1e-12")
        if np.any((q > 0.0) & (p == 0.0)):
            raise InvalidParameterError("Q is not absolutely continuous w.r.t. P")
        object.__setattr__(self, "q", tuple(float(v) for v in q))
        object.__setattr__(self, "p", tuple(float(v) for v in p))


@dataclass(frozen=True)
class SyntheticSpec:
    """P = Uniform(0, 1); dQ/dP is the decreasing generalized inverse of w."""

    w: WidthFunction
    family: str = field(default="synthetic", init=False)

    def __post_init__(self):
        w = self.w
        if not (hasattr(w, "h_max") and callable(w)):
            raise InvalidParameterError("synthetic spec needs a WidthFunction")
        if abs(w.total_mass - 1.0) > 1e-9:
            raise InvalidParameterError(
                f"synthetic width mass {w.total_mass!r} differs from 1 by more than 1e-9")


PairSpec = Union[LaplaceSpec, GaussianSpec, DiscreteSpec, SyntheticSpec]


class DistributionPair:
    """A concrete (Q, P) pair: proposal sampling plus the density ratio."""

    spec: PairSpec
    d_inf_bits: float

    def log_ratio(self, x) -> np.ndarray:
        """ln(dQ/dP) at points of P's support, vectorized."""
        raise NotImplementedError

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """n proposal draws from an already-positioned generator."""
        raise NotImplementedError

    def sample_proposal(self, rng_stream: RngStream, n: int) -> np.ndarray:
        """n i.i.d. draws from P, deterministic given the stream key."""
        if n < 1:
            raise InvalidParameterError("need n >= 1")
        return self.draw(rng_stream.generator(), n)

    @property
    def point_shape(self) -> tuple[int, ...]:
        """Trailing shape of one sample point (() for scalars and indices)."""
        return ()


class LaplacePair(DistributionPair):
    def __init__(self, spec: LaplaceSpec):
        self.spec = spec
        self.b = spec.b
        self.d_inf_bits = -math.log2(self.b)

    def log_ratio(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return -math.log(self.b) - np.abs(x) * (1.0 - self.b) / self.b

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return gen.laplace(0.0, 1.0, n)


class GaussianPair(DistributionPair):
    def __init__(self, spec: GaussianSpec):
        self.spec = spec
        self.a, self.c, self.t0 = gaussian_log_ratio_constants(spec.mu, spec.sigma)
        self.d_inf_bits = spec.d * self.t0 / LN2

    def log_ratio(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.spec.d == 1 and x.ndim <= 1:
            per_dim = self.t0 - self.a * (x - self.c) ** 2
            return np.atleast_1d(per_dim)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.spec.d:
            raise InvalidParameterError(f"points must have dimension {self.spec.d}")
        return self.spec.d * self.t0 - self.a * np.sum((x - self.c) ** 2, axis=-1)

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        draws = gen.standard_normal((n, self.spec.d))
        return draws[:, 0] if self.spec.d == 1 else draws

    @property
    def point_shape(self) -> tuple[int, ...]:
        return () if self.spec.d == 1 else (self.spec.d,)


class DiscretePair(DistributionPair):
    def __init__(self, spec: DiscreteSpec):
        self.spec = spec
        self.q = np.asarray(spec.q, dtype=float)
        self.p = np.asarray(spec.p, dtype=float)
        self._cum_p = np.cumsum(self.p)
        ratios = np.zeros_like(self.q)
        np.divide(self.q, self.p, out=ratios, where=self.p > 0.0)
        self.ratios = ratios
        support = (self.p > 0.0) & (self.q > 0.0)
        self.d_inf_bits = float(np.log2(ratios[support].max())) if support.any() else 0.0

    def log_ratio(self, x) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(x))
        if not np.issubdtype(idx.dtype, np.integer):
            if np.any(idx != np.floor(idx)):
                raise InvalidParameterError("discrete points are integer indices")
            idx = idx.astype(np.int64)
        if np.any((idx < 0) | (idx >= self.q.size)):
            raise InvalidParameterError("index outside the alphabet")
        if np.any(self.p[idx] == 0.0):
            raise InvalidParameterError("point outside the support of P")
        with np.errstate(divide="ignore"):
            return np.log(self.ratios[idx])

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        u = gen.random(n)
        return np.searchsorted(self._cum_p, u, side="right").astype(np.int64)


class SyntheticPair(DistributionPair):
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.w = spec.w
        h_max = spec.w.h_max
        self.d_inf_bits = math.log2(h_max) if math.isfinite(h_max) else math.inf

    def log_ratio(self, x) -> np.ndarray:
        u = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise InvalidParameterError("synthetic points live in the open unit interval")
        with np.errstate(divide="ignore"):
            return np.log(self.w.ratio_inverse(u))

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return gen.random(n)


_PAIR_TYPES = {
    "laplace": LaplacePair,
    "gaussian": GaussianPair,
    "discrete": DiscretePair,
    "synthetic": SyntheticPair,
}


def make_pair(spec: PairSpec) -> DistributionPair:
    """Build the pair for a validated spec, with d_inf_bits populated."""
    try:
        cls = _PAIR_TYPES[spec.family]
    except (AttributeError, KeyError):
        raise InvalidParameterError(f"unknown pair spec {spec!r}") from None
    return cls(spec)


def log_ratio(pair: DistributionPair, x) -> np.ndarray:
    """Functional form of pair.log_ratio."""
    return pair.log_ratio(x)


def sample_proposal(pair: DistributionPair, rng_stream: RngStream, n: int) -> np.ndarray:
    """Functional form of pair.sample_proposal."""
    return pair.sample_proposal(rng_stream, n)


def discrete_spec(q: Sequence[float], p: Sequence[float]) -> DiscreteSpec:
    return DiscreteSpec(tuple(float(v) for v in q), tuple(float(v) for v in p))
