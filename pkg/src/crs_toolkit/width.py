"""Width functions w(h) = P(dQ/dP >= h) and derived superlevel quantities.

A width function is non-increasing with w(0) = 1 and unit integral; it is the
only object the divergences and the sampling recursion ever consult. Values
at jump points follow P(dQ/dP >= h) exactly, which is the left-continuous
choice at atoms of the density ratio (the discrete pair with ratios {2, 0}
has w(2) = 0.5); every integral here is insensitive to that choice.

Analytic widths per family:

  laplace(b):   w(h) = 1 - (b h)^(b/(1-b)) on [0, 1/b]; indicator of [0, 1]
                at b = 1. Derived from the symmetric superlevel interval
                |x| <= (b/(1-b)) ln(1/(b h)) of the ratio and the Laplace(0,1)
                interval probability 1 - e^-t; cross-checked by Monte Carlo.
  gaussian:     the log-ratio is d*t0 - a * sum_i (x_i - c)^2 with
                a = 1/(2 sigma^2) - 1/2 and c = mu/(1 - sigma^2), so
                w(h) = F[(d*t0 - ln h)/a] where F is the noncentral
                chi-square CDF with d degrees of freedom and noncentrality
                d*c^2, evaluated by a Poisson mixture of central chi-squares.
  discrete:     exact step function over the sorted ratio levels.
  synthetic:    any caller-supplied width; uniform proposal on (0, 1) with
                density ratio equal to the decreasing generalized inverse
                r(u) = sup{h : w(h) > u}.
"""
from __future__ import annotations

import math
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import special

from .errors import InvalidParameterError, QuadratureError
from .quadrature import (
    PowerTail,
    QuadResult,
    gk15,
    integrate_interval,
    width_mass_integral,
)
from .streams import RngStream

if TYPE_CHECKING:  # pragma: no cover
    from .measures import DistributionPair, PairSpec

LN2 = math.log(2.0)

_MASS_TOL = 1e-10
_POISSON_TAIL_WEIGHT = 1e-14


def gaussian_log_ratio_constants(mu: float, sigma: float) -> tuple[float, float, float]:
    """Per-dimension constants (a, c, t0) of the Gaussian pair log-ratio.

    ln(q/p)(x) = t0 - a (x - c)^2 with a > 0 for sigma < 1; t0 is the peak
    log-ratio, attained at x = c.
    """
    a = 0.5 / sigma**2 - 0.5
    c = mu / (1.0 - sigma**2)
    t0 = -math.log(sigma) - (c - mu) ** 2 / (2.0 * sigma**2) + c**2 / 2.0
    return a, c, t0


def noncentral_chi2_cdf(x, df: int, noncentrality: float,
                        tail_weight: float = _POISSON_TAIL_WEIGHT) -> np.ndarray:
    """CDF of the noncentral chi-square, vectorized over x.

    Poisson(noncentrality/2) mixture of central chi-square CDFs, truncated
    once the Poisson tail weight drops below tail_weight. Terms are formed
    from log-space Poisson weights and the regularized lower incomplete
    gamma, which keeps relative accuracy in the deep lower tail where the
    divergence integrands need it.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = 0.5 * np.maximum(x, 0.0)
    lam = 0.5 * noncentrality
    if lam == 0.0:
        return special.gammainc(0.5 * df, z)
    # Poisson tail beyond lam + k*sqrt(lam) decays like exp(-k^2/2), so k
    # derived from tail_weight caps the discarded weight. Low-j terms always
    # stay: they dominate the deep lower tail, where the central CDF factors
    # fall off much faster than the Poisson weights.
    k_pad = math.sqrt(2.0 * math.log(1.0 / tail_weight)) + 3.0
    j_hi = int(lam + k_pad * math.sqrt(lam + 1.0) + 30.0)
    j = np.arange(j_hi + 1)
    log_w = j * math.log(lam) - lam - special.gammaln(j + 1.0)
    terms = np.exp(log_w)[None, :] * special.gammainc(0.5 * df + j[None, :], z[:, None])
    return np.clip(terms.sum(axis=1), 0.0, 1.0)


class WidthFunction:
    """Base width function: vectorized evaluation plus integral helpers.

    Subclasses set h_max, breakpoints, optionally a PowerTail certificate,
    and implement _eval_positive on h > 0.
    """

    h_max: float
    breakpoints: tuple[float, ...]
    tail: PowerTail | None = None

    def __init__(self):
        self._mass: float | None = None

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, h) -> np.ndarray:
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if np.any(h < 0.0):
            raise InvalidParameterError("width argument h must be >= 0")
        out = np.zeros_like(h)
        pos = h > 0.0
        if np.any(pos):
            out[pos] = np.clip(self._eval_positive(h[pos]), 0.0, 1.0)
        out[~pos] = 1.0
        if math.isfinite(self.h_max):
            out[h > self.h_max] = 0.0
        return out

    @property
    def total_mass(self) -> float:
        """integral of w over (0, h_max], computed once and cached."""
        if self._mass is None:
            res = width_mass_integral(self.__call__, 0.0, self.h_max, _MASS_TOL,
                                      self.breakpoints, self.tail)
            if not res.converged:
                raise QuadratureError("width mass integral did not converge")
            self._mass = res.value
        return self._mass

    def band_integral(self, lo: float, hi: float, tol: float = 1e-13) -> float:
        """integral of w over [lo, hi], split at interior breakpoints."""
        if hi <= lo:
            return 0.0
        hi = min(hi, self.h_max) if math.isfinite(self.h_max) else hi
        if hi <= lo:
            return 0.0
        cuts = [b for b in self.breakpoints if lo < b < hi]
        pts = [lo, *sorted(cuts), hi]
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            v, e = gk15(self.__call__, a, b)
            if e > tol:
                res = integrate_interval(self.__call__, a, b, tol)
                v = res.value
            total += v
        return total

    def tail_integral(self, h: float, tol: float = 1e-12) -> QuadResult:
        """integral of w over (h, h_max]."""
        if h < 0:
            raise InvalidParameterError("h must be >= 0")
        return width_mass_integral(self.__call__, h, self.h_max, tol,
                                   self.breakpoints, self.tail)

    def ratio_inverse(self, u) -> np.ndarray:
        """Decreasing generalized inverse r(u) = sup{h : w(h) > u}, u in (0, 1).

        This is the density ratio of the synthetic pair built on this width.
        The base implementation bisects the monotone evaluation; parametric
        subclasses override with closed forms.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise InvalidParameterError("ratio_inverse is defined on (0, 1)")
        if not math.isfinite(self.h_max):
            raise InvalidParameterError(
                "generic bisection inverse needs finite h_max; override ratio_inverse")
        out = np.empty_like(u)
        for i, ui in enumerate(u):
            lo, hi = 0.0, self.h_max
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if float(self(mid)[0]) > ui:
                    lo = mid
                else:
                    hi = mid
            out[i] = lo
        return out


class StepWidth(WidthFunction):
    """Piecewise-constant width: values[j] on (edges[j], edges[j+1]].

    All integrals are exact segment sums, so recursions driven by a step
    width are exact up to float rounding.
    """

    def __init__(self, edges: Sequence[float], values: Sequence[float]):
        super().__init__()
        edges_a = np.asarray(edges, dtype=float)
        values_a = np.asarray(values, dtype=float)
        if edges_a.ndim != 1 or values_a.ndim != 1 or len(edges_a) != len(values_a) + 1:
            raise InvalidParameterError("need len(edges) == len(values) + 1")
        if edges_a[0] != 0.0 or np.any(np.diff(edges_a) <= 0.0):
            raise InvalidParameterError("edges must start at 0 and strictly increase")
        if np.any(values_a < 0.0) or np.any(values_a > 1.0) or np.any(np.diff(values_a) > 0.0):
            raise InvalidParameterError("values must be non-increasing within [0, 1]")
        if values_a[-1] <= 0.0:
            raise InvalidParameterError(
                "trailing zero-value segments must be dropped; they would overstate h_max")
        self.edges = edges_a
        self.values = values_a
        self.h_max = float(edges_a[-1])
        self.breakpoints = tuple(float(e) for e in edges_a[1:])
        self._mass = float(np.dot(np.diff(edges_a), values_a))

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        # side="left" puts an exact edge hit in the segment to its left.
        idx = np.searchsorted(self.edges[1:], h, side="left")
        idx = np.minimum(idx, len(self.values) - 1)
        return np.where(h > self.h_max, 0.0, self.values[idx])

    def band_integral(self, lo: float, hi: float, tol: float = 1e-13) -> float:
        lo = min(max(lo, 0.0), self.h_max)
        hi = min(max(hi, 0.0), self.h_max)
        if hi <= lo:
            return 0.0
        cum = np.concatenate(([0.0], np.cumsum(np.diff(self.edges) * self.values)))

        def below(t: float) -> float:
            j = int(np.searchsorted(self.edges, t, side="right")) - 1
            j = min(j, len(self.values) - 1)
            return float(cum[j] + self.values[j] * (t - self.edges[j]))

        return below(hi) - below(lo)

    def tail_integral(self, h: float, tol: float = 1e-12) -> QuadResult:
        return QuadResult(self._mass - self.band_integral(0.0, h), 0.0, True, 0)

    def ratio_inverse(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise InvalidParameterError("ratio_inverse is defined on (0, 1)")
        # w(h) > u holds up to the right edge of the last segment whose value
        # exceeds u; the phantom level 1 at h = 0 makes count >= 1 always.
        vals = np.concatenate(([1.0], self.values))
        edges = np.concatenate(([0.0], self.edges[1:]))
        count = np.searchsorted(-vals, -u, side="left")
        return edges[count - 1]


class LaplaceWidth(WidthFunction):
    """Width of Laplace(0, b) against Laplace(0, 1), 0 < b < 1."""

    def __init__(self, b: float):
        super().__init__()
        if not (0.0 < b < 1.0):
            raise InvalidParameterError("LaplaceWidth needs 0 < b < 1; b = 1 is a step")
        self.b = float(b)
        self.expo = b / (1.0 - b)
        self.h_max = 1.0 / b
        self.breakpoints = (self.h_max,)

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        w = np.zeros_like(h)
        inside = h <= self.h_max
        w[inside] = 1.0 - np.power(self.b * h[inside], self.expo)
        return w

    def ratio_inverse(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return (1.0 / self.b) * np.power(1.0 - u, 1.0 / self.expo)


def indicator_width(c: float = 1.0) -> StepWidth:
    """Width 1[h <= c] of an identity-like pair (c = 1: Q = P)."""
    if c != 1.0:
        raise InvalidParameterError("indicator width has unit mass only at c = 1")
    return StepWidth([0.0, 1.0], [1.0])


def equality_case_width(c: float) -> StepWidth:
    """Width (1/c) 1[h <= c], c >= 1: the family where D_CS = D_KL = log2 c."""
    if c < 1.0:
        raise InvalidParameterError("need c >= 1")
    w = indicator_width() if c == 1.0 else StepWidth([0.0, c], [1.0 / c])
    w.label = f"equality_case(c={c:g})"
    return w


def two_level_width(eps: float) -> StepWidth:
    """Three-piece width: 1 up to 1/(1+e), then eps on a span of e/((1+e) eps).

    The family whose index-entropy gap approaches log2(e+1) as eps -> 0.
    """
    if not (0.0 < eps < 1.0):
        raise InvalidParameterError("need 0 < eps < 1")
    a = 1.0 / (1.0 + math.e)
    span = math.e / ((1.0 + math.e) * eps)
    w = StepWidth([0.0, a, a + span], [1.0, eps])
    w.label = f"two_level(eps={eps:g})"
    return w


class GaussianWidth(WidthFunction):
    """Width of N(mu, sigma^2)^d against N(0, 1)^d, 0 < sigma < 1."""

    def __init__(self, mu: float, sigma: float, d: int):
        super().__init__()
        if not (0.0 < sigma < 1.0):
            raise InvalidParameterError("need 0 < sigma < 1")
        if d < 1 or d != int(d):
            raise InvalidParameterError("need integer dimension d >= 1")
        if d > 256:
            raise InvalidParameterError(
                "d > 256 exceeds the noncentral chi-square series budget; "
                "use Monte Carlo width estimates instead")
        self.mu, self.sigma, self.d = float(mu), float(sigma), int(d)
        self.a, self.c, self.t0 = gaussian_log_ratio_constants(mu, sigma)
        self.noncentrality = d * self.c**2
        self.ln_h_max = d * self.t0
        self.h_max = math.exp(self.ln_h_max)
        self.breakpoints = (self.h_max,)

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        x = (self.ln_h_max - np.log(h)) / self.a
        w = np.zeros_like(h)
        m = x > 0.0
        if np.any(m):
            w[m] = noncentral_chi2_cdf(x[m], self.d, self.noncentrality)
        return w


class OptimalCsWidth(WidthFunction):
    """Width maximizing D_CS at fixed D_KL: 1 up to alpha, then (h/alpha)^-p.

    alpha in (0, 1), p = 1/(1 - alpha). Closed forms (nats):
    D_KL = 1/alpha - 1 + ln(alpha), D_CS = (1 - alpha)/alpha.
    """

    def __init__(self, alpha: float):
        super().__init__()
        if not (0.0 < alpha < 1.0):
            raise InvalidParameterError("need 0 < alpha < 1")
        self.alpha = float(alpha)
        self.p = 1.0 / (1.0 - alpha)
        self.h_max = math.inf
        self.breakpoints = (self.alpha,)
        # beyond alpha the width IS coef * h^-p; the 1e-12 pad keeps the
        # certificate an upper bound under float rounding
        self.tail = PowerTail(coef=self.alpha**self.p * (1.0 + 1e-12),
                              exponent=self.p, h_from=self.alpha)
        self._mass = 1.0

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        w = np.ones_like(h)
        m = h > self.alpha
        w[m] = np.power(h[m] / self.alpha, -self.p)
        return w

    def kl_bits(self) -> float:
        return (1.0 / self.alpha - 1.0 + math.log(self.alpha)) / LN2

    def dcs_bits(self) -> float:
        return (1.0 - self.alpha) / self.alpha / LN2

    def ratio_inverse(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return self.alpha * np.power(u, -(1.0 - self.alpha))


class OptimalAcsWidth(WidthFunction):
    """Width maximizing D_ACS at fixed D_KL: w(h) = 1/(1 + (beta h)^alpha).

    alpha > 1, beta = (pi/alpha)/sin(pi/alpha). Closed forms (nats):
    D_KL = -(ln(beta) - 1 + beta cos(pi/alpha)), D_ACS = alpha - pi cot(pi/alpha).
    """

    def __init__(self, alpha: float):
        super().__init__()
        if not alpha > 1.0:
            raise InvalidParameterError("need alpha > 1")
        self.alpha = float(alpha)
        self.beta = (math.pi / alpha) / math.sin(math.pi / alpha)
        self.h_max = math.inf
        self.breakpoints = ()
        # 1/(1+y) < 1/y, but the slack is absorbed by rounding once y > 1e16
        self.tail = PowerTail(coef=self.beta**-alpha * (1.0 + 1e-12),
                              exponent=alpha, h_from=2.0 / self.beta)
        self._mass = 1.0

    def _eval_positive(self, h: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.power(self.beta * h, self.alpha))

    def kl_bits(self) -> float:
        a = self.alpha
        return -(math.log(self.beta) - 1.0 + self.beta * math.cos(math.pi / a)) / LN2

    def dacs_bits(self) -> float:
        a = self.alpha
        return (a - math.pi / math.tan(math.pi / a)) / LN2

    def ratio_inverse(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.power(1.0 / u - 1.0, 1.0 / self.alpha) / self.beta


def width_from_discrete(q: Sequence[float], p: Sequence[float]) -> StepWidth:
    """Exact step width of a discrete pair from its sorted density ratios."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any((q > 0.0) & (p == 0.0)):
        raise InvalidParameterError("Q is not absolutely continuous w.r.t. P")
    ratios = np.zeros_like(q)
    np.divide(q, p, out=ratios, where=p > 0.0)
    order = np.argsort(ratios, kind="stable")[::-1]
    r_sorted = ratios[order]
    p_sorted = p[order]
    levels: list[float] = []
    masses: list[float] = []
    for r, pm in zip(r_sorted, p_sorted):
        if levels and r == levels[-1]:
            masses[-1] += pm
        else:
            levels.append(float(r))
            masses.append(float(pm))
    # cum[i] = P(ratio >= levels[i]); on (levels[i+1], levels[i]] the width is
    # cum[i], so ascending edges pair with the cumulative masses reversed.
    # Roundoff can push the final cumulative a few ulp above 1.
    cum = np.minimum(np.cumsum(masses), 1.0)
    positive = [(r, c) for r, c in zip(levels, cum) if r > 0.0]
    edges = [0.0] + [r for r, _ in reversed(positive)]
    values = [c for _, c in reversed(positive)]
    return StepWidth(edges, values)


def width_eval(spec: "PairSpec") -> WidthFunction:
    """Analytic width function of a pair spec."""
    fam = spec.family
    if fam == "laplace":
        return indicator_width() if spec.b == 1.0 else LaplaceWidth(spec.b)
    if fam == "gaussian":
        return GaussianWidth(spec.mu, spec.sigma, spec.d)
    if fam == "discrete":
        return width_from_discrete(spec.q, spec.p)
    if fam == "synthetic":
        return spec.w
    raise InvalidParameterError(f"unknown family {fam!r}")


def width_mc_estimate(pair: "DistributionPair", h: float, n: int,
                      rng_stream: RngStream) -> tuple[float, float]:
    """Monte Carlo estimate of w(h) with its binomial standard error.

    Verification oracle for the analytic widths: the fraction of n proposal
    draws whose density ratio is >= h.
    """
    if n < 100:
        raise InvalidParameterError("need n >= 100")
    x = pair.sample_proposal(rng_stream, n)
    log_r = pair.log_ratio(x)
    thresh = -math.inf if h <= 0.0 else math.log(h)
    est = float(np.mean(log_r >= thresh))
    stderr = math.sqrt(est * (1.0 - est) / n)
    return est, stderr


def superlevel_measures(w: WidthFunction, h: float, tol: float = 1e-10) -> tuple[float, float]:
    """(P-mass, Q-mass) of the superlevel set {dQ/dP >= h}.

    P-mass is w(h) itself; Q-mass follows from the layer-cake identity
    Q(dQ/dP >= h) = h w(h) + integral of w over (h, h_max].
    """
    if h < 0.0:
        raise InvalidParameterError("h must be >= 0")
    p_mass = float(w(h)[0])
    res = w.tail_integral(h, tol)
    if not res.converged:
        raise QuadratureError("tail integral for q_mass did not converge")
    q_mass = h * p_mass + res.value
    return p_mass, min(q_mass, 1.0)


def d_infinity(w: WidthFunction) -> float:
    """Renyi infinity divergence in bits: log2 of the largest ratio level."""
    return math.log2(w.h_max) if math.isfinite(w.h_max) else math.inf


def width_table(w: WidthFunction, n: int = 1024) -> list[tuple[float, float]]:
    """(h, w(h)) plotting table: n points log-spaced over (0, h_max]."""
    if not math.isfinite(w.h_max):
        raise InvalidParameterError("table export needs finite h_max")
    h = np.geomspace(w.h_max * 1e-9, w.h_max, n)
    vals = w(h)
    return list(zip(h.tolist(), vals.tolist()))


def width_table_csv(w: WidthFunction, n: int = 1024) -> str:
    lines = ["h,w"]
    lines += [f"{h:.9g},{v:.9g}" for h, v in width_table(w, n)]
    return "\n".join(lines) + "\n"


def width_from_table(rows: Sequence[tuple[float, float]]) -> StepWidth:
    """Step width from CSV rows (h, w): h strictly increasing from 0 with w = 1,
    w non-increasing, final w = 0; right-continuous piecewise-constant reading.

    Row j defines the value on [h_j, h_{j+1}); the final row closes the
    support. Unit mass is enforced before use.
    """
    if len(rows) < 2:
        raise InvalidParameterError("width table needs at least two rows")
    h = np.asarray([r[0] for r in rows], dtype=float)
    v = np.asarray([r[1] for r in rows], dtype=float)
    if h[0] != 0.0 or v[0] != 1.0:
        raise InvalidParameterError("width table must start at h = 0 with w = 1")
    if np.any(np.diff(h) <= 0.0):
        raise InvalidParameterError("width table h column must strictly increase")
    if np.any(np.diff(v) > 0.0) or v[-1] != 0.0:
        raise InvalidParameterError("width table w column must be non-increasing, ending at 0")
    w = StepWidth(h, v[:-1])
    if abs(w.total_mass - 1.0) > 1e-9:
        raise InvalidParameterError(
            f"width table mass {w.total_mass!r} differs from 1 by more than 1e-9")
    return w
