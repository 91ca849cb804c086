"""Experiment sweeps, the bound-verification suite, and their file formats.

Three sweeps (CSV) and one verification report (JSON):

  laplace:  b,neg_ln_b,kl_bits,dcs_bits,delta_bits,lower_digamma_nats,upper_digamma_nats,entropy_bits
  gaussian: d,kl_bits,dcs_bits,delta_bits,conjecture_half_log_bits
  epsilon:  eps,dcs_bits,entropy_bits,gap_bits
  bounds:   JSON list of {spec, quantities, inequalities: [{name, lhs, rhs, margin, pass}]}

Every row re-validates its own identities (delta recomputation, digamma-band
membership, bound-chain membership) before it is emitted; a violated row
aborts the sweep. Grid points are independent jobs; CRS_TOOLKIT_THREADS caps
the worker count (0 = auto, unset = serial) and rows are merged in grid
order, so output bytes never depend on scheduling.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .divergences import (
    LOG2_E_PLUS_1,
    alternative_divergence,
    channel_simulation_divergence,
    dcs_laplace_closed,
    kl_divergence,
)
from .errors import CrsToolkitError, InvalidParameterError, SweepValidationError
from .grs import grs_index_distribution
from .measures import (
    GaussianSpec,
    LaplaceSpec,
    PairSpec,
    SyntheticSpec,
    discrete_spec,
)
from .width import (
    d_infinity,
    equality_case_width,
    two_level_width,
    width_eval,
    width_from_table,
)

LN2 = math.log(2.0)
GAMMA = float(np.euler_gamma)

DEFAULT_B_GRID = tuple(np.geomspace(0.02, 1.0, 25).tolist())
DEFAULT_D_GRID = (1, 2, 4, 8, 16, 32, 64)
DEFAULT_EPS_GRID = (0.3, 0.1, 0.03, 0.01, 0.003)

LAPLACE_HEADER = "b,neg_ln_b,kl_bits,dcs_bits,delta_bits,lower_digamma_nats,upper_digamma_nats,entropy_bits"
GAUSSIAN_HEADER = "d,kl_bits,dcs_bits,delta_bits,conjecture_half_log_bits"
EPSILON_HEADER = "eps,dcs_bits,entropy_bits,gap_bits"

SWEEP_EPS_STOP = 1e-6  # survival cutoff for sweep entropy columns
SUITE_EPS_STOP = 1e-9  # default cutoff inside the verification suite


def _thread_count() -> int:
    raw = os.environ.get("CRS_TOOLKIT_THREADS", "")
    if raw == "":
        return 1
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    if n < 0:
        raise InvalidParameterError("CRS_TOOLKIT_THREADS must be >= 0")
    return n


def _map_ordered(fn: Callable, items: Sequence) -> list:
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


@dataclass(frozen=True)
class LaplaceRow:
    b: float
    neg_ln_b: float
    kl_bits: float
    dcs_bits: float
    delta_bits: float
    lower_digamma_nats: float
    upper_digamma_nats: float
    entropy_bits: float
    entropy_tail_bound_bits: float = field(default=0.0)

    def validate(self):
        if self.delta_bits != self.dcs_bits - self.kl_bits:
            raise SweepValidationError(f"delta identity violated at b={self.b}")
        delta_nats = self.delta_bits * LN2
        if not (self.lower_digamma_nats - 1e-9 <= delta_nats
                <= self.upper_digamma_nats + 1e-9):
            raise SweepValidationError(f"digamma band violated at b={self.b}")
        slack = self.entropy_tail_bound_bits + 1e-9
        chain_tail = self.kl_bits + math.log2(self.kl_bits + 1.0) + LOG2_E_PLUS_1 + 1.0
        ok = (self.kl_bits <= self.dcs_bits + 1e-12
              and self.dcs_bits <= self.entropy_bits + slack
              and self.entropy_bits <= self.dcs_bits + LOG2_E_PLUS_1 + slack
              and self.dcs_bits + LOG2_E_PLUS_1 <= chain_tail + 1e-12)
        if not ok:
            raise SweepValidationError(f"bound chain violated at b={self.b}")

    def csv(self) -> str:
        return ",".join(_fmt(v) for v in (
            self.b, self.neg_ln_b, self.kl_bits, self.dcs_bits, self.delta_bits,
            self.lower_digamma_nats, self.upper_digamma_nats, self.entropy_bits))


@dataclass(frozen=True)
class GaussianRow:
    d: int
    kl_bits: float
    dcs_bits: float
    delta_bits: float
    conjecture_half_log_bits: float

    def validate(self):
        if self.delta_bits != self.dcs_bits - self.kl_bits:
            raise SweepValidationError(f"delta identity violated at d={self.d}")
        if self.kl_bits > self.dcs_bits + 1e-9:
            raise SweepValidationError(f"KL exceeds D_CS at d={self.d}")

    def csv(self) -> str:
        return ",".join([str(self.d)] + [_fmt(v) for v in (
            self.kl_bits, self.dcs_bits, self.delta_bits, self.conjecture_half_log_bits)])


@dataclass(frozen=True)
class EpsilonRow:
    eps: float
    dcs_bits: float
    entropy_bits: float
    gap_bits: float

    def validate(self):
        if self.gap_bits != self.entropy_bits - self.dcs_bits:
            raise SweepValidationError(f"gap identity violated at eps={self.eps}")
        if self.gap_bits > LOG2_E_PLUS_1 + 1e-6:
            raise SweepValidationError(f"entropy gap exceeds log2(e+1) at eps={self.eps}")

    def csv(self) -> str:
        return ",".join(_fmt(v) for v in (
            self.eps, self.dcs_bits, self.entropy_bits, self.gap_bits))


def laplace_sweep(
    b_grid: Sequence[float] | None = None,
    eps_stop: float = SWEEP_EPS_STOP,
) -> list[LaplaceRow]:
    """Closed-form D_CS, KL, their gap with its digamma band, and the exact
    sampler entropy, per scale b; rows ordered by -ln b."""
    grid = DEFAULT_B_GRID if b_grid is None else tuple(float(b) for b in b_grid)
    if any(not (0.0 < b <= 1.0) for b in grid):
        raise InvalidParameterError("laplace grid scales must lie in (0, 1]")

    def one(b: float) -> LaplaceRow:
        kl = kl_divergence(LaplaceSpec(b)).value_bits
        dcs = dcs_laplace_closed(b)
        dist = grs_index_distribution(width_eval(LaplaceSpec(b)), eps_stop=eps_stop)
        row = LaplaceRow(
            b=b,
            neg_ln_b=-math.log(b) + 0.0,
            kl_bits=kl,
            dcs_bits=dcs,
            delta_bits=dcs - kl,
            lower_digamma_nats=GAMMA - b,
            upper_digamma_nats=GAMMA - b / 2.0,
            entropy_bits=dist.entropy_bits,
            entropy_tail_bound_bits=dist.entropy_tail_bound_bits,
        )
        row.validate()
        return row

    ordered = sorted(grid, key=lambda b: -math.log(b))
    return _map_ordered(one, ordered)


def gaussian_sweep(
    d_grid: Sequence[int] | None = None,
    mu: float = 1.0,
    sigma: float = 0.5,
) -> list[GaussianRow]:
    """KL (closed form), D_CS (quadrature over the noncentral chi-square
    width), their gap, and the half-log conjecture column, per dimension."""
    grid = DEFAULT_D_GRID if d_grid is None else tuple(int(d) for d in d_grid)

    def one(d: int) -> GaussianRow:
        spec = GaussianSpec(mu, sigma, d)
        kl = kl_divergence(spec).value_bits
        dcs = channel_simulation_divergence(width_eval(spec)).value_bits
        row = GaussianRow(
            d=d,
            kl_bits=kl,
            dcs_bits=dcs,
            delta_bits=dcs - kl,
            conjecture_half_log_bits=0.5 * math.log2(kl + 1.0),
        )
        row.validate()
        return row

    return _map_ordered(one, grid)


def epsilon_family_study(eps_grid: Sequence[float] | None = None,
                         eps_stop: float = SUITE_EPS_STOP) -> list[EpsilonRow]:
    """Exact entropy gap H[K] - D_CS of the two-level tightness family."""
    grid = DEFAULT_EPS_GRID if eps_grid is None else tuple(float(e) for e in eps_grid)
    if any(e2 >= e1 for e1, e2 in zip(grid, grid[1:])):
        raise InvalidParameterError("eps values must strictly decrease")

    def one(eps: float) -> EpsilonRow:
        w = two_level_width(eps)
        dcs = channel_simulation_divergence(w).value_bits
        dist = grs_index_distribution(w, eps_stop=eps_stop)
        row = EpsilonRow(
            eps=eps,
            dcs_bits=dcs,
            entropy_bits=dist.entropy_bits,
            gap_bits=dist.entropy_bits - dcs,
        )
        row.validate()
        return row

    return _map_ordered(one, grid)


@dataclass(frozen=True)
class SuiteEntry:
    """One verification job: a pair spec plus its recursion cutoff."""

    name: str
    spec: PairSpec
    eps_stop: float = SUITE_EPS_STOP


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float
    slack: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.slack

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": float(self.lhs), "rhs": float(self.rhs),
                "margin": float(self.margin), "pass": bool(self.passed)}


@dataclass(frozen=True)
class PairBoundReport:
    name: str
    spec: dict
    quantities: dict
    inequalities: list[Inequality]
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(i.passed for i in self.inequalities)

    def to_json(self) -> dict:
        out = {"spec": self.spec, "quantities": self.quantities,
               "inequalities": [i.to_json() for i in self.inequalities]}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class BoundSuiteReport:
    pairs: list[PairBoundReport]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.pairs)

    def to_json(self) -> list:
        return [p.to_json() for p in self.pairs]


def spec_descriptor(spec: PairSpec) -> dict:
    if spec.family == "laplace":
        return {"family": "laplace", "b": spec.b}
    if spec.family == "gaussian":
        return {"family": "gaussian", "mu": spec.mu, "sigma": spec.sigma, "d": spec.d}
    if spec.family == "discrete":
        return {"family": "discrete", "q": list(spec.q), "p": list(spec.p)}
    return {"family": "synthetic", "width": getattr(spec.w, "label", type(spec.w).__name__)}


def _verify_pair(entry: SuiteEntry) -> PairBoundReport:
    spec = entry.spec
    try:
        w = width_eval(spec)
        if spec.family == "synthetic":
            kl_rep = kl_divergence(spec, route="width_identity")
        else:
            kl_rep = kl_divergence(spec)
        dcs_rep = channel_simulation_divergence(w)
        dacs_rep = alternative_divergence(w)
        dist = grs_index_distribution(w, eps_stop=entry.eps_stop)
        dinf = d_infinity(w)
        kl, dcs, dacs = kl_rep.value_bits, dcs_rep.value_bits, dacs_rep.value_bits
        ent = dist.entropy_bits
        ent_slack = dist.entropy_tail_bound_bits
        mean_total = dist.mean_index + dist.mean_tail_bound
        quantities = {
            "kl_bits": float(kl),
            "dcs_bits": float(dcs),
            "dacs_bits": float(dacs),
            "entropy_bits": float(ent),
            "entropy_tail_bound_bits": float(ent_slack),
            "mean_index": float(dist.mean_index),
            "mean_tail_bound": float(dist.mean_tail_bound),
            "d_inf_bits": float(dinf),
            "eps_stop": float(entry.eps_stop),
        }
        quad = kl_rep.abs_error_estimate + dcs_rep.abs_error_estimate
        ineqs = [
            Inequality("kl_le_dcs", kl, dcs, quad + 1e-12),
            Inequality("dcs_le_entropy", dcs, ent,
                       dcs_rep.abs_error_estimate + ent_slack + 1e-12),
            Inequality("entropy_le_dcs_plus_log2_e_plus_1", ent, dcs + LOG2_E_PLUS_1,
                       dcs_rep.abs_error_estimate + ent_slack + 1e-12),
            Inequality("chain_upper_kl_form", dcs + LOG2_E_PLUS_1,
                       kl + math.log2(kl + 1.0) + LOG2_E_PLUS_1 + 1.0, quad + 1e-12),
            Inequality("runtime_ge_exp2_dinf", 2.0**dinf, mean_total, 1e-9),
            Inequality("dcs_le_dacs", dcs, dacs,
                       dcs_rep.abs_error_estimate + dacs_rep.abs_error_estimate + 1e-12),
            Inequality("entropy_le_dacs_plus_1", ent, dacs + 1.0,
                       dacs_rep.abs_error_estimate + ent_slack + 1e-6),
        ]
        return PairBoundReport(entry.name, spec_descriptor(spec), quantities, ineqs)
    except CrsToolkitError as exc:
        return PairBoundReport(entry.name, spec_descriptor(spec), {}, [], error=str(exc))


def default_suite() -> list[SuiteEntry]:
    """Verification pairs spanning all four families, all with finite D_inf.

    The d = 2 gaussian runs its recursion to 1e-6 survival: its survival
    mass decays quadratically, so 1e-9 would cost hundreds of thousands of
    extra steps for tail bounds far below the chain slack anyway.
    """
    eight_q = (0.30, 0.20, 0.15, 0.10, 0.10, 0.05, 0.05, 0.05)
    eight_p = (0.125,) * 8
    return [
        SuiteEntry("laplace_identity", LaplaceSpec(1.0)),
        SuiteEntry("laplace_b075", LaplaceSpec(0.75)),
        SuiteEntry("laplace_b05", LaplaceSpec(0.5)),
        SuiteEntry("laplace_b025", LaplaceSpec(0.25)),
        SuiteEntry("gaussian_mu1_s05_d1", GaussianSpec(1.0, 0.5, 1)),
        SuiteEntry("gaussian_mu0_s06_d1", GaussianSpec(0.0, 0.6, 1)),
        SuiteEntry("gaussian_mu1_s05_d2", GaussianSpec(1.0, 0.5, 2), eps_stop=1e-6),
        SuiteEntry("discrete_half_pair", discrete_spec((0.5, 0.5, 0.0, 0.0), (0.25,) * 4)),
        SuiteEntry("discrete_eight", discrete_spec(eight_q, eight_p)),
        SuiteEntry("discrete_point_mass", discrete_spec((1.0, 0.0, 0.0, 0.0), (0.25,) * 4)),
        SuiteEntry("equality_width_c2", SyntheticSpec(equality_case_width(2.0))),
        SuiteEntry("equality_width_c4", SyntheticSpec(equality_case_width(4.0))),
        SuiteEntry("two_level_eps03", SyntheticSpec(two_level_width(0.3))),
        SuiteEntry("two_level_eps01", SyntheticSpec(two_level_width(0.1))),
    ]


def bound_suite(entries: Sequence[SuiteEntry] | None = None) -> BoundSuiteReport:
    """Verify the full bound chain on every pair; failures are per-pair."""
    if entries is None:
        entries = default_suite()
    return BoundSuiteReport(_map_ordered(_verify_pair, list(entries)))


def parse_spec_json(obj: dict) -> PairSpec:
    """Pair spec from its JSON descriptor (the verify file format)."""
    fam = obj.get("family")
    if fam == "laplace":
        return LaplaceSpec(float(obj["b"]))
    if fam == "gaussian":
        return GaussianSpec(float(obj["mu"]), float(obj["sigma"]), int(obj["d"]))
    if fam == "discrete":
        return discrete_spec(obj["q"], obj["p"])
    if fam == "synthetic":
        kind = obj.get("width")
        if kind == "equality":
            return SyntheticSpec(equality_case_width(float(obj["c"])))
        if kind == "two_level":
            return SyntheticSpec(two_level_width(float(obj["eps"])))
        if kind == "table":
            rows = read_width_table(obj["path"])
            return SyntheticSpec(width_from_table(rows))
        raise InvalidParameterError(f"unknown synthetic width descriptor {kind!r}")
    raise InvalidParameterError(f"unknown family {fam!r} in suite file")


def load_suite_file(path: str) -> list[SuiteEntry]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise InvalidParameterError("suite file must be a JSON list of pair specs")
    entries = []
    for i, obj in enumerate(data):
        spec = parse_spec_json(obj)
        eps = float(obj.get("eps_stop", SUITE_EPS_STOP))
        entries.append(SuiteEntry(obj.get("name", f"pair_{i}"), spec, eps))
    return entries


def read_width_table(path: str) -> list[tuple[float, float]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "h,w":
            raise InvalidParameterError("width table must start with the header 'h,w'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            h_str, w_str = line.split(",")
            rows.append((float(h_str), float(w_str)))
    return rows


def rows_to_csv(header: str, rows: Sequence) -> str:
    return "\n".join([header] + [r.csv() for r in rows]) + "\n"


def write_sweep(path: str, header: str, rows: Sequence, sidecar: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(rows_to_csv(header, rows))
    if sidecar is not None:
        meta = {"tool": "crs-toolkit", "version": __version__, **sidecar}
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def sweep_metadata(name: str, seed: int, grid: Sequence, tolerances: dict) -> dict:
    return {"sweep": name, "seed": seed, "grid": list(grid), "tolerances": tolerances}
