"""
Bell-basis measurement simulation and maximum-likelihood inversion.

Counts ``k = (k1, k2, k3, k4)`` from ``n`` repetitions are inverted in closed
form. The multinomial likelihood is maximized by ``p_i = k_i / n``, and on
the validity box ``B~T, theta~, phi~ in [0, pi/2]`` the Bell probabilities can
be inverted uniquely:

    B~T    = atan2(sqrt(k2 + k3 + k4), sqrt(k1))
    theta~ = atan2(sqrt(k3 + k4), sqrt(k2))
    phi~   = atan2(sqrt(k4), sqrt(k3))

(the arccos-of-square-root forms, written without a clamp).

Randomness: every trial draws from its own generator, seeded from
``SeedSequence(master_seed, spawn_key=(trial,))``. Results therefore do not
depend on how trials are spread across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import su2
from .errors import ContractViolation, PreconditionError
from .fisher import ParamModel, cfi, crb
from .schemes import SEQUENTIAL, SchemeConfig, effective_field, feedback_trace
from .su2 import CartesianParams, FieldParams

THREADS_ENV = "QESTLAB_THREADS"
DEFAULT_SEED = 1234
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class MeasurementCounts:
    k: tuple[int, int, int, int]

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if len(k) != 4 or any(v < 0 for v in k):
            raise ContractViolation("counts must be four non-negative integers")
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return sum(self.k)


@dataclass(frozen=True)
class Estimate:
    value: FieldParams
    cartesian: CartesianParams
    identifiable: tuple[bool, bool, bool]
    interval_ok: bool


@dataclass(frozen=True)
class RngSpec:
    master_seed: int = DEFAULT_SEED

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ContractViolation("seed must be an unsigned 64-bit integer")

    def generator(self, *key: int) -> np.random.Generator:
        """Generator for the substream identified by ``key`` (trial index,
        optionally followed by sub-indices such as an adaptive round)."""
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=tuple(int(k) for k in key))
        return np.random.default_rng(ss)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return min(4, os.cpu_count() or 1)
    try:
        w = int(raw)
    except ValueError:
        raise ContractViolation(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if w < 1:
        raise ContractViolation(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return w


def _map_trials(fn, trials: int, workers: int | None):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or trials <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(trials)))


def sample_counts(p, n: int, rng: RngSpec, trial) -> MeasurementCounts:
    """One multinomial draw of ``n`` Bell-basis outcomes.

    ``trial`` is an index or a tuple of indices naming the substream.
    """
    if n < 1:
        raise ContractViolation("need n >= 1 repetitions")
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
        raise ContractViolation("invalid Bell probabilities")
    p = np.clip(p, 0.0, None)
    key = trial if isinstance(trial, tuple) else (trial,)
    k = rng.generator(*key).multinomial(n, p / p.sum())
    return MeasurementCounts(tuple(int(v) for v in k))


def in_validity_box(x: FieldParams, T: float, tol: float = 1e-12) -> bool:
    return (
        0.0 <= x.B * T <= HALF_PI + tol
        and 0.0 <= x.theta <= HALF_PI + tol
        and 0.0 <= x.phi <= HALF_PI + tol
    )


def mle_from_frequencies(f, T: float) -> Estimate:
    """Invert outcome frequencies (or raw counts; only ratios matter)."""
    if T <= 0:
        raise ContractViolation("T must be positive")
    f = np.asarray(f, dtype=float)
    if f.shape != (4,) or np.any(f < 0) or f.sum() <= 0:
        raise ContractViolation("need four non-negative frequencies with positive total")
    r = np.sqrt(f)
    rest = math.sqrt(f[1] + f[2] + f[3])
    side = math.sqrt(f[2] + f[3])
    bt = math.atan2(rest, r[0])
    ident_theta = rest > 0
    ident_phi = side > 0
    theta = math.atan2(side, r[1]) if ident_theta else 0.0
    phi = math.atan2(r[3], r[2]) if ident_phi else 0.0
    value = FieldParams(bt / T, theta, phi)
    return Estimate(
        value=value,
        cartesian=su2.params_to_cartesian(value),
        identifiable=(True, ident_theta, ident_phi),
        interval_ok=in_validity_box(value, T),
    )


def mle_invert(c: MeasurementCounts, T: float) -> Estimate:
    if c.n < 1:
        raise ContractViolation("need at least one count")
    return mle_from_frequencies(c.k, T)


def adaptive_round(control, estimate: Estimate) -> CartesianParams:
    """New point estimate ``x_C + x~``.

    Components of ``x~`` that were not identifiable contribute nothing (they
    carry zero weight in the Cartesian vector by construction).
    """
    c = control.as_array() if isinstance(control, CartesianParams) else np.asarray(control, float)
    return CartesianParams.from_array(c + estimate.cartesian.as_array())


def recover_field(control: FieldParams, shifted: FieldParams, cfg: SchemeConfig,
                  method: str = "exact") -> CartesianParams:
    """Map an estimate of the shifted field back to the true field.

    ``additive`` is the large-N rule ``x = x_C + x~``. ``exact`` undoes the
    composition: ``x~`` is the per-step effective field, so
    ``U(x, t) = U(x_C, t) exp(-i x~.sigma t)``.
    """
    if method == "additive":
        return CartesianParams.from_array(control.vector + shifted.vector)
    if method != "exact":
        raise ContractViolation(f"unknown recovery method {method!r}")
    u = su2.evolve(control, cfg.t) @ su2.evolve(shifted, cfg.t)
    return su2.params_to_cartesian(su2.field_from_unitary(u, cfg.t))


def box_offset(T: float, bt: float = math.pi / 4) -> np.ndarray:
    """Cartesian shift that puts a perfectly controlled parameter at
    ``B~T = bt`` along (1,1,1)/sqrt(3), well inside the validity box."""
    return (bt / T) * np.ones(3) / math.sqrt(3)


@dataclass(frozen=True)
class MonteCarloResult:
    mse_cartesian_mean: float
    stderr: float
    crb_reference: float
    crb_shifted_formula: float
    bias: tuple[float, float, float]
    shifted: FieldParams
    n: int
    trials: int

    @property
    def ratio(self) -> float:
        """Empirical MSE over the Cramer-Rao reference; close to 1 when efficient."""
        if not self.crb_reference > 0 or not math.isfinite(self.crb_reference):
            return math.nan
        return self.mse_cartesian_mean / self.crb_reference


def _mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


def composed_probability_model(control: FieldParams, cfg: SchemeConfig) -> ParamModel:
    """Bell distribution of the composed scheme as a function of the true
    Cartesian field (controls held fixed)."""

    def fn(v):
        c = SchemeConfig(cfg.N, cfg.t, SEQUENTIAL, control)
        x = FieldParams.from_cartesian(v)
        return su2.bell_probabilities(effective_field(x, c), c.T).as_array()

    return ParamModel(fn, su2.CARTESIAN_LABELS, kind="classical")


def monte_carlo_mse(x_true: FieldParams, cfg: SchemeConfig, n: int, trials: int,
                    rng: RngSpec, estimator: str = "exact",
                    workers: int | None = None) -> MonteCarloResult:
    """Repeat (sample counts, invert, recover) and average the summed
    Cartesian squared error against the true field."""
    if cfg.kind != SEQUENTIAL:
        raise ContractViolation("Monte Carlo needs a sequential-feedback configuration")
    if trials < 1 or n < 1:
        raise ContractViolation("need n >= 1 and trials >= 1")
    shifted = effective_field(x_true, cfg)
    T = cfg.T
    if not in_validity_box(shifted, T):
        raise PreconditionError(
            f"shifted field (B~T={shifted.B * T:.4g}, theta~={shifted.theta:.4g}, "
            f"phi~={shifted.phi:.4g}) lies outside the validity box [0, pi/2]^3"
        )
    p = su2.bell_probabilities(shifted, T).as_array()
    truth = x_true.vector

    def one(i):
        est = mle_invert(sample_counts(p, n, rng, i), T)
        xh = recover_field(cfg.control, est.value, cfg, estimator).as_array()
        return xh - truth

    errs = np.array(_map_trials(one, trials, workers))
    sq = [math.fsum(e * e) for e in errs]
    mean, se = _mean_and_stderr(sq)
    bias = tuple(math.fsum(errs[:, j]) / trials for j in range(3))

    info = cfi(composed_probability_model(cfg.control, cfg), truth)
    ref = crb(info, np.eye(3), n)
    shifted_formula = feedback_trace(shifted.B, T) / n
    return MonteCarloResult(mean, se, ref, shifted_formula, bias, shifted, n, trials)


@dataclass(frozen=True)
class ShiftedMonteCarlo:
    mse: float
    stderr: float
    trace_inv_fisher: float
    bias: tuple[float, float, float]
    n: int
    trials: int

    @property
    def efficiency_ratio(self) -> float:
        """``n * MSE / Tr J^-1``."""
        return self.n * self.mse / self.trace_inv_fisher


def monte_carlo_shifted(shifted: FieldParams, T: float, n: int, trials: int,
                        rng: RngSpec, workers: int | None = None) -> ShiftedMonteCarlo:
    """Summed squared error of the MLE in (B, theta, phi) coordinates of the
    shifted parameter itself."""
    if not in_validity_box(shifted, T):
        raise PreconditionError("shifted parameter outside the validity box")
    if trials < 1 or n < 1:
        raise ContractViolation("need n >= 1 and trials >= 1")
    p = su2.bell_probabilities(shifted, T).as_array()
    truth = shifted.as_array()

    def one(i):
        est = mle_invert(sample_counts(p, n, rng, i), T)
        return est.value.as_array() - truth

    errs = np.array(_map_trials(one, trials, workers))
    mean, se = _mean_and_stderr([math.fsum(e * e) for e in errs])
    bias = tuple(math.fsum(errs[:, j]) / trials for j in range(3))
    tr = float(np.trace(su2.qfim_max(shifted, T).pinv()))
    return ShiftedMonteCarlo(mean, se, tr, bias, n, trials)


@dataclass(frozen=True)
class Round:
    N: int
    t: float
    n: int


def adaptive_run(x_true: FieldParams, start: CartesianParams, rounds: Sequence[Round],
                 rng: RngSpec, trial: int, offset_bt: float = math.pi / 4,
                 estimator: str = "exact") -> list[float]:
    """Run successive feedback rounds, each refining the point estimate.

    Every round controls at ``estimate - offset`` so that the shifted
    parameter sits inside the validity box, and the round's counts come from
    substream ``(trial, round)``. Returns the deviation ``|x - x_hat|`` after
    each round.
    """
    est = start.as_array()
    out = []
    for r, rd in enumerate(rounds):
        cfg0 = SchemeConfig(rd.N, rd.t)
        control = FieldParams.from_cartesian(est - box_offset(cfg0.T, offset_bt))
        cfg = SchemeConfig(rd.N, rd.t, SEQUENTIAL, control)
        shifted = effective_field(x_true, cfg)
        if not in_validity_box(shifted, cfg.T):
            raise PreconditionError(f"round {r}: shifted parameter left the validity box")
        p = su2.bell_probabilities(shifted, cfg.T).as_array()
        counts = sample_counts(p, rd.n, rng, (trial, r))
        shifted_hat = mle_invert(counts, cfg.T)
        est = recover_field(control, shifted_hat.value, cfg, estimator).as_array()
        out.append(float(np.linalg.norm(x_true.vector - est)))
    return out
