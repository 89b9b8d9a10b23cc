"""
Sequential-feedback and parallel schemes for the magnetic-field model.

In the sequential scheme the field acts ``N`` times for ``t`` each, with a
control ``U^dag(x_C, t)`` after every use; to first order this shifts the
parameter being estimated from ``x`` to ``x - x_C``. The parallel scheme is
represented only by its known optimal covariance bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect, brentq

from . import linalg, su2
from .errors import ContractViolation
from .fisher import FisherMatrix
from .su2 import FieldParams

SEQUENTIAL = "sequential-feedback"
PARALLEL = "parallel-bound"
INDEPENDENT = "independent-bound"
KINDS = (SEQUENTIAL, PARALLEL, INDEPENDENT)


@dataclass(frozen=True)
class SchemeConfig:
    N: int
    t: float
    kind: str = SEQUENTIAL
    control: FieldParams | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ContractViolation("N must be a positive integer")
        if not self.t > 0:
            raise ContractViolation("t must be positive")
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown scheme kind {self.kind!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "t", float(self.t))
        if self.control is None and self.kind == SEQUENTIAL:
            object.__setattr__(self, "control", FieldParams(0.0, 0.0, 0.0))

    @property
    def T(self) -> float:
        return self.N * self.t


def _require_sequential(cfg: SchemeConfig) -> None:
    if cfg.kind != SEQUENTIAL:
        raise ContractViolation("operation needs a sequential-feedback configuration")


def step_unitary(x_true: FieldParams, cfg: SchemeConfig) -> np.ndarray:
    """One free evolution followed by its control, ``U^dag(x_C,t) U(x,t)``."""
    _require_sequential(cfg)
    return su2.evolve(cfg.control, cfg.t).conj().T @ su2.evolve(x_true, cfg.t)


def system_unitary(x_true: FieldParams, cfg: SchemeConfig) -> np.ndarray:
    v = step_unitary(x_true, cfg)
    w = np.eye(2, dtype=np.complex128)
    # explicit N-fold product, no matrix-power shortcut
    for _ in range(cfg.N):
        w = v @ w
    return w


def sequential_unitary(x_true: FieldParams, cfg: SchemeConfig) -> np.ndarray:
    """Composed system+ancilla unitary of the sequential-feedback scheme."""
    return np.kron(system_unitary(x_true, cfg), su2.I2)


def compose_feedback(x: FieldParams, t: float, controls) -> np.ndarray:
    """``U_N U_A(x,t) ... U_1 U_A(x,t)`` for arbitrary 4x4 controls."""
    ua = np.kron(su2.evolve(x, t), su2.I2)
    w = np.eye(4, dtype=np.complex128)
    for c in controls:
        w = c @ ua @ w
    return w


def effective_field(x_true: FieldParams, cfg: SchemeConfig) -> FieldParams:
    """Field ``x~`` with ``exp(-i H(x~) T)`` equal to the composed system unitary.

    Exact for every ``N``: the composition is a power of one step, so ``x~``
    is also the per-step effective field. A composed identity gives ``B~ = 0``
    with both angles non-identifiable.
    """
    return su2.field_from_unitary(system_unitary(x_true, cfg), cfg.T)


def effective_field_first_order(x_true: FieldParams, control: FieldParams) -> FieldParams:
    """Large-``N`` limit of :func:`effective_field`: the plain Cartesian difference."""
    return FieldParams.from_cartesian(x_true.vector - control.vector)


def qfim_sequential(x: FieldParams, N: int, t: float) -> FisherMatrix:
    """``N^2`` times the single-use maximal QFIM at ``x``.

    This is the QFIM with respect to ``x`` when the controls undo the
    evolution at ``x`` exactly.
    """
    if N < 1:
        raise ContractViolation("N must be >= 1")
    j1 = su2.qfim_max(x, t)
    return FisherMatrix(j1.labels, N * N * j1.m, j1.singular)


def _b2_over_sin2(B: float, t: float) -> float:
    if B == 0.0:
        return 1.0 / (t * t)
    s = math.sin(B * t)
    if abs(s) < 1e-12:
        return math.inf
    return B * B / (s * s)


def _bracket(B: float, t: float) -> float:
    if t <= 0:
        raise ContractViolation("t must be positive")
    return 1.0 / (t * t) + 2.0 * _b2_over_sin2(B, t)


def mse_sequential(B: float, N: int, t: float) -> float:
    """Summed Cartesian variance under optimal feedback; ``inf`` when ``Bt``
    is a nonzero multiple of pi."""
    return _bracket(B, t) / (4 * N * N)


def mse_parallel(B: float, N: int, t: float) -> float:
    return 3 * _bracket(B, t) / (4 * N * (N + 2))


class SchemeComparison(NamedTuple):
    B: float
    N: int
    t: float
    mse_sequential: float
    mse_parallel: float
    ratio: float


def compare(B: float, N: int, t: float) -> SchemeComparison:
    s = mse_sequential(B, N, t)
    p = mse_parallel(B, N, t)
    ratio = p / s if math.isfinite(s) else math.nan
    return SchemeComparison(B, N, t, s, p, ratio)


def improvement_ratio(N: int) -> float:
    return 3 * N / (N + 2)


class Subadditivity(NamedTuple):
    lhs: float
    rhs: float
    in_regime: bool
    holds: bool | None


def subadditivity_check(U1, U2, tol: float = 1e-9) -> Subadditivity:
    """Check ``C(U1 U2) <= C(U1) + C(U2)``, which is only claimed when the
    right side is at most pi/2."""
    lhs = linalg.angle_spread(np.asarray(U1) @ np.asarray(U2))
    rhs = linalg.angle_spread(U1) + linalg.angle_spread(U2)
    in_regime = rhs <= math.pi / 2
    return Subadditivity(lhs, rhs, in_regime, (lhs <= rhs + tol) if in_regime else None)


FINITE = "finite"
ASYMPTOTIC = "asymptotic"


def parallel_trace_at_origin(N: int, t: float, reference: str = FINITE) -> float:
    """``Tr J_paral^-1(0)`` in Cartesian coordinates.

    ``finite`` uses ``9 / (4 N (N+2) t^2)``; ``asymptotic`` its large-N form
    ``9 / (4 T^2)``, which is what the closed-form threshold
    ``u / sin(u) = 2`` assumes.
    """
    if reference == FINITE:
        return 9 / (4 * N * (N + 2) * t * t)
    if reference == ASYMPTOTIC:
        return 9 / (4 * (N * t) ** 2)
    raise ContractViolation(f"unknown parallel reference {reference!r}")


def feedback_trace(deviation: float, T: float) -> float:
    """``Tr J_FA^-1`` at shifted field magnitude ``deviation`` (Cartesian)."""
    return 0.25 * (1 / (T * T) + 2 * _b2_over_sin2(deviation, T))


def gain_ratio(deviation: float, T: float, N: int, reference: str = FINITE) -> float:
    """Parallel-over-feedback ratio of inverse-QFIM traces; > 1 favours feedback.

    Returns 0 where the feedback information vanishes (``deviation * T`` a
    nonzero multiple of pi).
    """
    if deviation < 0:
        raise ContractViolation("deviation must be non-negative")
    if T <= 0 or N < 1:
        raise ContractViolation("need T > 0 and N >= 1")
    fa = feedback_trace(deviation, T)
    if not math.isfinite(fa):
        return 0.0
    return parallel_trace_at_origin(N, T / N, reference) / fa


def gain_threshold(T: float) -> float:
    """Largest deviation for which feedback beats the large-N parallel bound:
    ``u*/T`` with ``u*/sin(u*) = 2`` on ``(0, pi)``."""
    if T <= 0:
        raise ContractViolation("T must be positive")
    return threshold_angle() / T


def threshold_angle() -> float:
    return bisect(lambda u: u / math.sin(u) - 2.0, 1e-6, math.pi - 1e-6, xtol=1e-13)


def gain_crossing(T: float, N: int, reference: str = FINITE) -> float:
    """Deviation in ``(0, pi/T)`` at which ``gamma = 1``; nan if gamma(0) <= 1."""
    if gain_ratio(0.0, T, N, reference) <= 1.0:
        return math.nan
    hi = (math.pi - 1e-9) / T
    return brentq(lambda b: gain_ratio(b, T, N, reference) - 1.0, 0.0, hi, xtol=1e-14)
