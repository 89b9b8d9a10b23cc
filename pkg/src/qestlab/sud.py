"""
SU(d) Hamiltonian estimation with a maximally entangled probe.

Generators ``F_j`` are the generalized Gell-Mann matrices rescaled to
``Tr(F_j F_k) = delta_jk``. Ordering (fixed so parameter indices are
reproducible): symmetric off-diagonal pairs ``(j, k)``, ``j < k``, in
lexicographic order; then the antisymmetric pairs in the same order; then the
``d - 1`` diagonal generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .errors import ContractViolation
from .fisher import FisherMatrix, ParamModel, qfim_pure

MAX_DIM = 8


def _check_dim(d: int) -> int:
    if int(d) != d or not 2 <= d <= MAX_DIM:
        raise ContractViolation(f"dimension must be an integer in [2, {MAX_DIM}], got {d}")
    return int(d)


@dataclass(frozen=True)
class GeneratorBasis:
    d: int
    generators: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.generators)

    def combine(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.tensordot(x, np.array(self.generators), axes=1)

    def coefficients(self, h) -> np.ndarray:
        """``Tr(H F_j)`` for each generator."""
        return np.array([np.trace(h @ f).real for f in self.generators])


@lru_cache(maxsize=None)
def build_generators(d: int) -> GeneratorBasis:
    d = _check_dim(d)
    sym, anti, diag = [], [], []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=np.complex128)
            s[j, k] = s[k, j] = 1 / math.sqrt(2)
            a = np.zeros((d, d), dtype=np.complex128)
            a[j, k] = -1j / math.sqrt(2)
            a[k, j] = 1j / math.sqrt(2)
            sym.append(s)
            anti.append(a)
    for l in range(1, d):
        entries = [1.0] * l + [-float(l)] + [0.0] * (d - l - 1)
        diag.append(np.diag(entries).astype(np.complex128) / math.sqrt(l * (l + 1)))
    gens = tuple(sym + anti + diag)
    for g in gens:
        g.setflags(write=False)
    return GeneratorBasis(d, gens)


@dataclass(frozen=True)
class SudParams:
    d: int
    x: np.ndarray

    def __post_init__(self):
        d = _check_dim(self.d)
        x = np.array(self.x, dtype=float)
        if x.shape != (d * d - 1,):
            raise ContractViolation(f"SU({d}) needs {d * d - 1} parameters, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x", x)


def max_entangled_state(d: int) -> np.ndarray:
    if d < 2:
        raise ContractViolation("dimension must be >= 2")
    v = np.zeros(d * d, dtype=np.complex128)
    v[:: d + 1] = 1 / math.sqrt(d)
    return v


def reduced_state(psi, d: int) -> np.ndarray:
    """Partial trace over the ancilla (second factor)."""
    m = np.asarray(psi).reshape(d, d)
    return m @ m.conj().T


def _system_unitary(d: int, x, T: float) -> np.ndarray:
    # exp(+i sum_j x_j F_j T)
    h = build_generators(d).combine(x)
    return linalg.expm_hermitian(-h, T)


def sud_evolve(p: SudParams, T: float) -> np.ndarray:
    """``exp(+i sum_j x_j F_j T)`` on the system, identity on the ancilla."""
    if T < 0:
        raise ContractViolation("evolution time must be non-negative")
    return np.kron(_system_unitary(p.d, p.x, T), np.eye(p.d))


def output_state(p: SudParams, T: float) -> np.ndarray:
    u = _system_unitary(p.d, p.x, T)
    return np.kron(u, np.eye(p.d)) @ max_entangled_state(p.d)


def qfim_at_origin(d: int, T: float) -> FisherMatrix:
    d = _check_dim(d)
    n = d * d - 1
    return FisherMatrix(_labels(d), (4 * T * T / d) * np.eye(n))


def _labels(d: int) -> tuple[str, ...]:
    return tuple(f"x{j + 1}" for j in range(d * d - 1))


def state_model(d: int, T: float) -> ParamModel:
    d = _check_dim(d)
    probe = max_entangled_state(d)
    eye = np.eye(d)

    def fn(x):
        return np.kron(_system_unitary(d, x, T), eye) @ probe

    return ParamModel(fn, _labels(d), kind="quantum")


def numerical_qfim_at_origin(d: int, T: float) -> FisherMatrix:
    d = _check_dim(d)
    return qfim_pure(state_model(d, T), np.zeros(d * d - 1))


@lru_cache(maxsize=None)
def _measurement_basis(d: int) -> np.ndarray:
    phi = max_entangled_state(d)
    rows = [phi]
    eye = np.eye(d)
    for f in build_generators(d).generators:
        rows.append(math.sqrt(d) * (np.kron(f, eye) @ phi))
    b = np.array(rows)
    b.setflags(write=False)
    return b


def optimal_measurement_basis(d: int) -> np.ndarray:
    """Rows: the probe itself, then ``sqrt(d) (F_i x I)|phi>`` for each generator."""
    return _measurement_basis(_check_dim(d))


def sud_probabilities_near_origin(p: SudParams, T: float) -> np.ndarray:
    """Exact Born-rule probabilities in the optimal basis (probe outcome first).

    Close to the origin these approach ``x_i^2 T^2 / d``.
    """
    psi = output_state(p, T)
    amps = optimal_measurement_basis(p.d).conj() @ psi
    return np.abs(amps) ** 2


def asymptotic_probabilities(p: SudParams, T: float) -> np.ndarray:
    rest = p.x**2 * T * T / p.d
    return np.concatenate([[1.0 - rest.sum()], rest])


def probability_model(d: int, T: float, step: float = 1e-7) -> ParamModel:
    d = _check_dim(d)

    def fn(x):
        return sud_probabilities_near_origin(SudParams(d, x), T)

    return ParamModel(fn, _labels(d), kind="classical", steps=[step] * (d * d - 1))


@dataclass(frozen=True)
class SchemeSums:
    d: int
    N: int
    t: float
    sequential: float
    parallel: float
    independent_order: float
    # the independent scheme is only known up to an unspecified constant
    independent_is_proportional: bool = True

    @property
    def ratio(self) -> float:
        return self.parallel / self.sequential


def scheme_variance_sums(d: int, N: int, t: float) -> SchemeSums:
    """Summed parameter variances for the three SU(d) schemes."""
    if d < 2:
        raise ContractViolation("dimension must be >= 2")
    if N < 1 or t <= 0:
        raise ContractViolation("need N >= 1 and t > 0")
    g = d * d - 1
    seq = d * g / (4 * N * N * t * t)
    par = d * (d + 1) * g / (4 * N * (N + d) * t * t)
    ind = g**3 / (N * N * t * t)
    return SchemeSums(d, N, t, seq, par, ind)


def improvement_ratio(d: int, N: int) -> float:
    """Parallel over sequential summed variance, ``(d+1) N / (N+d)``."""
    return (d + 1) * N / (N + d)
