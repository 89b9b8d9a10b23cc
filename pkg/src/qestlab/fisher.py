"""
Quantum and classical Fisher information.

Models are wrapped in :class:`ParamModel`: a callable from a real parameter
vector to either a normalized state vector (``kind="quantum"``) or a
probability vector (``kind="classical"``). Derivatives are central finite
differences, checked against a half-step evaluation.

Model callables must be re-entrant; grids of points may be evaluated from
several threads at once.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation

DEFAULT_STEP = 1e-6
RICHARDSON_RTOL = 1e-4
PINV_CUTOFF = 1e-10
PROB_FLOOR = 1e-12
# |dp| below this at a p<=PROB_FLOOR outcome counts as a structural zero
DERIV_FLOOR = 1e-6


class FiniteDifferenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FisherMatrix:
    labels: tuple[str, ...]
    m: np.ndarray
    singular: bool = False

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        n = len(self.labels)
        if m.shape != (n, n):
            raise ContractViolation(f"Fisher matrix shape {m.shape} does not match {n} labels")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * scale:
            raise ContractViolation("Fisher matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "singular", bool(self.singular) or is_rank_deficient(m))

    def __getitem__(self, key):
        return self.m[key]

    def entry(self, a: str, b: str) -> float:
        return float(self.m[self.labels.index(a), self.labels.index(b)])

    def pinv(self) -> np.ndarray:
        return pseudo_inverse(self.m)

    def scaled(self, factor: float) -> "FisherMatrix":
        return FisherMatrix(self.labels, factor * self.m, self.singular)


def is_rank_deficient(m: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(np.asarray(m, dtype=float))
    top = float(np.max(np.abs(w), initial=0.0))
    if top == 0.0:
        return True
    return bool(np.min(w) < PINV_CUTOFF * top)


def _split_spectrum(m: np.ndarray):
    w, v = np.linalg.eigh(np.asarray(m, dtype=float))
    top = float(np.max(np.abs(w), initial=0.0))
    keep = w > PINV_CUTOFF * top if top > 0 else np.zeros_like(w, dtype=bool)
    return w, v, keep


def pseudo_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse on the numerically nonsingular eigenspace (cutoff 1e-10 * max)."""
    w, v, keep = _split_spectrum(m)
    vr = v[:, keep]
    return (vr / w[keep]) @ vr.T


@dataclass(frozen=True)
class ParamModel:
    """Differentiable map from parameters to a state or a distribution."""

    fn: Callable[[np.ndarray], np.ndarray]
    labels: Sequence[str]
    kind: str = "quantum"
    steps: Sequence[float] | None = None
    norm_tol: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("quantum", "classical"):
            raise ContractViolation(f"unknown model kind {self.kind!r}")

    def step(self, j: int) -> float:
        return DEFAULT_STEP if self.steps is None else float(self.steps[j])

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(x, dtype=float)))
        if self.kind == "quantum":
            out = out.astype(np.complex128)
            if abs(np.linalg.norm(out) - 1.0) > self.norm_tol:
                raise ContractViolation("model state is not normalized")
        else:
            out = out.astype(float)
            if abs(out.sum() - 1.0) > self.norm_tol or np.any(out < -self.norm_tol):
                raise ContractViolation("model probabilities are not normalized")
        return out


def _aligned(ref: np.ndarray, psi: np.ndarray) -> np.ndarray:
    ov = np.vdot(ref, psi)
    if abs(ov) == 0.0:
        return psi
    return psi * (abs(ov) / ov)


def _central(model: ParamModel, x: np.ndarray, j: int, h: float, ref) -> np.ndarray:
    xp = x.copy()
    xm = x.copy()
    xp[j] += h
    xm[j] -= h
    fp = model(xp)
    fm = model(xm)
    if model.kind == "quantum":
        fp = _aligned(ref, fp)
        fm = _aligned(ref, fm)
    return (fp - fm) / (2 * h)


def derivatives(model: ParamModel, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Value at ``x`` and its partial derivatives.

    Each derivative is computed at step ``h`` and ``h/2``; if the two disagree
    by more than 1e-4 (relative) a :class:`FiniteDifferenceWarning` is issued
    and the Richardson combination of the two is returned instead.
    """
    x = np.asarray(x, dtype=float).copy()
    if x.shape != (len(model.labels),):
        raise ContractViolation("parameter vector does not match model labels")
    f0 = model(x)
    out = []
    for j in range(len(x)):
        h = model.step(j)
        d1 = _central(model, x, j, h, f0)
        d2 = _central(model, x, j, h / 2, f0)
        # absolute floor at the output's own scale keeps round-off on near-zero derivatives quiet
        scale = max(np.linalg.norm(d2), np.linalg.norm(f0))
        if np.linalg.norm(d1 - d2) > RICHARDSON_RTOL * scale:
            warnings.warn(
                f"finite differences for {model.labels[j]!r} disagree between h and h/2",
                FiniteDifferenceWarning,
                stacklevel=2,
            )
            out.append((4 * d2 - d1) / 3)
        else:
            out.append(d1)
    return f0, out


def sld_vectors(model: ParamModel, x) -> np.ndarray:
    """Rows ``|l_j> = 2(|d_j psi> + <d_j psi|psi> |psi>)``."""
    if model.kind != "quantum":
        raise ContractViolation("SLD vectors need a quantum model")
    psi, dpsi = derivatives(model, x)
    return np.array([2 * (d + np.vdot(d, psi) * psi) for d in dpsi])


def _overlaps(model: ParamModel, x) -> np.ndarray:
    ls = sld_vectors(model, x)
    return ls.conj() @ ls.T


def qfim_pure(model: ParamModel, x) -> FisherMatrix:
    """Pure-state QFIM, ``J_kj = Re <l_k|l_j>``."""
    g = _overlaps(model, x)
    return FisherMatrix(tuple(model.labels), g.real)


def sld_compatibility(model: ParamModel, x) -> np.ndarray:
    """Antisymmetric matrix ``Im <l_k|l_j>``; all zeros means the quantum
    Cramer-Rao bound is attainable for this model at ``x``."""
    g = _overlaps(model, x)
    im = g.imag
    return 0.5 * (im - im.T)


def cfi(model: ParamModel, x) -> FisherMatrix:
    """Classical Fisher information ``sum_y d_i p_y d_j p_y / p_y``.

    Outcomes with ``p <= 1e-12`` are dropped when their derivatives vanish;
    a vanishing outcome with a nonvanishing derivative marks the result
    singular (the information diverges there).
    """
    if model.kind != "classical":
        raise ContractViolation("cfi needs a classical model")
    p, dp = derivatives(model, x)
    dp = np.array(dp)  # (params, outcomes)
    keep = p > PROB_FLOOR
    divergent = bool(np.any(np.abs(dp[:, ~keep]) > DERIV_FLOOR))
    g = dp[:, keep]
    m = (g / p[keep]) @ g.T
    return FisherMatrix(tuple(model.labels), m, singular=divergent)


def crb(J: FisherMatrix | np.ndarray, G, n: int = 1) -> float:
    """Weighted Cramer-Rao bound ``Tr(J^+ G) / n``.

    Returns ``inf`` when ``G`` puts weight on the null space of ``J``.
    """
    m = J.m if isinstance(J, FisherMatrix) else np.asarray(J, dtype=float)
    G = np.asarray(G, dtype=float)
    if G.shape != m.shape:
        raise ContractViolation(f"weight shape {G.shape} does not match Fisher shape {m.shape}")
    if n < 1:
        raise ContractViolation("repetition count must be >= 1")
    w, v, keep = _split_spectrum(m)
    null = v[:, ~keep]
    if null.size:
        leak = float(np.trace(null.T @ G @ null))
        if leak > 1e-12 * max(1.0, float(np.trace(G))):
            return float("inf")
    vr = v[:, keep]
    return float(np.trace((vr / w[keep]) @ vr.T @ G)) / n


def transform(J: FisherMatrix, jac: np.ndarray, labels: Sequence[str]) -> FisherMatrix:
    """Fisher matrix in new coordinates ``y`` given ``jac = d(old)/d(y)``."""
    jac = np.asarray(jac, dtype=float)
    return FisherMatrix(tuple(labels), jac.T @ J.m @ jac, J.singular)
