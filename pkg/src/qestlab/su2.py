"""
Spin-1/2 in a magnetic field.

``H(B, theta, phi) = B * n(theta, phi) . sigma`` with ``hbar = 1``, so ``B`` has
units of inverse time. The probe is the Bell state ``(|00> + |11>)/sqrt(2)``
on system (first factor) and ancilla (second factor); measurements are in the
Bell basis::

    phi1 = (|00> + |11>)/sqrt2    phi2 = (|00> - |11>)/sqrt2
    phi3 = (|10> + |01>)/sqrt2    phi4 = (|10> - |01>)/sqrt2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import ContractViolation
from .fisher import FisherMatrix, ParamModel

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)
I2 = np.eye(2, dtype=np.complex128)

FIELD_LABELS = ("B", "theta", "phi")
CARTESIAN_LABELS = ("x1", "x2", "x3")

# sin(BT) or sin(theta) below this counts as a structural zero
DEGENERACY_TOL = 1e-12

BELL_BASIS = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, -1, 1, 0],
    ],
    dtype=np.complex128,
) / math.sqrt(2)

BELL_PROBE = BELL_BASIS[0].copy()


def unit_vector(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


@dataclass(frozen=True)
class FieldParams:
    """Field magnitude and direction. Normalized on construction so that
    ``B >= 0``, ``theta`` in ``[0, pi]`` and ``phi`` in ``[0, 2pi)``; the
    physical field vector is unchanged by the normalization."""

    B: float
    theta: float
    phi: float

    def __post_init__(self):
        B, theta, phi = float(self.B), float(self.theta), float(self.phi)
        if not all(map(math.isfinite, (B, theta, phi))):
            raise ContractViolation("field parameters must be finite")
        if B < 0:
            B, theta, phi = -B, math.pi - theta, phi + math.pi
        theta = math.fmod(theta, 2 * math.pi)
        if theta < 0:
            theta += 2 * math.pi
        if theta > math.pi:
            theta, phi = 2 * math.pi - theta, phi + math.pi
        phi = math.fmod(phi, 2 * math.pi)
        if phi < 0:
            phi += 2 * math.pi
        if phi >= 2 * math.pi:
            phi = 0.0
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    def as_array(self) -> np.ndarray:
        return np.array([self.B, self.theta, self.phi])

    @property
    def vector(self) -> np.ndarray:
        return self.B * unit_vector(self.theta, self.phi)

    @property
    def identifiable(self) -> tuple[bool, bool, bool]:
        """Whether (B, theta, phi) are locally identifiable from the field.

        At ``B = 0`` the direction is undefined; at ``sin(theta) = 0`` the
        azimuth is lost.
        """
        has_dir = self.B > 0
        return (True, has_dir, has_dir and abs(math.sin(self.theta)) > DEGENERACY_TOL)

    @classmethod
    def from_cartesian(cls, c) -> "FieldParams":
        v = c.as_array() if isinstance(c, CartesianParams) else np.asarray(c, dtype=float)
        B = float(np.linalg.norm(v))
        if B == 0.0:
            return cls(0.0, 0.0, 0.0)
        # atan2 keeps full precision near the poles, where acos does not
        theta = math.atan2(math.hypot(v[0], v[1]), v[2])
        phi = math.atan2(v[1], v[0])
        return cls(B, theta, phi)


@dataclass(frozen=True)
class CartesianParams:
    x1: float
    x2: float
    x3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=float)

    @classmethod
    def from_array(cls, v) -> "CartesianParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class AxisAngle:
    a: float
    k: np.ndarray

    def unitary(self) -> np.ndarray:
        """``exp(1j * a * k.sigma)``."""
        ks = np.einsum("i,ijk->jk", self.k, SIGMA)
        return math.cos(self.a) * I2 + 1j * math.sin(self.a) * ks


class BellProbabilities(NamedTuple):
    p1: float
    p2: float
    p3: float
    p4: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def _field(x) -> FieldParams:
    if isinstance(x, FieldParams):
        return x
    return FieldParams(*x)


def pauli_dot(v) -> np.ndarray:
    return np.einsum("i,ijk->jk", np.asarray(v, dtype=float), SIGMA)


def hamiltonian(x: FieldParams) -> np.ndarray:
    return pauli_dot(_field(x).vector)


def _evolve_vec(v: np.ndarray, T: float) -> np.ndarray:
    # exp(-i T v.sigma) = cos(|v|T) I - i sin(|v|T) (v/|v|).sigma
    b = float(np.linalg.norm(v))
    if b == 0.0:
        return I2.copy()
    return math.cos(b * T) * I2 - 1j * math.sin(b * T) * pauli_dot(v / b)


def evolve(x: FieldParams, T: float) -> np.ndarray:
    """Closed-form ``exp(-i H(x) T)``."""
    if T < 0:
        raise ContractViolation("evolution time must be non-negative")
    return _evolve_vec(_field(x).vector, T)


def evolve_cartesian(v, t: float) -> np.ndarray:
    return _evolve_vec(np.asarray(v, dtype=float), t)


def bell_output_state(x: FieldParams, T: float) -> np.ndarray:
    return np.kron(evolve(x, T), I2) @ BELL_PROBE


def bell_amplitudes(x: FieldParams, T: float) -> np.ndarray:
    """Amplitudes ``<phi_k|psi>`` of the output state on the Bell basis."""
    return BELL_BASIS.conj() @ bell_output_state(x, T)


def bell_probabilities(x: FieldParams, T: float) -> BellProbabilities:
    x = _field(x)
    if T < 0:
        raise ContractViolation("evolution time must be non-negative")
    s2 = math.sin(x.B * T) ** 2
    c2 = math.cos(x.B * T) ** 2
    st2 = math.sin(x.theta) ** 2
    return BellProbabilities(
        c2,
        s2 * math.cos(x.theta) ** 2,
        s2 * st2 * math.cos(x.phi) ** 2,
        s2 * st2 * math.sin(x.phi) ** 2,
    )


def qfim_max(x: FieldParams, T: float) -> FisherMatrix:
    """Maximal QFIM ``4 diag(T^2, sin^2(BT), sin^2(BT) sin^2(theta))``."""
    x = _field(x)
    s2 = math.sin(x.B * T) ** 2
    m = 4 * np.diag([T * T, s2, s2 * math.sin(x.theta) ** 2])
    singular = s2 < DEGENERACY_TOL**2 or math.sin(x.theta) ** 2 < DEGENERACY_TOL**2
    return FisherMatrix(FIELD_LABELS, m, singular=singular)


def axis_angle(U) -> AxisAngle:
    """Write a 2x2 unitary as ``exp(i*phase) * exp(1j * a * k.sigma)``.

    The global phase is removed by dividing by the principal square root of
    the determinant; ``a`` lies in ``[0, pi]`` and ``k`` defaults to
    ``(0, 0, 1)`` when the rotation is trivial.
    """
    U = linalg.as_matrix(U)
    if U.shape != (2, 2):
        raise ContractViolation("axis_angle needs a 2x2 unitary")
    linalg.require_unitary(U)
    V = U / np.sqrt(np.linalg.det(U))
    c = 0.5 * np.trace(V).real
    # V = cos(a) I + i sin(a) k.sigma, so Tr(V sigma_j) = 2i sin(a) k_j
    s_k = np.array([(np.trace(V @ s) / 2j).real for s in SIGMA])
    s = float(np.linalg.norm(s_k))
    if s < 1e-15:
        # trivial rotation: snap so that a composed identity reads exactly a = 0
        return AxisAngle(0.0 if c > 0 else math.pi, np.array([0.0, 0.0, 1.0]))
    a = math.atan2(s, c)
    return AxisAngle(a, s_k / s)


def field_from_unitary(U, T: float) -> FieldParams:
    """The field ``x`` with ``exp(-i H(x) T) = U`` up to global phase,
    taking ``|x| T`` in ``[0, pi]``."""
    if T <= 0:
        raise ContractViolation("need T > 0 to read a field off a unitary")
    aa = axis_angle(U)
    return FieldParams.from_cartesian(-aa.k * aa.a / T)


def cos_a_formula(x: FieldParams, dx, T: float) -> float:
    """``cos a`` of ``U^dag(x,T) U(x+dx,T)`` in closed form."""
    x = _field(x)
    x2 = x.as_array() + np.asarray(dx, dtype=float)
    n1 = unit_vector(x.theta, x.phi)
    n2 = unit_vector(x2[1], x2[2])
    return math.cos(x.B * T) * math.cos(x2[0] * T) + float(n1 @ n2) * math.sin(x.B * T) * math.sin(
        x2[0] * T
    )


def params_to_cartesian(x: FieldParams) -> CartesianParams:
    return CartesianParams.from_array(_field(x).vector)


class Jacobian(NamedTuple):
    matrix: np.ndarray
    singular: bool


def jacobian(x: FieldParams) -> Jacobian:
    """``d(x1, x2, x3) / d(B, theta, phi)``; rows are Cartesian components."""
    x = _field(x)
    B, th, ph = x.B, x.theta, x.phi
    st, ct, sp, cp = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
    m = np.array(
        [
            [st * cp, B * ct * cp, -B * st * sp],
            [st * sp, B * ct * sp, B * st * cp],
            [ct, -B * st, 0.0],
        ]
    )
    return Jacobian(m, B == 0.0 or abs(st) < DEGENERACY_TOL)


def cartesian_weight(x: FieldParams) -> np.ndarray:
    """``Jac^T Jac = diag(1, B^2, B^2 sin^2 theta)``: the weight that turns a
    (B, theta, phi) covariance into the summed Cartesian squared error."""
    x = _field(x)
    return np.diag([1.0, x.B**2, (x.B * math.sin(x.theta)) ** 2])


def cartesian_mse(cov, x: FieldParams) -> float:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (3, 3):
        raise ContractViolation("covariance must be 3x3")
    if np.max(np.abs(cov - cov.T)) > 1e-10 * max(1.0, np.max(np.abs(cov))):
        raise ContractViolation("covariance is not symmetric")
    if np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() < -1e-10:
        raise ContractViolation("covariance is not positive semidefinite")
    w = np.diag(cartesian_weight(x))
    return float(w @ np.diag(cov))


def state_model(T: float) -> ParamModel:
    """Bell-probe output state as a function of (B, theta, phi)."""

    def fn(v):
        return np.kron(_evolve_vec(v[0] * unit_vector(v[1], v[2]), T), I2) @ BELL_PROBE

    return ParamModel(fn, FIELD_LABELS, kind="quantum")


def probability_model(T: float) -> ParamModel:
    """Bell-basis outcome distribution as a function of (B, theta, phi)."""

    def fn(v):
        return bell_probabilities(FieldParams(*v), T).as_array()

    return ParamModel(fn, FIELD_LABELS, kind="classical")


def cartesian_probability_model(T: float) -> ParamModel:
    def fn(v):
        return bell_probabilities(FieldParams.from_cartesian(v), T).as_array()

    return ParamModel(fn, CARTESIAN_LABELS, kind="classical")
