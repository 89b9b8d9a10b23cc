"""
Dense complex linear algebra used throughout qestlab.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The helpers here
add the contract checks (unitarity, hermiticity, normalization) and the
eigen-angle machinery for unitaries: a unitary with eigenvalues
``exp(-1j * E_j)`` has eigen-angles ``E_j`` taken in ``(-pi, pi]``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
# eigenvalues this close to -1 land on the +pi side of the branch cut
_BRANCH_SNAP = 1e-12


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ContractViolation(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation("matrix has non-finite entries")
    return m


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    return float(np.max(np.abs(h - h.conj().T), initial=0.0)) <= tol * scale


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    eye = np.eye(u.shape[0])
    return float(np.max(np.abs(u.conj().T @ u - eye), initial=0.0)) <= tol


def require_unitary(u) -> np.ndarray:
    u = as_matrix(u)
    if not is_unitary(u):
        raise ContractViolation("matrix is not unitary to 1e-10")
    return u


def require_hermitian(h) -> np.ndarray:
    h = as_matrix(h)
    if not is_hermitian(h):
        raise ContractViolation("matrix is not Hermitian to 1e-12")
    return h


def expm_hermitian(h, s: float) -> np.ndarray:
    """Return ``exp(-1j * h * s)`` for Hermitian ``h`` via its eigendecomposition.

    >>> import numpy as np
    >>> np.allclose(expm_hermitian(np.diag([1.0, -1.0]), np.pi), -np.eye(2))
    True
    """
    h = require_hermitian(h)
    s = float(s)
    if not np.isfinite(s):
        raise ContractViolation("evolution time must be finite")
    # symmetrize so eigh sees an exactly Hermitian matrix
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w * s)) @ v.conj().T


def wrap_angle(e):
    """Map angles into ``(-pi, pi]``."""
    e = np.asarray(e, dtype=float)
    w = np.mod(e + np.pi, 2 * np.pi) - np.pi
    return np.where(w <= -np.pi + _BRANCH_SNAP, np.pi, w)


def eigen_angles(u) -> np.ndarray:
    """Eigen-angles of a unitary, sorted in decreasing order.

    An eigenvalue ``exp(-1j*E)`` contributes ``E``; the value ``-pi`` is folded
    onto ``+pi``, so ``-I`` gives ``[pi, pi]``.
    """
    u = require_unitary(u)
    lam = np.linalg.eigvals(u)
    angles = wrap_angle(-np.angle(lam))
    return np.sort(angles)[::-1]


def angle_spread(u) -> float:
    """Half the spread of the eigen-angles, ``(E_max - E_min) / 2``."""
    e = eigen_angles(u)
    return float(0.5 * (e[0] - e[-1]))


class MinFidelity(NamedTuple):
    value: float
    in_regime: bool


def min_fidelity_over_probes(u) -> MinFidelity:
    """Minimum over probe states of ``F(rho, U rho U^dag)``.

    The closed form ``cos C(U)`` only holds when ``E_max - E_min <= pi``;
    outside that regime the value is still returned but ``in_regime`` is False.
    """
    c = angle_spread(u)
    return MinFidelity(float(np.cos(c)), bool(2 * c <= np.pi + 1e-12))


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def _require_normalized(v: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ContractViolation(f"{name} is not normalized to 1e-10")


def pure_fidelity(psi, phi) -> np.ndarray | float:
    """``|<psi|phi>|`` for normalized state vectors.

    Broadcasts over leading axes, so a batch of probes of shape ``(m, d)`` can
    be compared against a single state or against a matching batch.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if psi.shape[-1] != phi.shape[-1]:
        raise ContractViolation("state dimensions differ")
    _require_normalized(psi, "psi")
    _require_normalized(phi, "phi")
    f = np.abs(np.sum(psi.conj() * phi, axis=-1))
    f = np.minimum(f, 1.0)
    if f.ndim == 0:
        return float(f)
    return f


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``d x d`` unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with real and imaginary entries drawn from [-1, 1]."""
    a = rng.uniform(-1, 1, (d, d)) + 1j * rng.uniform(-1, 1, (d, d))
    return 0.5 * (a + a.conj().T)
