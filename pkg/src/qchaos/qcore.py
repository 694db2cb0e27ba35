"""Quantum linear-algebra primitives: spin operators, random ensembles, entropies,
weak-measurement Kraus operators and a Hermitian operator basis.

Matrices are plain ``numpy`` arrays. Kets in the spin-j space use the
|j, m> basis ordered with m descending (index 0 is m = +j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

UNITARY_ATOL = 1e-10
EIG_FLOOR = 1e-12


def make_rng(seed: int | np.random.SeedSequence | np.random.Generator | None) -> np.random.Generator:
    """Return a Generator; an existing Generator is passed through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_streams(seed: int | np.random.SeedSequence, count: int) -> list[np.random.Generator]:
    """Independent child streams derived with ``SeedSequence.spawn``.

    Child ``k`` depends only on (seed, k), so a sweep split across workers
    reproduces the serial result regardless of scheduling.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(count)]


def check_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    """Validate squareness and ``max|U^dag U - I| <= atol``; return ``u`` as complex."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"unitary must be square, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("unitary has non-finite entries")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > atol:
        raise ValueError(f"matrix is not unitary (max deviation {dev:.3e})")
    return u


def check_density(rho: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


@dataclass(frozen=True)
class SpinSystem:
    two_j: int
    jx: np.ndarray = field(repr=False)
    jy: np.ndarray = field(repr=False)
    jz: np.ndarray = field(repr=False)

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def m(self) -> np.ndarray:
        return self.j - np.arange(self.dim)


def spin_operators(two_j: int) -> SpinSystem:
    """Angular-momentum matrices for spin j = two_j/2 (hbar = 1)."""
    if two_j < 0:
        raise ValueError("two_j must be nonnegative")
    j = two_j / 2
    m = j - np.arange(two_j + 1)
    # <m+1|J+|m> sits on the superdiagonal because m descends with the index
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    jz = np.diag(m).astype(complex)
    return SpinSystem(two_j, jx, jy, jz)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    if dim < 1:
        raise ValueError("dim must be positive")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    # absorb the phases of diag(R) so the decomposition is unique
    return q * (d / np.abs(d))


def random_diagonal_unitary(dim: int, basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``B diag(exp(i phi)) B^dag`` with iid phases uniform on [0, 2 pi)."""
    basis = np.asarray(basis)
    if basis.shape != (dim, dim):
        raise ValueError(f"basis shape {basis.shape} does not match dim {dim}")
    phases = np.exp(1j * rng.uniform(0.0, 2 * np.pi, dim))
    return (basis * phases) @ basis.conj().T


def spin_coherent_state(two_j: int, theta0: float, phi0: float) -> np.ndarray:
    """Symmetric product of ``cos(theta/2)|0> + exp(-i phi) sin(theta/2)|1>``.

    Qubit |0> is spin up, so k qubits in |1> land on m = j - k.
    """
    if not 0.0 <= theta0 <= np.pi:
        raise ValueError("theta0 must lie in [0, pi]")
    n = two_j
    c, s = np.cos(theta0 / 2), np.exp(-1j * phi0) * np.sin(theta0 / 2)
    amps = np.array([np.sqrt(comb(n, k)) * c ** (n - k) * s**k for k in range(n + 1)], dtype=complex)
    return amps / np.linalg.norm(amps)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be positive")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_mixed_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt random density matrix ``G G^dag / Tr``."""
    if dim < 1:
        raise ValueError("dim must be positive")
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def shannon_entropy(p: np.ndarray) -> float:
    """Natural-log entropy of a probability vector, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    w = w[w > EIG_FLOOR]
    return float(max(-np.sum(w * np.log(w)), 0.0))


@dataclass(frozen=True)
class WeakMeasurementModel:
    observable: np.ndarray = field(repr=False)
    g: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not np.isfinite(self.g):
            raise ValueError("coupling g must be finite")


def weak_measurement_kraus(model: WeakMeasurementModel, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian Kraus operator ``M_q`` and POVM element ``E_q = M_q^dag M_q``."""
    evals, evecs = np.linalg.eigh(model.observable)
    s2 = model.sigma**2
    amp = (2 * np.pi * s2) ** -0.25 * np.exp(-((q - model.g * evals) ** 2) / (4 * s2))
    kraus = (evecs * amp) @ evecs.conj().T
    povm = (evecs * amp**2) @ evecs.conj().T
    return kraus, povm


def post_measurement_state(rho: np.ndarray, kraus: np.ndarray) -> np.ndarray:
    """``M rho M^dag / Tr(M rho M^dag)``."""
    out = kraus @ rho @ kraus.conj().T
    return out / np.trace(out).real


def hermitian_basis(dim: int, norm: float = 1.0) -> np.ndarray:
    """Generalized Gell-Mann matrices, shape ``(dim**2 - 1, dim, dim)``.

    Order: symmetric off-diagonal (j<k, row-major), antisymmetric off-diagonal,
    then the ``dim - 1`` diagonal ones. Elements satisfy
    ``Tr(E_a E_b) = norm * delta_ab``; ``norm=2`` is the usual Gell-Mann scale.
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    out = []
    scale = np.sqrt(norm / 2)
    pairs = [(a, b) for a in range(dim) for b in range(a + 1, dim)]
    for a, b in pairs:
        e = np.zeros((dim, dim), dtype=complex)
        e[a, b] = e[b, a] = scale
        out.append(e)
    for a, b in pairs:
        e = np.zeros((dim, dim), dtype=complex)
        e[a, b], e[b, a] = -1j * scale, 1j * scale
        out.append(e)
    for l in range(1, dim):
        v = np.zeros(dim)
        v[:l], v[l] = 1.0, -l
        out.append(np.diag(v * np.sqrt(norm / (l * (l + 1)))).astype(complex))
    return np.array(out)


def basis_overlaps(ops: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``Tr(X E_a)`` for one operator (d, d) or a stack (n, d, d); real part."""
    ops = np.asarray(ops)
    flat_basis = basis.transpose(0, 2, 1).reshape(basis.shape[0], -1)
    if ops.ndim == 2:
        return (flat_basis @ ops.ravel()).real
    # contiguous copy: the strided .real view makes later matmuls far slower
    return np.ascontiguousarray((ops.reshape(ops.shape[0], -1) @ flat_basis.T).real)


def to_coordinates(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coefficients r with ``rho = sum_a r_a E_a + I/d``."""
    norms = np.einsum("aij,aji->a", basis, basis).real
    return basis_overlaps(rho, basis) / norms


def from_coordinates(r: np.ndarray, basis: np.ndarray) -> np.ndarray:
    d = basis.shape[1]
    return np.tensordot(r, basis, axes=1) + np.eye(d) / d
