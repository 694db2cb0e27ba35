"""Kicked top: classical map, Floquet operator, exact 3- and 4-qubit
propagators in Chebyshev form, and Gauss-sum decompositions of the torsion."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .qcore import spin_operators

SQ3 = np.sqrt(3.0)
# Chebyshev evaluation falls back to the recurrence below this |sin(theta)|
_SIN_FLOOR = 1e-8


@dataclass(frozen=True)
class KickedTopParams:
    two_j: int
    kappa0: float
    p: float = np.pi / 2
    # "2j" -> kappa0 Jz^2 / (2j); "2j+1" -> kappa0 Jz^2 / (2j + 1)
    torsion_denominator: str = "2j"

    def __post_init__(self) -> None:
        if self.two_j < 1:
            raise ValueError("two_j must be at least 1")
        if not np.isfinite(self.kappa0):
            raise ValueError("kappa0 must be finite")
        if self.torsion_denominator not in ("2j", "2j+1"):
            raise ValueError("torsion_denominator must be '2j' or '2j+1'")


# -- classical map ---------------------------------------------------------


def classical_step(point: np.ndarray, kappa0: float) -> np.ndarray:
    """One kick of the classical top; ``point`` may be (3,) or (3, n)."""
    x, y, z = point
    c, s = np.cos(kappa0 * x), np.sin(kappa0 * x)
    out = np.array([z * c + y * s, -z * s + y * c, -x])
    norm = np.linalg.norm(out, axis=0)
    if np.any(np.abs(norm - 1.0) > 1e-12):
        out = out / norm
    return out


def random_sphere_points(n: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.standard_normal((3, n))
    return p / np.linalg.norm(p, axis=0)


def classical_trajectory(point: np.ndarray, kappa0: float, n_steps: int) -> np.ndarray:
    out = np.empty((n_steps + 1, 3))
    out[0] = point
    for k in range(n_steps):
        out[k + 1] = classical_step(out[k], kappa0)
    return out


def classical_lyapunov(
    kappa0: float,
    n_init: int,
    n_steps: int,
    rng: np.random.Generator,
    delta0: float = 1e-8,
) -> float:
    """Benettin two-trajectory estimate averaged over random initial points.

    The companion trajectory is pulled back to distance ``delta0`` after every
    kick. All initial points are propagated together as columns.
    """
    if n_init <= 0 or n_steps <= 0:
        raise ValueError("n_init and n_steps must be positive")
    p = random_sphere_points(n_init, rng)
    v = rng.standard_normal((3, n_init))
    v -= np.sum(v * p, axis=0) * p
    v /= np.linalg.norm(v, axis=0)
    q = p + delta0 * v
    q /= np.linalg.norm(q, axis=0)
    acc = np.zeros(n_init)
    for _ in range(n_steps):
        p = classical_step(p, kappa0)
        q = classical_step(q, kappa0)
        dv = q - p
        dist = np.linalg.norm(dv, axis=0)
        acc += np.log(dist / delta0)
        q = p + dv * (delta0 / dist)
        q /= np.linalg.norm(q, axis=0)
    return float(np.mean(acc / n_steps))


# -- quantum Floquet ------------------------------------------------------------


def _hermitian_exp(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i t H)`` through the eigendecomposition of a Hermitian H."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def floquet(params: KickedTopParams) -> np.ndarray:
    """``exp(-i kappa0 Jz^2 / (2j)) exp(-i p Jy)`` in the m-descending basis."""
    sp = spin_operators(params.two_j)
    denom = params.two_j if params.torsion_denominator == "2j" else params.two_j + 1
    torsion = np.exp(-1j * params.kappa0 * sp.m**2 / denom)
    return torsion[:, None] * _hermitian_exp(sp.jy, params.p)


def tomography_floquet(two_j: int, kappa0: float, beta: float = 1.4) -> np.ndarray:
    """``exp(-i beta Jx) exp(-i kappa0 Jz^2 / (2j))``, the kicked top used to
    drive measurement records."""
    sp = spin_operators(two_j)
    torsion = np.exp(-1j * kappa0 * sp.m**2 / two_j)
    return _hermitian_exp(sp.jx, beta) * torsion[None, :]


def parity_operator(two_j: int) -> np.ndarray:
    """``exp(-i pi Jy)``, proportional to the product of sigma^y on all qubits."""
    return _hermitian_exp(spin_operators(two_j).jy, np.pi)


# -- Chebyshev propagators --------------------------------------------------------


def chebyshev_tu(n: int, chi: float) -> tuple[float, float]:
    """``(T_n(chi), U_{n-1}(chi))`` for |chi| <= 1, with ``U_{-1} = 0``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    theta = np.arccos(np.clip(chi, -1.0, 1.0))
    st = np.sin(theta)
    if abs(st) >= _SIN_FLOOR:
        return float(np.cos(n * theta)), float(np.sin(n * theta) / st)
    # three-term recurrence; shared by T and U
    t_prev, t_cur = 1.0, chi
    u_prev, u_cur = 0.0, 1.0  # U_{-1}, U_0
    if n == 0:
        return 1.0, 0.0
    for _ in range(n - 1):
        t_prev, t_cur = t_cur, 2 * chi * t_cur - t_prev
        u_prev, u_cur = u_cur, 2 * chi * u_cur - u_prev
    return float(t_cur), float(u_cur)


def parity_basis(nqubits: int) -> np.ndarray:
    """Columns are the parity-adapted symmetric states, in the order
    3 qubits: phi1+, phi2+, phi1-, phi2-;
    4 qubits: phi1+, phi2+, phi3+, phi1-, phi2-.

    Rows index the spin basis with m descending, so row 0 is |00..0>.
    """
    s2 = np.sqrt(2.0)
    if nqubits == 3:
        e = np.eye(4, dtype=complex)
        cols = [
            (e[0] - 1j * e[3]) / s2,
            (e[1] + 1j * e[2]) / s2,
            (e[0] + 1j * e[3]) / s2,
            (e[1] - 1j * e[2]) / s2,
        ]
    elif nqubits == 4:
        e = np.eye(5, dtype=complex)
        cols = [(e[1] - e[3]) / s2, (e[0] + e[4]) / s2, e[2], (e[1] + e[3]) / s2, (e[0] - e[4]) / s2]
    else:
        raise ValueError("nqubits must be 3 or 4")
    return np.array(cols).T


@dataclass(frozen=True)
class ChebyshevBlocks:
    """Parity blocks of the n-kick propagator.

    The blocks describe the all-to-all Ising form of the top, which differs
    from :func:`floquet` by the global phase ``exp(i kappa0 / 4)`` per kick;
    :meth:`dense` removes it so that ``dense() == floquet(...)**n``.
    """

    nqubits: int
    n: int
    kappa0: float
    kappa: float
    alpha_n: complex
    beta_n: complex
    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)
    zero: complex | None = None

    def block_matrix(self) -> np.ndarray:
        """Block-diagonal propagator in the :func:`parity_basis` ordering."""
        if self.nqubits == 3:
            out = np.zeros((4, 4), dtype=complex)
            out[:2, :2], out[2:, 2:] = self.plus, self.minus
        else:
            out = np.zeros((5, 5), dtype=complex)
            out[0, 0] = self.zero
            out[1:3, 1:3], out[3:, 3:] = self.plus, self.minus
        return out

    def dense(self) -> np.ndarray:
        p = parity_basis(self.nqubits)
        phase = np.exp(-1j * self.n * self.kappa0 / 4)
        return phase * (p @ self.block_matrix() @ p.conj().T)


def chebyshev_alpha_beta(nqubits: int, kappa0: float, n: int) -> tuple[complex, complex]:
    if nqubits == 3:
        kappa = kappa0 / 6
        t, u = chebyshev_tu(n, np.sin(2 * kappa) / 2)
        return t + 0.5j * u * np.cos(2 * kappa), SQ3 / 2 * u * np.exp(2j * kappa)
    if nqubits == 4:
        kappa = kappa0 / 2
        t, u = chebyshev_tu(n, np.sin(kappa) / 2)
        return t + 0.5j * u * np.cos(kappa), SQ3 / 2 * u * np.exp(1j * kappa)
    raise ValueError("nqubits must be 3 or 4")


def chebyshev_propagator(nqubits: int, kappa0: float, n: int) -> ChebyshevBlocks:
    if n < 0:
        raise ValueError("n must be nonnegative")
    a, b = chebyshev_alpha_beta(nqubits, kappa0, n)
    if nqubits == 3:
        kappa = kappa0 / 6
        blocks = []
        for sg in (1, -1):
            pref = sg**n * np.exp(-1j * n * (sg * np.pi / 4 + kappa))
            blocks.append(pref * np.array([[a, -sg * np.conj(b)], [sg * b, np.conj(a)]]))
        return ChebyshevBlocks(3, n, kappa0, kappa, a, b, blocks[0], blocks[1])
    kappa = kappa0 / 2
    plus = np.exp(-0.5j * n * (np.pi + kappa)) * np.array([[a, 1j * np.conj(b)], [1j * b, np.conj(a)]])
    c, s = np.cos(n * np.pi / 2), np.sin(n * np.pi / 2)
    ph = np.exp(0.75j * kappa)
    minus = np.exp(-0.75j * n * kappa) * np.array([[c, ph * s], [-s / ph, c]])
    return ChebyshevBlocks(4, n, kappa0, kappa, a, b, plus, minus, zero=complex((-1) ** n))


# -- Gauss sums ---------------------------------------------------------------------


@dataclass(frozen=True)
class GaussSumCoefficients:
    r: int
    s: int
    a: np.ndarray = field(repr=False)


def gauss_sum_coefficients(r: int, s: int) -> GaussSumCoefficients:
    """``a_l = (1/2s) sum_m exp(-i pi m l / s) exp(-i pi r m^2 / s)``, l < 2s."""
    if r < 1 or s < 1 or gcd(r, s) != 1:
        raise ValueError("r and s must be coprime positive integers")
    m = np.arange(2 * s)
    l = m[:, None]
    a = np.exp(-1j * np.pi * (m * l + r * m**2) / s).sum(axis=1) / (2 * s)
    return GaussSumCoefficients(r, s, a)


def verify_gauss_sum(coeffs: GaussSumCoefficients, two_j: int) -> float:
    """Max deviation between ``exp(-i pi r Jz^2 / s)`` and the rotation sum."""
    if two_j % 2:
        raise ValueError("verification needs integer j (even two_j)")
    m = spin_operators(two_j).m
    target = np.exp(-1j * np.pi * coeffs.r * m**2 / coeffs.s)
    l = np.arange(2 * coeffs.s)[:, None]
    recon = (coeffs.a[:, None] * np.exp(-1j * np.pi * l * m / coeffs.s)).sum(axis=0)
    return float(np.max(np.abs(target - recon)))
