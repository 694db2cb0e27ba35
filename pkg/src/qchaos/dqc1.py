"""One-clean-qubit (DQC1) circuits simulated algebraically.

Outcome probabilities are computed from traces, and shot sampling draws from
the exact Bernoulli law. Systems need not be qubit registers: the spin-j
tops live in (2j+1)-dimensional symmetric subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log

import numpy as np

from .qcore import check_unitary, spawn_streams

KRAUS_ATOL = 1e-10


@dataclass(frozen=True)
class Dqc1Result:
    p0: float
    p1: float
    re_estimate: float
    im_estimate: float
    shots: int | None
    stderr: float
    alpha: float = 1.0

    @property
    def exact(self) -> bool:
        return self.shots is None

    @property
    def estimate(self) -> complex:
        return complex(self.re_estimate, self.im_estimate)


def _target_trace(u: np.ndarray, state: np.ndarray | None) -> complex:
    d = u.shape[0]
    if state is None:
        return complex(np.trace(u) / d)
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (d,):
        raise ValueError(f"state has shape {psi.shape}, unitary acts on dimension {d}")
    return complex(np.vdot(psi, u @ psi))


def dqc1_trace(
    u: np.ndarray,
    state: np.ndarray | None = None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    alpha: float = 1.0,
) -> Dqc1Result:
    """Estimate ``Tr(U)/d`` (``state=None``, maximally mixed register) or
    ``<psi|U|psi>``.

    The control qubit starts in ``alpha |0><0| + (1 - alpha) I/2``, so the
    readout signal is ``alpha`` times the target and the estimator divides it
    back out. ``shots=None`` returns exact probabilities; otherwise ``shots``
    Bernoulli outcomes are drawn for each of the sigma_x and sigma_y readouts.
    """
    u = check_unitary(u)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    t = _target_trace(u, state)
    p0 = (1 + alpha * t.real) / 2
    p0_y = (1 + alpha * t.imag) / 2
    if shots is None:
        return Dqc1Result(p0, 1 - p0, t.real, t.imag, None, 0.0, alpha)
    if shots < 1:
        raise ValueError("shots must be positive")
    if rng is None:
        raise ValueError("shots mode needs an rng")
    k0 = rng.binomial(shots, np.clip(p0, 0.0, 1.0))
    ky = rng.binomial(shots, np.clip(p0_y, 0.0, 1.0))
    q0, qy = k0 / shots, ky / shots
    return Dqc1Result(q0, 1 - q0, (2 * q0 - 1) / alpha, (2 * qy - 1) / alpha, shots, 1 / (alpha * np.sqrt(shots)), alpha)


def otoc_unitary(w: np.ndarray, v: np.ndarray, u_tau: np.ndarray) -> np.ndarray:
    """``W_tau^dag V^dag W_tau V`` with ``W_tau = U_tau^dag W U_tau``."""
    if not w.shape == v.shape == u_tau.shape:
        raise ValueError(f"dimension mismatch: W {w.shape}, V {v.shape}, U {u_tau.shape}")
    w_tau = u_tau.conj().T @ w @ u_tau
    return w_tau.conj().T @ v.conj().T @ w_tau @ v


def dqc1_otoc(
    w: np.ndarray,
    v: np.ndarray,
    u_tau: np.ndarray,
    state: np.ndarray | None = None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    alpha: float = 1.0,
) -> Dqc1Result:
    return dqc1_trace(otoc_unitary(w, v, u_tau), state, shots, rng, alpha)


def spectral_grid(n2: int) -> np.ndarray:
    """The N2 points ``u = k/2`` on which ``f`` sums to one."""
    return np.arange(2**n2) / 2


def dqc1_spectral_density(
    otoc_u: np.ndarray,
    n2: int,
    u_grid: np.ndarray | None = None,
    state: np.ndarray | None = None,
) -> np.ndarray:
    """``f(u) = (1/N2) sum_s exp(4 pi i u s / N2) Tr(U^s rho0)``, N2 = 2**n2.

    ``rho0`` is I/d when ``state`` is None. Powers come from one
    eigendecomposition. A phase ``exp(i theta)`` peaks at ``u = -theta N2 / (4 pi)``.
    """
    if n2 < 1:
        raise ValueError("n2 must be positive")
    otoc_u = check_unitary(otoc_u)
    n_anc = 2**n2
    grid = spectral_grid(n2) if u_grid is None else np.asarray(u_grid, dtype=float)
    w, vecs = np.linalg.eig(otoc_u)
    if state is None:
        weights = np.full(len(w), 1 / len(w))
    else:
        psi = np.asarray(state, dtype=complex)
        # <psi|U^s|psi> = (psi^dag V) diag(w^s) (V^-1 psi); V from eig need not be unitary
        weights = (psi.conj() @ vecs) * np.linalg.solve(vecs, psi)
    s = np.arange(n_anc)
    traces = (weights[None, :] * w[None, :] ** s[:, None]).sum(axis=1)
    phases = np.exp(4j * np.pi * grid[:, None] * s[None, :] / n_anc)
    return phases @ traces / n_anc


@dataclass(frozen=True)
class DepolarizingChannel:
    p: float
    dim: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.dim < 1:
            raise ValueError("dim must be positive")


def apply_depolarizing(rho: np.ndarray, channel: DepolarizingChannel) -> np.ndarray:
    """``p rho + (1 - p) I/d``."""
    if rho.shape != (channel.dim, channel.dim):
        raise ValueError("state dimension does not match the channel")
    return channel.p * rho + (1 - channel.p) * np.eye(channel.dim) / channel.dim


def _check_kraus(kraus: list[np.ndarray], d: int) -> np.ndarray:
    ks = np.asarray(kraus, dtype=complex)
    if ks.ndim != 3 or ks.shape[1:] != (d, d):
        raise ValueError(f"Kraus operators must have shape (k, {d}, {d})")
    dev = np.max(np.abs(np.einsum("kji,kjl->il", ks.conj(), ks) - np.eye(d)))
    if dev > KRAUS_ATOL:
        raise ValueError(f"Kraus list is not trace preserving (deviation {dev:.2e})")
    return ks


def dqc1_gate_fidelity(
    u_target: np.ndarray,
    noise: float | list[np.ndarray],
    psi: np.ndarray | None = None,
) -> float:
    """Fidelity of the noisy gate ``Lambda(U . U^dag)`` with the ideal one.

    ``noise`` is a depolarizing strength p or a Kraus list. With ``psi=None``
    the Haar average over pure inputs is returned.
    """
    u = check_unitary(u_target)
    d = u.shape[0]
    if isinstance(noise, (int, float)):
        ch = DepolarizingChannel(float(noise), d)
        if psi is None:
            return ch.p + (1 - ch.p) / d
        phi = u @ np.asarray(psi, dtype=complex)
        out = apply_depolarizing(np.outer(phi, phi.conj()), ch)
        return float(np.vdot(phi, out @ phi).real)
    ks = _check_kraus(noise, d)
    if psi is None:
        # Haar average (sum_k |Tr K_k|^2 + d) / (d (d + 1)); the gate itself cancels
        return float((np.sum(np.abs(np.trace(ks, axis1=1, axis2=2)) ** 2) + d) / (d * (d + 1)))
    phi = u @ np.asarray(psi, dtype=complex)
    amps = np.einsum("i,kij,j->k", phi.conj(), ks, phi)
    return float(np.sum(np.abs(amps) ** 2))


def shots_required(epsilon: float, p_error: float) -> int:
    """``ceil(ln(1/P_e) / eps^2)``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < p_error < 1:
        raise ValueError("p_error must lie in (0, 1)")
    return ceil(log(1 / p_error) / epsilon**2)


def repeated_estimates(
    u: np.ndarray,
    shots: int,
    repetitions: int,
    seed: int,
    state: np.ndarray | None = None,
    alpha: float = 1.0,
) -> np.ndarray:
    """Real-part estimates from independent repetitions, one child stream each."""
    return np.array(
        [dqc1_trace(u, state, shots, rng, alpha).re_estimate for rng in spawn_streams(seed, repetitions)]
    )
