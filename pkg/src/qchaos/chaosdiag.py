"""OTOC and Loschmidt echo for kicked tops: dense numerics for any spin and
closed forms for the exactly solvable 3- and 4-qubit cases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from .kickedtop import KickedTopParams, chebyshev_alpha_beta, floquet
from .qcore import spin_coherent_state, spin_operators

LOG_FLOOR = 1e-14
CLOSED_FORM_ATOL = 1e-10


class ClosedFormMismatch(ArithmeticError):
    """Raised when a closed form and its dense oracle disagree."""


def _check_closed(closed: np.ndarray, dense: np.ndarray) -> None:
    dev = float(np.max(np.abs(closed - dense)))
    if dev > CLOSED_FORM_ATOL:
        raise ClosedFormMismatch(f"closed form disagrees with dense echo by {dev:.3e}")


@dataclass(frozen=True)
class OtocSeries:
    times: np.ndarray
    values: np.ndarray
    c2: np.ndarray
    c4: np.ndarray
    observable: str = "Jz"
    params: KickedTopParams | None = None


@dataclass(frozen=True)
class EchoSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str
    kappa0: float
    delta_kappa0: float
    state: str | None = None
    closed_form: np.ndarray | None = field(default=None, repr=False)


def otoc_infinite(u: np.ndarray, a: np.ndarray, n_max: int) -> OtocSeries:
    """Infinite-temperature OTOC ``-Tr([A(n), A]^2) / (2d)`` for n = 0..n_max.

    Split as ``C = C2 - C4`` with ``C2 = Tr(A(n)^2 A^2)/d`` and
    ``C4 = Tr(A(n) A A(n) A)/d``.
    """
    u, a = np.asarray(u), np.asarray(a)
    if u.shape != a.shape or u.ndim != 2:
        raise ValueError(f"dimension mismatch: U {u.shape}, A {a.shape}")
    d = u.shape[0]
    a2 = a @ a
    an = a.copy()
    c2, c4 = np.empty(n_max + 1), np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n:
            an = u.conj().T @ an @ u
        c2[n] = np.trace(an @ an @ a2).real / d
        ana = an @ a
        c4[n] = np.trace(ana @ ana).real / d
    return OtocSeries(np.arange(n_max + 1), c2 - c4, c2, c4)


def kicked_top_otoc(params: KickedTopParams, n_max: int) -> OtocSeries:
    sp = spin_operators(params.two_j)
    s = otoc_infinite(floquet(params), sp.jz, n_max)
    return OtocSeries(s.times, s.values, s.c2, s.c4, "Jz", params)


def otoc_unitary_series(u: np.ndarray, w: np.ndarray, v: np.ndarray, n_max: int) -> np.ndarray:
    """``F(n) = Re Tr(W_n^dag V^dag W_n V) / d`` with ``W_n = U^-n W U^n``."""
    if not u.shape == w.shape == v.shape:
        raise ValueError("U, W and V must share a dimension")
    d = u.shape[0]
    wn = w.copy()
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n:
            wn = u.conj().T @ wn @ u
        out[n] = np.trace(wn.conj().T @ v.conj().T @ wn @ v).real / d
    return out


def otoc_exact_small(nqubits: int, kappa0: float, n: int) -> float:
    """Closed-form ``C_inf(n)`` for 3 or 4 qubits, observable Jz."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = chebyshev_alpha_beta(nqubits, kappa0, n)
    b2 = abs(b) ** 2
    if nqubits == 3:
        c2 = (41 - 32 * b2) / 16
        c4 = (-1) ** n * (41 - 160 * b2 + 128 * b2**2) / 16
        return float(c2 - c4)
    if n % 2 == 0:
        val = 34 - 16 * b2 - 32 * (a * a * np.exp(1j * n * kappa0 / 4)).real - 2 * np.cos(3 * n * kappa0 / 4)
    else:
        sign = (-1) ** ((n - 1) // 2)
        val = 25 - 16 * b2 - 16 * sign * (a * np.exp(1j * n * kappa0 / 2)).imag
    return float(val / 5)


def otoc3_c2_c4(kappa0: float, n: int) -> tuple[float, float]:
    _, b = chebyshev_alpha_beta(3, kappa0, n)
    b2 = abs(b) ** 2
    return (41 - 32 * b2) / 16, (-1) ** n * (41 - 160 * b2 + 128 * b2**2) / 16


def otoc_pi_j(two_j: int, n: int) -> float:
    """``C_inf(n)`` at kappa0 = pi j for integer j and n in {1, 2}."""
    if two_j % 2:
        raise ValueError("closed form needs integer j (even two_j)")
    j = two_j // 2
    # integer numerators, so each value is a single correctly rounded division
    if n == 1:
        return j * (j + 1) / 6
    if n == 2:
        return 2 * j * (j + 1) * (3 * j * j + 3 * j - 1) / 15
    raise ValueError("closed form is available for n = 1 or 2 only")


def quantum_lyapunov_slope(series: OtocSeries, window: tuple[int, int]) -> float:
    """Half the least-squares slope of ``ln C`` over kicks n1..n2 inclusive."""
    n1, n2 = window
    mask = (series.times >= n1) & (series.times <= n2)
    t, v = series.times[mask], series.values[mask]
    if np.any(v <= 0):
        raise ValueError("OTOC must be positive on the fit window")
    keep = v > LOG_FLOOR
    t, v = t[keep], v[keep]
    if len(t) < 2:
        raise ValueError("need at least two usable points in the window")
    slope = np.polyfit(t, np.log(v), 1)[0]
    return float(slope / 2)


# -- Loschmidt echo ------------------------------------------------------------------


def _unitary_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # complex Schur form of a normal matrix is diagonal with unitary vectors
    t, z = schur(u, output="complex")
    return np.angle(np.diagonal(t)), z


def echo_trace(u: np.ndarray, u_pert: np.ndarray, n_max: int) -> np.ndarray:
    """``Tr(U^-n U'^n)`` for n = 0..n_max via one diagonalization of each."""
    if u.shape != u_pert.shape:
        raise ValueError("unitaries must share a dimension")
    th, v = _unitary_eig(u)
    th2, v2 = _unitary_eig(u_pert)
    w = np.abs(v.conj().T @ v2) ** 2
    n = np.arange(n_max + 1)[:, None, None]
    phases = np.exp(1j * n * (th2[None, None, :] - th[None, :, None]))
    return (phases * w[None]).sum(axis=(1, 2))


def echo_averaged(u: np.ndarray, u_pert: np.ndarray, n_max: int) -> np.ndarray:
    """Haar-averaged echo ``(d + |Tr U^-n U'^n|^2) / (d (d + 1))``."""
    d = u.shape[0]
    tr = echo_trace(u, u_pert, n_max)
    return (d + np.abs(tr) ** 2) / (d * (d + 1))


def _overlap_sum(a, b, at, bt) -> complex:
    return a * np.conj(at) + b * np.conj(bt) + np.conj(b) * bt + np.conj(a) * at


def echo_averaged_closed(nqubits: int, kappa0: float, kappa0p: float, n: int) -> float:
    a, b = chebyshev_alpha_beta(nqubits, kappa0, n)
    at, bt = chebyshev_alpha_beta(nqubits, kappa0p, n)
    s = _overlap_sum(a, b, at, bt)
    if nqubits == 3:
        return float((1 + abs(s) ** 2) / 5)
    dk = kappa0p - kappa0
    c2, s2 = np.cos(n * np.pi / 2) ** 2, np.sin(n * np.pi / 2) ** 2
    # relative phase of the negative-parity term is n*dk/8
    inner = s + 2 * np.exp(1j * n * dk / 8) * (c2 + s2 * np.cos(3 * dk / 8))
    return float((5 + abs(1 + np.exp(1j * n * dk / 4) * inner) ** 2) / 30)


def kicked_top_echo_averaged(two_j: int, kappa0: float, delta_kappa0: float, n_max: int) -> EchoSeries:
    """Averaged echo on the Floquet pair; 3 and 4 qubits are cross-checked
    against the closed forms (:class:`ClosedFormMismatch` beyond 1e-10)."""
    u = floquet(KickedTopParams(two_j, kappa0))
    up = floquet(KickedTopParams(two_j, kappa0 + delta_kappa0))
    vals = echo_averaged(u, up, n_max)
    closed = None
    if two_j in (3, 4):
        closed = np.array([echo_averaged_closed(two_j, kappa0, kappa0 + delta_kappa0, n) for n in range(n_max + 1)])
        _check_closed(closed, vals)
    return EchoSeries(np.arange(n_max + 1), vals, "averaged", kappa0, delta_kappa0, closed_form=closed)


def _gamma_delta(a: complex, b: complex) -> tuple[complex, complex]:
    return (a - 1j * np.sqrt(3) * np.conj(b)) / 2, (b + 1j * np.sqrt(3) * np.conj(a)) / 2


def echo_state_closed(state: str, kappa0: float, kappa0p: float, n: int) -> float:
    a, b = chebyshev_alpha_beta(3, kappa0, n)
    at, bt = chebyshev_alpha_beta(3, kappa0p, n)
    if state == "000":
        return float(abs(np.conj(a) * at + np.conj(b) * bt) ** 2)
    if state == "+++":
        g, dl = _gamma_delta(a, b)
        gt, dlt = _gamma_delta(at, bt)
        return float(abs(np.conj(g) * gt + np.conj(dl) * dlt) ** 2)
    raise ValueError(f"no closed form for state {state!r}")


def named_state(state: str, two_j: int = 3, theta: float = 0.0, phi: float = 0.0) -> np.ndarray:
    if state == "000":
        return spin_coherent_state(two_j, 0.0, 0.0)
    if state == "+++":
        # |+> = (|0> + i|1>)/sqrt 2 on every qubit
        return spin_coherent_state(two_j, np.pi / 2, -np.pi / 2)
    if state == "coherent":
        return spin_coherent_state(two_j, theta, phi)
    raise ValueError(f"unknown state {state!r}")


def echo_state(
    state: str | np.ndarray,
    kappa0: float,
    delta_kappa0: float,
    n_max: int,
    two_j: int = 3,
    theta: float = 0.0,
    phi: float = 0.0,
) -> EchoSeries:
    """``|<psi| U^-n(k) U^n(k') |psi>|^2``; named 3-qubit states are also
    evaluated in closed form and cross-checked."""
    if isinstance(state, str):
        psi, tag = named_state(state, two_j, theta, phi), state
    else:
        psi, tag = np.asarray(state, dtype=complex), "custom"
        if psi.shape != (two_j + 1,):
            raise ValueError(f"state has shape {psi.shape}, expected ({two_j + 1},)")
    u = floquet(KickedTopParams(two_j, kappa0))
    up = floquet(KickedTopParams(two_j, kappa0 + delta_kappa0))
    a, b = psi.copy(), psi.copy()
    vals = np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n:
            a, b = u @ a, up @ b
        vals[n] = abs(np.vdot(a, b)) ** 2
    closed = None
    if tag in ("000", "+++") and two_j == 3:
        closed = np.array([echo_state_closed(tag, kappa0, kappa0 + delta_kappa0, n) for n in range(n_max + 1)])
        _check_closed(closed, vals)
    return EchoSeries(np.arange(n_max + 1), vals, "state", kappa0, delta_kappa0, tag, closed)
