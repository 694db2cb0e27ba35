"""Continuous weak-measurement tomography.

An observable O_0 is conjugated by a sequence of unitaries, the expectation of
each O_n in the unknown state is recorded with Gaussian shot noise, and the
state is recovered by linear inversion followed by a positivity step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm

from .kickedtop import tomography_floquet
from .qcore import (
    basis_overlaps,
    from_coordinates,
    haar_unitary,
    random_diagonal_unitary,
    shannon_entropy,
    to_coordinates,
)

log = logging.getLogger(__name__)

POLICIES = ("haar_each_step", "repeated_haar", "diagonal_fixed_basis", "repeated_floquet", "hybrid")
RANK_RTOL = 1e-8
PINV_RCOND = 1e-12


@dataclass(frozen=True)
class UnitaryPolicy:
    """How the per-step unitaries are drawn.

    Payload by kind: ``repeated_haar`` may carry ``unitary``;
    ``diagonal_fixed_basis`` may carry ``basis``; ``repeated_floquet`` needs
    ``kappa0``; ``hybrid`` needs ``eig_source`` and ``vec_source`` (or the
    kicked-top strengths ``kappa0``/``kappa0_vec``).
    """

    kind: str
    dim: int
    unitary: np.ndarray | None = field(default=None, repr=False)
    basis: np.ndarray | None = field(default=None, repr=False)
    kappa0: float | None = None
    kappa0_vec: float | None = None
    eig_source: np.ndarray | None = field(default=None, repr=False)
    vec_source: np.ndarray | None = field(default=None, repr=False)
    beta: float = 1.4

    def __post_init__(self) -> None:
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.kind == "repeated_floquet" and self.kappa0 is None:
            raise ValueError("repeated_floquet needs kappa0")
        if self.kind == "hybrid":
            has_mats = self.eig_source is not None and self.vec_source is not None
            has_kappas = self.kappa0 is not None and self.kappa0_vec is not None
            if not (has_mats or has_kappas):
                raise ValueError("hybrid needs eig_source/vec_source or kappa0/kappa0_vec")
        for name in ("unitary", "basis", "eig_source", "vec_source"):
            m = getattr(self, name)
            if m is not None and np.shape(m) != (self.dim, self.dim):
                raise ValueError(f"{name} has shape {np.shape(m)}, expected ({self.dim}, {self.dim})")


def _sorted_eig(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eig(u)
    ph = np.angle(w)
    order = np.argsort(ph)
    return ph[order], v[:, order]


def hybrid_unitary(eig_source: np.ndarray, vec_source: np.ndarray, min_gap: float = 1e-10) -> np.ndarray:
    """Eigenphases of ``eig_source`` on the eigenvectors of ``vec_source``.

    Both spectra are sorted by phase in (-pi, pi] and paired in that order.
    """
    if eig_source.shape != vec_source.shape:
        raise ValueError("sources must share a dimension")
    ph, _ = _sorted_eig(eig_source)
    ph_vec, v = _sorted_eig(vec_source)
    for name, p in (("eig_source", ph), ("vec_source", ph_vec)):
        gaps = np.diff(np.concatenate([p, [p[0] + 2 * np.pi]]))
        if len(p) > 1 and gaps.min() < min_gap:
            raise ValueError(f"{name} has degenerate eigenphases (min gap {gaps.min():.2e})")
    # non-degenerate unitary: eigenvectors are orthogonal, re-orthonormalize for safety
    q, r = np.linalg.qr(v)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return (q * np.exp(1j * ph)) @ q.conj().T


def generate_sequence(policy: UnitaryPolicy, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Per-step unitaries, shape ``(n_steps, dim, dim)``."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    d = policy.dim
    if policy.kind == "haar_each_step":
        return np.array([haar_unitary(d, rng) for _ in range(n_steps)])
    if policy.kind == "diagonal_fixed_basis":
        basis = policy.basis if policy.basis is not None else haar_unitary(d, rng)
        return np.array([random_diagonal_unitary(d, basis, rng) for _ in range(n_steps)])
    if policy.kind == "repeated_haar":
        u = policy.unitary if policy.unitary is not None else haar_unitary(d, rng)
    elif policy.kind == "repeated_floquet":
        u = tomography_floquet(d - 1, policy.kappa0, policy.beta)
    else:
        if policy.eig_source is not None:
            eig_src, vec_src = policy.eig_source, policy.vec_source
        else:
            eig_src = tomography_floquet(d - 1, policy.kappa0, policy.beta)
            vec_src = tomography_floquet(d - 1, policy.kappa0_vec, policy.beta)
        u = hybrid_unitary(eig_src, vec_src)
    return np.broadcast_to(u, (n_steps, d, d))


def evolve_operators(o0: np.ndarray, seq: np.ndarray) -> np.ndarray:
    """``O_n = (U_1...U_n)^dag O_0 (U_1...U_n)`` for n = 1..N, stacked."""
    o0 = np.asarray(o0)
    if seq.shape[1:] != o0.shape:
        raise ValueError(f"operator shape {o0.shape} does not match unitaries {seq.shape[1:]}")
    out = np.empty(seq.shape, dtype=complex)
    v = np.eye(o0.shape[0], dtype=complex)
    for n, u in enumerate(seq):
        v = v @ u
        out[n] = v.conj().T @ o0 @ v
    return out


def evolve_observables(o0: np.ndarray, seq: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Observation matrix with rows ``Tr(O_n E_a)``, shape ``(N, d^2 - 1)``."""
    if basis.shape[1:] != np.shape(o0):
        raise ValueError("basis and operator dimensions differ")
    return basis_overlaps(evolve_operators(o0, seq), basis)


@dataclass(frozen=True)
class MeasurementEnsemble:
    obs: np.ndarray = field(repr=False)
    record: np.ndarray = field(repr=False)
    sigma: float
    r_true: np.ndarray = field(repr=False)


def simulate_record(
    rho0: np.ndarray, obs: np.ndarray, basis: np.ndarray, sigma: float, rng: np.random.Generator
) -> MeasurementEnsemble:
    """``M = O r + sigma W`` with r the traceless coordinates of ``rho0``."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    r = to_coordinates(rho0, basis)
    clean = obs @ r
    noise = sigma * rng.standard_normal(len(clean)) if sigma > 0 else 0.0
    return MeasurementEnsemble(obs, clean + noise, float(sigma), r)


@dataclass(frozen=True)
class TomographyEstimate:
    r_ml: np.ndarray = field(repr=False)
    rho_ml: np.ndarray = field(repr=False)
    rho_bar: np.ndarray = field(repr=False)
    fidelity: float
    fidelity_kind: str
    flagged: bool = False


def project_to_density(rho: np.ndarray, mode: str = "clip") -> np.ndarray:
    """Nearest physical state by eigenvalue clipping or by the Frobenius-closest
    projection onto the probability simplex (``mode='simplex'``)."""
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho)
    if mode == "clip":
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            return np.eye(len(w)) / len(w)
        w = w / w.sum()
    elif mode == "simplex":
        w = _simplex(w)
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    return (v * w) @ v.conj().T


def _simplex(w: np.ndarray) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(w) + 1)
    last = np.nonzero(u - (css - 1) / k > 0)[0][-1]
    return np.clip(w - (css[last] - 1) / (last + 1), 0.0, None)


def _constrained_projection(
    r_ml: np.ndarray, gram: np.ndarray, basis: np.ndarray, max_iter: int, tol: float
) -> np.ndarray:
    """Minimize ``(r - r_ml)^T G (r - r_ml)`` over physical states (FISTA).

    The simplex projection of the eigenvalues is the Euclidean projection in r
    for any orthogonal basis, so it is used as the proximal step.
    """

    d = basis.shape[1]
    flat = basis.reshape(len(basis), -1)
    norms = np.einsum("aij,aji->a", basis, basis).real
    # Tr(X E_a) = sum_ij X_ij (E_a)_ji = vec(X) . vec(E_a^T)
    flat_t = basis.transpose(0, 2, 1).reshape(len(basis), -1)
    eye = np.eye(d) / d

    def proj(r):
        rho = (r @ flat).reshape(d, d) + eye
        return (flat_t @ project_to_density(rho, "simplex").ravel()).real / norms

    lip = np.linalg.eigvalsh(gram)[-1]
    x = proj(r_ml)
    if lip <= 0:
        return x
    y, t = x.copy(), 1.0
    for it in range(max_iter):
        x_new = proj(y - gram @ (y - r_ml) / lip)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        y = x_new + (t - 1) / t_new * (x_new - x)
        step = np.linalg.norm(x_new - x)
        x, t = x_new, t_new
        if step < tol * max(1.0, np.linalg.norm(x)):
            log.debug("constrained projection converged after %d iterations", it + 1)
            break
    return x


def state_fidelity(truth: np.ndarray, rho: np.ndarray) -> tuple[float, str]:
    """Overlap for a pure truth, Uhlmann fidelity otherwise."""
    w, v = np.linalg.eigh(truth)
    if w[-1] > 1 - 1e-9:
        psi = v[:, -1]
        return float(np.clip(np.vdot(psi, rho @ psi).real, 0.0, 1.0)), "overlap"
    s = sqrtm(truth)
    f = np.trace(sqrtm(s @ rho @ s)).real ** 2
    return float(np.clip(f, 0.0, 1.0)), "uhlmann"


def estimate_state(
    ens: MeasurementEnsemble,
    basis: np.ndarray,
    ridge: float | None = None,
    projection: str = "clip",
    max_iter: int = 5000,
    tol: float = 1e-10,
) -> TomographyEstimate:
    """Ridge-regularized least squares, then a positivity step.

    ``projection`` is ``'clip'`` (eigenvalue clipping), ``'simplex'`` or
    ``'constrained'`` (metric-weighted distance to the unconstrained estimate,
    which lets positivity fill directions the record never probed).
    """
    obs = ens.obs
    d = basis.shape[1]
    truth = from_coordinates(ens.r_true, basis)
    if not np.any(obs):
        rho = np.eye(d, dtype=complex) / d
        f, kind = state_fidelity(truth, rho)
        return TomographyEstimate(np.zeros(obs.shape[1]), rho, rho, f, kind, flagged=True)
    gram = obs.T @ obs
    if ridge is None:
        ridge = d * d * ens.sigma**2 * np.finfo(float).eps
    # pseudo-inverse so directions the record never probed stay at zero
    reg = np.linalg.pinv(gram + ridge * np.eye(gram.shape[0]), rcond=PINV_RCOND, hermitian=True)
    r_ml = reg @ (obs.T @ ens.record)
    rho_ml = from_coordinates(r_ml, basis)
    if projection == "constrained":
        rho_bar = from_coordinates(_constrained_projection(r_ml, gram, basis, max_iter, tol), basis)
    else:
        rho_bar = project_to_density(rho_ml, projection)
    f, kind = state_fidelity(truth, rho_bar)
    return TomographyEstimate(r_ml, rho_ml, rho_bar, f, kind)


@dataclass(frozen=True)
class CovarianceSpectrum:
    eigenvalues: np.ndarray = field(repr=False)
    rank: int
    fisher_information: float
    shannon_entropy: float


def covariance_spectrum(obs: np.ndarray, sigma: float, regularizer: float | None = None) -> CovarianceSpectrum:
    """Spectrum of ``C^-1 = O^T O / sigma^2`` and the derived information metrics.

    FI is ``1 / sum 1/(lambda + reg)`` with ``reg = d^2`` by default; the
    entropy is that of the normalized spectrum, natural log.
    """
    return spectrum_from_gram(obs.T @ obs, sigma, regularizer)


def spectrum_from_gram(gram: np.ndarray, sigma: float, regularizer: float | None = None) -> CovarianceSpectrum:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    lam = np.clip(np.linalg.eigvalsh(gram / sigma**2), 0.0, None)
    if regularizer is None:
        regularizer = float(round(np.sqrt(gram.shape[0] + 1)) ** 2)
    lam_max = lam[-1]
    rank = int(np.sum(lam > RANK_RTOL * lam_max)) if lam_max > 0 else 0
    with np.errstate(divide="ignore"):
        fi = 1.0 / np.sum(1.0 / (lam + regularizer))
    total = lam.sum()
    ent = shannon_entropy(lam / total) if total > 0 else 0.0
    return CovarianceSpectrum(lam, rank, float(fi), ent)


def information_trace(
    obs: np.ndarray, sigma: float, checkpoints: list[int], regularizer: float | None = None
) -> list[tuple[int, CovarianceSpectrum]]:
    """Covariance spectra after the first ``k`` steps for each checkpoint k."""
    out = []
    gram = np.zeros((obs.shape[1], obs.shape[1]))
    done = 0
    for k in sorted(set(checkpoints)):
        if not 1 <= k <= len(obs):
            raise ValueError(f"checkpoint {k} outside 1..{len(obs)}")
        block = obs[done:k]
        gram += block.T @ block
        done = k
        out.append((k, spectrum_from_gram(gram, sigma, regularizer)))
    return out


def alignment_trace(obs: np.ndarray, r_state: np.ndarray) -> float:
    """``Tr(S^T S)`` with ``S_na = r_a O_na``."""
    if obs.shape[1] != len(r_state):
        raise ValueError("state coordinates do not match the observation matrix")
    return float(np.sum((obs * r_state[None, :]) ** 2))


@dataclass(frozen=True)
class SparsityReport:
    fraction_empirical: float
    fraction_asymptotic: float
    dim: int


def superoperator_sparsity(o0: np.ndarray, phases: np.ndarray, rel_threshold: float = 1e-10) -> SparsityReport:
    """Density of ``C^-1`` as a d^2 x d^2 superoperator for diagonal dynamics.

    ``o0`` is the initial observable written in the eigenbasis of the diagonal
    unitaries and ``phases`` holds the accumulated phases (N, d). The
    asymptotic matrix keeps only the terms growing linearly with N.
    """
    o0 = np.asarray(o0)
    d = o0.shape[0]
    n_steps = len(phases)
    vecs = np.empty((n_steps, d * d), dtype=complex)
    for n, ph in enumerate(phases):
        e = np.exp(1j * ph)
        vecs[n] = (np.conj(e)[:, None] * o0 * e[None, :]).ravel()
    emp = vecs.T @ vecs.conj()
    asym = np.zeros((d * d, d * d), dtype=complex)
    idx = np.arange(d * d)
    asym[idx, idx] = n_steps * np.abs(o0.ravel()) ** 2
    diag_idx = np.arange(d) * (d + 1)
    dd = np.diagonal(o0)
    for a in range(d):
        for b in range(d):
            if a != b:
                asym[diag_idx[a], diag_idx[b]] += n_steps * dd[a] * np.conj(dd[b])

    def frac(m):
        mx = np.abs(m).max()
        return float(np.mean(np.abs(m) > rel_threshold * mx)) if mx > 0 else 0.0

    return SparsityReport(frac(emp), frac(asym), d)
