"""Concentration of measure: sphere samplers, Levy-type deviation checks,
bipartite entanglement typicality and the quasispecies equilibrium."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import digamma, gammaln

from .qcore import von_neumann_entropy

LEVY_K = 1 / (9 * np.pi**3)
FANNES_SLACK = 1e-12
PAGE_EXACT_MAX = 4096
# Lipschitz constants on the unit sphere
FUNCTIONS = {"x1": 1.0, "linear": 1.0, "renyi2": 4.0}
SAMPLERS = ("uniform", "lipschitz")


class ConvergenceError(RuntimeError):
    pass


def sample_uniform_sphere(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform points on S^{n-1}: normalized standard normals, shape (n,) or (size, n)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    x = rng.standard_normal((1 if size is None else size, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x[0] if size is None else x


def sample_lipschitz_sphere(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """``y_i = sqrt(x_i / sum x)`` with x_i iid Exponential(1).

    The points are uniform on the probability simplex pushed to the positive
    orthant of the sphere.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    x = rng.exponential(1.0, (1 if size is None else size, n))
    y = np.sqrt(x / x.sum(axis=1, keepdims=True))
    return y[0] if size is None else y


def _sample(sampler: str, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    if sampler == "uniform":
        return sample_uniform_sphere(n, rng, size)
    if sampler == "lipschitz":
        return sample_lipschitz_sphere(n, rng, size)
    raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")


def evaluate(tag: str, x: np.ndarray) -> np.ndarray:
    """Built-in test functions on rows of ``x``."""
    if tag == "x1":
        return x[..., 0]
    if tag == "linear":
        return x.sum(axis=-1) / np.sqrt(x.shape[-1])
    if tag == "renyi2":
        return np.sum(x**4, axis=-1)
    raise ValueError(f"unknown function {tag!r}; expected one of {tuple(FUNCTIONS)}")


def reference_mean(tag: str, sampler: str, n: int) -> float:
    """Exact mean of a built-in function under a sampler.

    Uniform: coordinates are symmetric and ``E sum x^4 = 3/(n+2)``.
    Lipschitz: ``y_1^2 ~ Beta(1, n-1)``, which gives the moments below.
    """
    if tag not in FUNCTIONS:
        raise ValueError(f"unknown function {tag!r}")
    if sampler == "uniform":
        return 3 / (n + 2) if tag == "renyi2" else 0.0
    if sampler == "lipschitz":
        e_y = float(np.exp(gammaln(1.5) + gammaln(n) - gammaln(n + 0.5)))
        return {"x1": e_y, "linear": np.sqrt(n) * e_y, "renyi2": 2 / (n + 1)}[tag]
    raise ValueError(f"unknown sampler {sampler!r}")


def empirical_deviation(
    tag: str, sampler: str, n: int, epsilon: float, trials: int, rng: np.random.Generator, batch: int = 2000
) -> float:
    """Fraction of samples with ``|f(x) - E f| >= epsilon``."""
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    mean = reference_mean(tag, sampler, n)
    hits, done = 0, 0
    while done < trials:
        k = min(batch, trials - done)
        hits += int(np.sum(np.abs(evaluate(tag, _sample(sampler, n, rng, k)) - mean) >= epsilon))
        done += k
    return hits / trials


def levy_bound(n: int, epsilon: float, eta: float = 1.0, k: float = LEVY_K) -> float:
    """``2 exp(-k n eps^2 / eta^2)``."""
    return float(2 * np.exp(-k * n * epsilon**2 / eta**2))


# -- bipartite typicality ---------------------------------------------------------------


def page_entropy(d_a: int, d_b: int) -> float:
    """Mean entanglement entropy of a random pure state on C^dA x C^dB (nats)."""
    if d_a < 1 or d_b < 1:
        raise ValueError("dimensions must be positive")
    if d_a > d_b:
        raise ValueError("need dA <= dB")
    if d_a * d_b > PAGE_EXACT_MAX:
        return float(digamma(d_a * d_b + 1) - digamma(d_b + 1) - (d_a - 1) / (2 * d_b))
    # rational arithmetic, so small cases such as (2, 2) -> 1/3 come out exact
    total = sum(Fraction(1, k) for k in range(d_b + 1, d_a * d_b + 1))
    return float(total - Fraction(d_a - 1, 2 * d_b))


def reduced_state(psi: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    m = psi.reshape(d_a, d_b)
    return m @ m.conj().T


def fannes_bound(t: float, d_a: int) -> float:
    """``T (ln dA - ln T)``, with 0 ln 0 = 0."""
    return 0.0 if t <= 0 else float(t * (np.log(d_a) - np.log(t)))


@dataclass(frozen=True)
class TypicalityStats:
    mean_entropy: float
    std_entropy: float
    mean_trace_distance: float
    fannes_violations: int
    trials: int
    entropies: np.ndarray = field(repr=False)


def bipartite_typicality(d_a: int, d_b: int, trials: int, sampler: str, rng: np.random.Generator) -> TypicalityStats:
    """Entanglement statistics of random global pure states.

    ``haar`` uses complex Gaussian amplitudes; ``lipschitz`` draws a point of
    the real sphere of dimension 2 dA dB and reads consecutive pairs as the
    real and imaginary parts of each amplitude.
    """
    if d_a < 1 or d_b < 1:
        raise ValueError("dimensions must be positive")
    if trials < 100:
        raise ValueError("trials must be at least 100")
    dim = d_a * d_b
    ent, dist = np.empty(trials), np.empty(trials)
    violations = 0
    target = np.log(d_a)
    for t in range(trials):
        if sampler == "haar":
            psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            psi /= np.linalg.norm(psi)
        elif sampler == "lipschitz":
            y = sample_lipschitz_sphere(2 * dim, rng)
            psi = y[0::2] + 1j * y[1::2]
        else:
            raise ValueError(f"unknown sampler {sampler!r}; expected 'haar' or 'lipschitz'")
        rho = reduced_state(psi, d_a, d_b)
        ent[t] = von_neumann_entropy(rho)
        dist[t] = np.abs(np.linalg.eigvalsh(rho - np.eye(d_a) / d_a)).sum()
        if abs(ent[t] - target) > fannes_bound(dist[t], d_a) + FANNES_SLACK:
            violations += 1
    return TypicalityStats(float(ent.mean()), float(ent.std(ddof=1)), float(dist.mean()), violations, trials, ent)


# -- quasispecies -----------------------------------------------------------------------


@dataclass(frozen=True)
class QuasispeciesSystem:
    W: np.ndarray = field(repr=False)
    equilibrium: np.ndarray = field(repr=False)
    lambda_max: float
    iterations: int


def _validate_quasispecies(a: np.ndarray, q: np.ndarray) -> None:
    if a.ndim != 1 or q.shape != (len(a), len(a)):
        raise ValueError("Q must be n x n for n replication rates")
    if np.any(a <= 0):
        raise ValueError("replication rates must be positive")
    if np.any(q < 0) or np.max(np.abs(q.sum(axis=0) - 1)) > 1e-10:
        raise ValueError("Q must be nonnegative and column-stochastic")


def quasispecies_equilibrium(
    a: np.ndarray, q: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000
) -> QuasispeciesSystem:
    """Perron vector of ``W_ij = a_j Q_ij`` by power iteration.

    With Q column-stochastic the eigenvalue equals the mean replication rate
    ``sum a_i x_i`` at equilibrium.
    """
    a, q = np.asarray(a, dtype=float), np.asarray(q, dtype=float)
    _validate_quasispecies(a, q)
    w = q * a[None, :]
    x = np.full(len(a), 1 / len(a))
    for it in range(1, max_iter + 1):
        wx = w @ x
        lam = wx.sum()
        if np.linalg.norm(wx - lam * x) < tol * lam:
            return QuasispeciesSystem(w, x, float(lam), it)
        x = wx / lam
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def quasispecies_rhs(x: np.ndarray, a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``dx/dt = W x - f(x) x`` with ``f(x) = sum a_i x_i / sum x_i``."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    return (q * a[None, :]) @ x - (a @ x / x.sum()) * x


@dataclass(frozen=True)
class FitnessStats:
    mean_abs: float
    median_abs: float
    q95_abs: float
    reference: float


def random_fitness_concentration(
    a: np.ndarray, trials: int, rng: np.random.Generator, reference: float | None = None
) -> FitnessStats:
    """``|f(X) - reference|`` over random frequency vectors X on the simplex.

    ``reference`` defaults to the mean replication rate; pass a system's
    ``lambda_max`` to compare against its equilibrium fitness instead.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("replication rates must be positive")
    ref = float(a.mean()) if reference is None else float(reference)
    dev = np.empty(trials)
    for t in range(trials):
        x = rng.exponential(1.0, len(a))
        dev[t] = abs(a @ x / x.sum() - ref)
    return FitnessStats(float(dev.mean()), float(np.median(dev)), float(np.quantile(dev, 0.95)), ref)
