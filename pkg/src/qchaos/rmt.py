"""Reference eigenvalue laws (Marchenko-Pastur, Porter-Thomas) and the
information-gain predictions derived from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

QUAD_ATOL = 1e-8
# E[x ln x] for x ~ chi^2_1, i.e. 2 - gamma - ln 2
PT_XLOGX = 2.0 - np.euler_gamma - np.log(2.0)


class DivergentIntegral(ArithmeticError):
    """Raised when a prediction integral has no finite value."""


def mp_support(D: int, N: int, scale: float = 1.0) -> tuple[float, float]:
    """Edges of the MP law for ``X X^T / N`` times ``scale``."""
    if D < 1 or N < 1:
        raise ValueError("D and N must be positive")
    if D > N:
        raise ValueError(f"need D <= N, got D={D}, N={N}")
    c = D / N
    return scale * (1 - np.sqrt(c)) ** 2, scale * (1 + np.sqrt(c)) ** 2


@dataclass(frozen=True)
class MarchenkoPastur:
    """Eigenvalue law of ``scale * X X^T / N`` for a D x N standard-normal X.

    ``normalization`` is the numerically measured mass of the analytic
    density; :func:`mp_density` divides by it so the law integrates to one.
    """

    D: int
    N: int
    scale: float = 1.0
    lambda_minus: float = 0.0
    lambda_plus: float = 0.0
    normalization: float = 1.0

    @classmethod
    def create(cls, D: int, N: int, scale: float = 1.0) -> MarchenkoPastur:
        lo, hi = mp_support(D, N, scale)
        raw = cls(D, N, scale, lo, hi, 1.0)
        return cls(D, N, scale, lo, hi, raw.expect(lambda x: np.ones_like(x)))

    @property
    def ratio(self) -> float:
        return self.D / self.N

    def _raw(self, lam: np.ndarray) -> np.ndarray:
        lo, hi = self.lambda_minus, self.lambda_plus
        inside = (lam > lo) & (lam < hi)
        out = np.zeros_like(lam, dtype=float)
        l = lam[inside]
        out[inside] = np.sqrt((hi - l) * (l - lo)) / (2 * np.pi * self.ratio * self.scale * l)
        return out

    def expect(self, g) -> float:
        """``integral g(l) rho(l) dl`` with ``l = lo + (hi - lo) sin^2 t``.

        The substitution cancels the square-root edges, leaving a smooth
        integrand on [0, pi/2].
        """
        lo, hi = self.lambda_minus, self.lambda_plus
        w = hi - lo
        k = 2 * np.pi * self.ratio * self.scale * self.normalization

        def f(t):
            s, c = np.sin(t), np.cos(t)
            l = lo + w * s * s
            return float(g(np.array(l))) * 2 * (w * s * c) ** 2 / (k * l)

        val, _ = integrate.quad(f, 0.0, np.pi / 2, epsabs=QUAD_ATOL, epsrel=1e-10, limit=200)
        return val

    def cdf(self, x: np.ndarray | float) -> np.ndarray:
        lo, hi = self.lambda_minus, self.lambda_plus
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        w = hi - lo
        k = 2 * np.pi * self.ratio * self.scale * self.normalization
        for i, v in enumerate(xs):
            if v <= lo:
                out[i] = 0.0
            elif v >= hi:
                out[i] = 1.0
            else:
                t_max = np.arcsin(np.sqrt((v - lo) / w))
                out[i] = integrate.quad(
                    lambda t: 2 * (w * np.sin(t) * np.cos(t)) ** 2 / (k * (lo + w * np.sin(t) ** 2)),
                    0.0,
                    t_max,
                    epsabs=1e-12,
                )[0]
        return np.clip(out, 0.0, 1.0)


def mp_density(params: MarchenkoPastur, lam: np.ndarray | float) -> np.ndarray:
    """Unit-mass MP density, zero outside the support."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return params._raw(lam) / params.normalization


def sample_wishart(D: int, N: int, rng: np.random.Generator, entry_std: float = 1.0) -> np.ndarray:
    """Ascending eigenvalues of ``X X^T / (N entry_std^2)``."""
    if D > N:
        raise ValueError(f"need D <= N, got D={D}, N={N}")
    x = entry_std * rng.standard_normal((D, N))
    return np.linalg.eigvalsh(x @ x.T / (N * entry_std**2))


# -- Porter-Thomas ----------------------------------------------------------------------


def pt_density(lam: np.ndarray | float) -> np.ndarray:
    """``exp(-l/2) / sqrt(2 pi l)`` for l > 0."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.zeros_like(lam)
    pos = lam > 0
    out[pos] = np.exp(-lam[pos] / 2) / np.sqrt(2 * np.pi * lam[pos])
    return out


def pt_cdf(x: np.ndarray | float) -> np.ndarray:
    return stats.chi2.cdf(x, 1)


def pt_expect(g) -> float:
    """``E[g(x)]`` for x ~ chi^2_1 with ``x = t^2``, so the weight is a Gaussian."""
    w = np.sqrt(2 / np.pi)
    val, _ = integrate.quad(lambda t: g(t * t) * w * np.exp(-t * t / 2), 0.0, np.inf, epsabs=QUAD_ATOL, limit=500)
    return val


# -- predictions --------------------------------------------------------------------------


def predict_fi_mp(D: int, N: int, trace: float, ridge: float = 0.0) -> float:
    """``1 / (D E[1/(x trace/D + ridge)])`` with x mean-one MP.

    ``trace`` is the calibrated ``Tr(C^-1)``; eigenvalues are scaled so their
    sum matches it.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    mp = MarchenkoPastur.create(D, N)
    if ridge == 0 and mp.lambda_minus <= 0:
        raise DivergentIntegral("E[1/lambda] diverges at the hard edge (D = N) without a ridge")
    inv = mp.expect(lambda x: 1.0 / (x * trace / D + ridge))
    return float(1.0 / (D * inv))


def predict_entropy_mp(D: int, N: int) -> float:
    """Entropy of D normalized MP eigenvalues: ``ln D - E[x ln x]``."""
    mp = MarchenkoPastur.create(D, N)
    return float(np.log(D) - mp.expect(lambda x: x * np.log(x)))


def predict_entropy_pt(d: int, numerical: bool = False) -> float:
    """Entropy of d^2 normalized Porter-Thomas numbers, ``ln d^2 - E[x ln x]``."""
    if d < 1:
        raise ValueError("d must be positive")
    if numerical:
        return float(np.log(d * d) - pt_expect(lambda x: x * np.log(x) if x > 0 else 0.0))
    return float(np.log(d * d) - PT_XLOGX)


def predict_fi_pt(d: int, trace: float, regularizer: float | None = None) -> float:
    """``1 / (d^2 E[1/(x trace/d^2 + reg)])`` for x ~ chi^2_1, reg = d^2 by default."""
    if d < 1:
        raise ValueError("d must be positive")
    reg = float(d * d) if regularizer is None else regularizer
    if reg <= 0:
        raise DivergentIntegral("E[1/x] diverges for Porter-Thomas without a regularizer")
    inv = pt_expect(lambda x: 1.0 / (x * trace / (d * d) + reg))
    return float(1.0 / (d * d * inv))


def normalized_spectrum(lam: np.ndarray) -> np.ndarray:
    """Eigenvalues rescaled to unit mean."""
    lam = np.asarray(lam, dtype=float)
    return lam * len(lam) / lam.sum()


def ks_mp(lam: np.ndarray, N: int) -> float:
    """KS distance between unit-mean eigenvalues and the MP law with D = len(lam)."""
    mp = MarchenkoPastur.create(len(lam), N)
    return float(stats.kstest(normalized_spectrum(lam), mp.cdf).statistic)


def ks_pt(lam: np.ndarray) -> float:
    return float(stats.kstest(normalized_spectrum(lam), pt_cdf).statistic)
