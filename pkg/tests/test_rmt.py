from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from qchaos.rmt import (
    PT_XLOGX,
    DivergentIntegral,
    MarchenkoPastur,
    ks_mp,
    mp_density,
    mp_support,
    predict_entropy_mp,
    predict_entropy_pt,
    predict_fi_mp,
    predict_fi_pt,
    pt_cdf,
    pt_density,
    pt_expect,
    sample_wishart,
)

D, N = 440, 2646
# Gell-Mann scale trace constraint for O0 = Jx at j = 10
TRACE = 2 * N * 770.0


def test_support_edges():
    assert mp_support(5, 5)[0] == 0.0
    lo, hi = mp_support(D, N)
    c = D / N
    assert (lo, hi) == pytest.approx(((1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2))
    with pytest.raises(ValueError):
        mp_support(10, 5)


def test_mp_density_unit_mass_on_grid():
    mp = MarchenkoPastur.create(D, N)
    # 10^4 points in the edge-regularizing variable l = lo + (hi - lo) sin^2 t
    t = np.linspace(0, np.pi / 2, 10_000)
    w = mp.lambda_plus - mp.lambda_minus
    lam = mp.lambda_minus + w * np.sin(t) ** 2
    mass = integrate.trapezoid(mp_density(mp, lam) * w * np.sin(2 * t), t)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert mp.expect(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-6)
    assert mp.expect(lambda x: x) == pytest.approx(1.0, abs=1e-6)


def test_mp_density_outside_support_is_zero():
    mp = MarchenkoPastur.create(D, N)
    assert np.all(mp_density(mp, [0.0, mp.lambda_minus * 0.5, mp.lambda_plus * 1.5]) == 0)
    assert np.all(mp_density(mp, np.linspace(0, 3, 200)) >= 0)


def test_mp_cdf_monotone():
    mp = MarchenkoPastur.create(D, N)
    x = np.linspace(0, 3, 50)
    c = mp.cdf(x)
    assert np.all(np.diff(c) >= -1e-12) and c[0] == 0 and c[-1] == 1


def test_wishart_single_row(rng):
    lam = sample_wishart(1, 4000, rng)
    assert lam.shape == (1,)
    assert lam[0] == pytest.approx(1.0, abs=5 / np.sqrt(4000))


def test_wishart_edges_and_ks(rng):
    lo, hi = mp_support(D, N)
    ks = []
    for _ in range(3):
        lam = sample_wishart(D, N, rng)
        assert np.all(lam >= 0)
        assert 0.5 * lo <= lam[0] <= 1.5 * lo
        assert 0.9 * hi <= lam[-1] <= 1.1 * hi
        ks.append(ks_mp(lam, N))
    assert max(ks) < 0.03


def test_pt_law():
    assert pt_expect(lambda x: 1.0) == pytest.approx(1.0, abs=1e-6)
    assert pt_expect(lambda x: x) == pytest.approx(1.0, abs=1e-6)
    assert pt_expect(lambda x: x * np.log(x) if x > 0 else 0.0) == pytest.approx(PT_XLOGX, abs=1e-7)
    mass, _ = integrate.quad(lambda x: pt_density(x)[0], 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert pt_cdf(0.0) == 0.0


def test_pt_heavier_near_zero_than_mp():
    mp = MarchenkoPastur.create(D, N)
    assert pt_cdf(0.1) > mp.cdf(0.1)[0]


def test_entropy_predictions():
    assert predict_entropy_pt(21) == pytest.approx(5.35941, abs=1e-4)
    assert predict_entropy_pt(21, numerical=True) == pytest.approx(predict_entropy_pt(21), abs=1e-8)
    assert predict_entropy_mp(D, N) == pytest.approx(6.00363, abs=1e-5)
    assert predict_entropy_mp(D, N) <= np.log(D)
    assert predict_entropy_pt(21) <= np.log(21**2)


def test_fi_pt_prediction():
    assert predict_fi_pt(21, TRACE) == pytest.approx(4.31174, abs=1e-5)
    with pytest.raises(DivergentIntegral):
        predict_fi_pt(21, TRACE, regularizer=0.0)


def test_fi_mp_closed_form_without_ridge():
    # E[1/x] = 1/(1 - c) for mean-one MP
    c = D / N
    assert predict_fi_mp(D, N, TRACE) == pytest.approx(TRACE / D**2 * (1 - c), rel=1e-8)


def test_fi_mp_linear_in_n():
    per_n = [predict_fi_mp(40, n, 2 * n * 10.0) / n for n in (100, 1000, 10_000)]
    # slope converges to the c -> 0 value
    assert per_n[2] == pytest.approx(2 * 10.0 / 40**2, rel=0.01)
    assert per_n[0] < per_n[1] < per_n[2]


def test_fi_mp_hard_edge_diverges():
    with pytest.raises(DivergentIntegral):
        predict_fi_mp(50, 50, 100.0)
    assert predict_fi_mp(50, 50, 100.0, ridge=1.0) > 0


def test_fi_mp_against_sampled_wisharts(rng):
    vals = []
    for _ in range(20):
        lam = sample_wishart(D, N, rng) * TRACE / D
        vals.append(1 / np.sum(1 / lam))
    assert np.mean(vals) == pytest.approx(predict_fi_mp(D, N, TRACE), rel=0.03)
