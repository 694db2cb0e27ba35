from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchaos.concentration import (
    FUNCTIONS,
    ConvergenceError,
    bipartite_typicality,
    empirical_deviation,
    evaluate,
    fannes_bound,
    levy_bound,
    page_entropy,
    quasispecies_equilibrium,
    quasispecies_rhs,
    random_fitness_concentration,
    reduced_state,
    reference_mean,
    sample_lipschitz_sphere,
    sample_uniform_sphere,
)
from qchaos.qcore import check_density


@given(st.integers(2, 300), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_samplers_unit_norm(n, seed):
    rng = np.random.default_rng(seed)
    for x in (sample_uniform_sphere(n, rng), sample_lipschitz_sphere(n, rng)):
        assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-10)
    assert np.all(sample_lipschitz_sphere(n, rng) >= 0)


def test_sampler_rejects_small_n(rng):
    with pytest.raises(ValueError):
        sample_uniform_sphere(1, rng)


def test_uniform_moments(rng):
    n = 1000
    x = sample_uniform_sphere(n, rng, size=10_000)
    assert x[:, 0].mean() == pytest.approx(0.0, abs=0.001)
    assert np.mean(x[:, 0] ** 2) == pytest.approx(1 / n, rel=0.1)


def test_lipschitz_marginals(rng):
    n, trials = 50, 20_000
    y = sample_lipschitz_sphere(n, rng, size=trials)
    assert np.allclose(np.mean(y**2, axis=0), 1 / n, atol=5 / np.sqrt(trials))


@pytest.mark.parametrize("sampler", ["uniform", "lipschitz"])
@pytest.mark.parametrize("tag", list(FUNCTIONS))
def test_reference_means_match_sampling(sampler, tag, rng):
    n = 40
    from qchaos.concentration import _sample

    vals = evaluate(tag, _sample(sampler, n, rng, 100_000))
    sem = vals.std() / np.sqrt(len(vals))
    assert vals.mean() == pytest.approx(reference_mean(tag, sampler, n), abs=5 * sem + 1e-12)


def test_deviation_below_levy(rng):
    p = empirical_deviation("x1", "uniform", 500, 0.2, 10_000, rng)
    assert p < 0.01
    assert p < levy_bound(500, 0.2)


@pytest.mark.parametrize("sampler", ["uniform", "lipschitz"])
@pytest.mark.parametrize("tag", list(FUNCTIONS))
def test_deviation_monotone_in_n(sampler, tag):
    eps = {"x1": 0.1, "linear": 0.1, "renyi2": 0.01}[tag]
    wins = 0
    for seed in range(3):
        rng = np.random.default_rng(seed)
        small = empirical_deviation(tag, sampler, 50, eps, 4000, rng)
        large = empirical_deviation(tag, sampler, 100, eps, 4000, rng)
        wins += large <= small
    assert wins >= 2


def test_deviation_bounded_coordinate(rng):
    assert empirical_deviation("x1", "uniform", 10, 2.0, 1000, rng) == 0.0


def test_deviation_errors(rng):
    with pytest.raises(ValueError):
        empirical_deviation("x1", "uniform", 10, 0.1, 10, rng)
    with pytest.raises(ValueError):
        empirical_deviation("max", "uniform", 10, 0.1, 1000, rng)
    with pytest.raises(ValueError):
        empirical_deviation("x1", "gaussian", 10, 0.1, 1000, rng)


def test_page_entropy_values():
    assert page_entropy(1, 7) == 0.0
    assert page_entropy(2, 2) == pytest.approx(1 / 3, abs=1e-15)
    assert page_entropy(8, 1024) == pytest.approx(np.log(8) - 8 / 2048, abs=1e-3)
    with pytest.raises(ValueError):
        page_entropy(4, 2)


@given(st.integers(2, 30), st.integers(0, 200))
def test_page_entropy_below_max(d_a, extra):
    assert page_entropy(d_a, d_a + extra) < np.log(d_a)


def test_fannes_bound_zero():
    assert fannes_bound(0.0, 4) == 0.0


def test_reduced_states_valid(rng):
    psi = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    psi /= np.linalg.norm(psi)
    check_density(reduced_state(psi, 3, 4))


def test_bipartite_haar_large_environment(rng):
    s = bipartite_typicality(2, 512, 500, "haar", rng)
    assert s.mean_entropy == pytest.approx(page_entropy(2, 512), abs=0.01)
    assert s.std_entropy < 0.02
    assert s.fannes_violations == 0


def test_bipartite_haar_two_qubits(rng):
    s = bipartite_typicality(2, 2, 2000, "haar", rng)
    assert s.mean_entropy == pytest.approx(1 / 3, abs=0.02)
    assert s.fannes_violations == 0


def test_bipartite_lipschitz_no_fannes_violations(rng):
    s = bipartite_typicality(3, 64, 200, "lipschitz", rng)
    assert s.fannes_violations == 0
    # first-orthant amplitudes are far from typical
    assert s.mean_entropy < page_entropy(3, 64)


def test_bipartite_errors(rng):
    with pytest.raises(ValueError):
        bipartite_typicality(2, 2, 10, "haar", rng)
    with pytest.raises(ValueError):
        bipartite_typicality(2, 2, 100, "gaussian", rng)


def test_quasispecies_no_mutation():
    s = quasispecies_equilibrium(np.array([1.0, 2.0, 5.0]), np.eye(3))
    assert np.allclose(s.equilibrium, [0, 0, 1], atol=1e-9)
    assert s.lambda_max == pytest.approx(5.0)


def test_quasispecies_matches_dense(rng):
    n = 50
    a = rng.uniform(1, 2, n)
    q = rng.random((n, n))
    q /= q.sum(axis=0)
    s = quasispecies_equilibrium(a, q)
    assert s.lambda_max == pytest.approx(np.max(np.linalg.eigvals(s.W).real), abs=1e-8)
    assert np.all(s.equilibrium >= 0)
    assert np.linalg.norm(s.W @ s.equilibrium - s.lambda_max * s.equilibrium) < 1e-8
    # stationary under one explicit Euler step
    step = 1e-2 * quasispecies_rhs(s.equilibrium, a, q)
    assert np.linalg.norm(step) < 1e-8


def test_quasispecies_validation():
    with pytest.raises(ValueError, match="column-stochastic"):
        quasispecies_equilibrium(np.ones(2), np.array([[0.5, 0.5], [0.6, 0.5]]))
    with pytest.raises(ValueError, match="positive"):
        quasispecies_equilibrium(np.array([1.0, 0.0]), np.eye(2))
    # eigenvalues +-sqrt(2): no dominant one, so power iteration cycles
    with pytest.raises(ConvergenceError):
        quasispecies_equilibrium(np.array([1.0, 2.0]), np.array([[0.0, 1.0], [1.0, 0.0]]), max_iter=100)


def test_fitness_concentrates(rng):
    a = rng.uniform(1, 2, 10_000)
    stats = random_fitness_concentration(a, 200, rng)
    assert stats.median_abs < 0.01


def test_page_entropy_exact_and_digamma_branches_agree():
    from qchaos.concentration import PAGE_EXACT_MAX

    assert page_entropy(2, 2) == 1 / 3
    exact = page_entropy(2, PAGE_EXACT_MAX // 2)
    # one step past the cutoff takes the digamma branch
    approx = page_entropy(2, PAGE_EXACT_MAX // 2 + 1)
    assert approx == pytest.approx(exact, abs=1e-6)
    assert approx > exact


@pytest.mark.parametrize("tag", list(FUNCTIONS))
@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_lipschitz_sampler_simplified_bound(tag, eps, rng):
    # every built-in f has |f_max| = 1 on the unit sphere, so the bound reads
    # P(|f - E f| >= 2 eps) <= eps
    assert empirical_deviation(tag, "lipschitz", 100, 2 * eps, 4000, rng) <= eps
