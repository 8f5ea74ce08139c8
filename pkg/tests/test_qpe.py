import numpy as np
import pytest

from conftest import random_hermitian, random_state
from ofqsim.hamiltonian import DenseHamiltonian
from ofqsim.qpe import (Posterior, PosteriorCollapseError, QpeConfig,
                        bayesian_update, circuit_outcome_probabilities,
                        estimate_ground_energy, outcome_probability,
                        sample_outcome)
from ofqsim.statevector import StateVector


def test_outcome_probability_formula():
    assert outcome_probability(0.0, 1, 0.0, 0, dt=1.0) == 1.0
    assert outcome_probability(0.0, 1, 0.0, 1, dt=1.0) == 0.0
    # k mu dt + beta = pi/2 -> both outcomes 1/2
    assert outcome_probability(np.pi / 2, 1, 0.0, 0, dt=1.0) == pytest.approx(0.5)
    assert outcome_probability(0.0, 3, np.pi / 2, 1, dt=1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        outcome_probability(0.0, 1, 0.0, 2, dt=1.0)


def test_outcomes_sum_to_one(rng):
    for _ in range(50):
        mu, beta = rng.uniform(-5, 5), rng.uniform(0, 2 * np.pi)
        k = int(rng.integers(1, 64))
        total = (outcome_probability(mu, k, beta, 0, 0.17)
                 + outcome_probability(mu, k, beta, 1, 0.17))
        assert total == pytest.approx(1.0, abs=1e-15)


def test_circuit_matches_formula_on_eigenstates(rng):
    h = DenseHamiltonian(random_hermitian(rng, 8))
    w, v = h.eigh()
    for i in (0, 3, 7):
        st = StateVector.from_amplitudes(h.layout(), v[:, i])
        for k, beta, dt in ((1, 0.3, 0.11), (4, -1.2, 0.07), (16, 2.0, 0.05)):
            p0, p1 = circuit_outcome_probabilities(st, h, k, beta, dt)
            assert p0 == pytest.approx(outcome_probability(w[i], k, beta, 0, dt), abs=1e-10)
            assert p1 == pytest.approx(outcome_probability(w[i], k, beta, 1, dt), abs=1e-10)


def test_zero_hamiltonian_always_zero_outcome(rng):
    h = DenseHamiltonian(np.zeros((4, 4)))
    st = StateVector.from_amplitudes(h.layout(), random_state(rng, 4))
    for seed in range(20):
        m = sample_outcome(st, h, 3, 0.0, 0.2, np.random.default_rng(seed))
        assert m == 0


def test_sampled_frequency_matches_probability(rng):
    h = DenseHamiltonian(random_hermitian(rng, 8))
    w, v = h.eigh()
    st = StateVector.from_amplitudes(h.layout(), v[:, 2])
    k, beta, dt = 3, 0.8, 0.09
    p1 = outcome_probability(w[2], k, beta, 1, dt)
    n = 4000
    draw_rng = np.random.default_rng(123)
    hits = sum(sample_outcome(st, h, k, beta, dt, draw_rng) for _ in range(n))
    sigma = np.sqrt(n * p1 * (1 - p1))
    assert abs(hits - n * p1) < 3.5 * sigma


def test_mixture_of_eigenstates(rng):
    h = DenseHamiltonian(random_hermitian(rng, 8))
    w, v = h.eigh()
    c0, c1 = np.sqrt(0.7), np.sqrt(0.3)
    psi = c0 * v[:, 0] + c1 * v[:, 5]
    st = StateVector.from_amplitudes(h.layout(), psi)
    k, beta, dt = 5, 0.4, 0.08
    p0, _ = circuit_outcome_probabilities(st, h, k, beta, dt)
    expected = (0.7 * outcome_probability(w[0], k, beta, 0, dt)
                + 0.3 * outcome_probability(w[5], k, beta, 0, dt))
    assert p0 == pytest.approx(expected, abs=1e-10)


def test_posterior_basics():
    post = Posterior.uniform(-1.0, 1.0, 128)
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert post.mean() == pytest.approx(0.0, abs=1e-12)
    g = Posterior.gaussian(2.0, 0.5, 512)
    assert g.mean() == pytest.approx(2.0, abs=1e-6)
    assert g.std() == pytest.approx(0.5, rel=1e-2)


def test_bayesian_update_uninformative_likelihood():
    post = Posterior.uniform(0.0, 0.0001, 64)  # k mu dt ~ 0 for all candidates
    # beta = pi/2 makes every candidate's likelihood ~ 1/2
    upd = bayesian_update(post, 0, 1, np.pi / 2, dt=1.0)
    assert np.allclose(upd.weights, post.weights, atol=1e-6)


def test_bayesian_update_two_candidates():
    post = Posterior(np.array([0.0, np.pi]), np.array([0.5, 0.5]))
    # with k=1, beta=0, dt=1: p(0 | mu=0) = 1, p(0 | mu=pi) = 0
    upd = bayesian_update(post, 0, 1, 0.0, dt=1.0)
    assert upd.weights[0] == pytest.approx(1.0, abs=1e-14)
    assert upd.weights[1] == pytest.approx(0.0, abs=1e-14)


def test_bayesian_update_normalized_after_many(rng):
    post = Posterior.uniform(-2, 2, 256)
    for _ in range(100):
        m = int(rng.integers(0, 2))
        k = int(rng.integers(1, 32))
        post = bayesian_update(post, m, k, float(rng.uniform(0, 2 * np.pi)), dt=0.3)
        assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(post.weights >= 0)


def test_posterior_collapse_raises():
    post = Posterior(np.array([np.pi]), np.array([1.0]))
    with pytest.raises(PosteriorCollapseError):
        bayesian_update(post, 0, 1, 0.0, dt=1.0)  # likelihood exactly zero


def test_synthetic_consistency(rng):
    # outcomes drawn at true mu concentrate the posterior around mu
    true_mu = 1.37
    post = Posterior.uniform(0.0, 3.0, 2048)
    dt = np.pi / 3.0
    k = 1
    for i in range(400):
        p1 = outcome_probability(true_mu, k, np.pi / 2 - k * post.mean() * dt, 1, dt)
        beta = np.pi / 2 - k * post.mean() * dt
        m = int(rng.random() < p1)
        post = bayesian_update(post, m, k, beta, dt)
        k = int(np.clip(0.8 / (max(post.std(), 1e-12) * dt), 1, 1024))
    assert abs(post.mean() - true_mu) < max(post.std(), 1e-4)


def test_estimate_constant_hamiltonian(rng):
    h = DenseHamiltonian(2.5 * np.eye(8))
    st = StateVector.from_amplitudes(h.layout(), random_state(rng, 8))
    res = estimate_ground_energy(st, h, QpeConfig(samples=300),
                                 np.random.default_rng(0))
    assert abs(res.mean - 2.5) < 1e-6


def test_estimate_zero_budget_flagged(rng):
    h = DenseHamiltonian(random_hermitian(rng, 8))
    st = StateVector.from_amplitudes(h.layout(), random_state(rng, 8))
    res = estimate_ground_energy(st, h, QpeConfig(samples=0, prior=(-5.0, 5.0)),
                                 np.random.default_rng(0))
    assert res.samples_used == 0
    assert not res.reached_target
    assert res.mean == pytest.approx(0.0, abs=1e-10)  # prior mean


def test_estimate_ground_energy_eigenstate(rng):
    h = DenseHamiltonian(random_hermitian(rng, 16))
    w, v = h.eigh()
    st = StateVector.from_amplitudes(h.layout(), v[:, 0])
    res = estimate_ground_energy(st, h, QpeConfig(samples=1000),
                                 np.random.default_rng(42))
    assert abs(res.mean - w[0]) < 1e-3 * (w[-1] - w[0])
    assert len(res.transcript) == res.samples_used


def test_transcript_csv(tmp_path, rng):
    h = DenseHamiltonian(random_hermitian(rng, 8))
    _, v = h.eigh()
    st = StateVector.from_amplitudes(h.layout(), v[:, 0])
    res = estimate_ground_energy(st, h, QpeConfig(samples=50),
                                 np.random.default_rng(3))
    path = tmp_path / "transcript.csv"
    res.transcript_to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "sample,k,beta,m,posterior_mean,posterior_std"
    assert len(lines) == 51


def test_config_validation():
    with pytest.raises(ValueError):
        QpeConfig(samples=-1)
    with pytest.raises(ValueError):
        QpeConfig(grid_size=1)
    with pytest.raises(ValueError):
        QpeConfig(k_scale=0.0)
