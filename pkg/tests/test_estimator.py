import numpy as np
import pytest
from sklearn.base import clone

from rrhmm import KernelRRHMM, SpectralRRHMM
from rrhmm.exceptions import UsageError
from rrhmm.hmm import exact_joint_prob, sample_sequence, sample_triples
from rrhmm.moments import population_moments, population_moments_stacked


def sticky_gaussian_sequence(length, seed, stay=0.95, sigma=0.5):
    rng = np.random.default_rng(seed)
    states = np.empty(length, dtype=int)
    states[0] = rng.integers(2)
    flips = rng.random(length) > stay
    for t in range(1, length):
        states[t] = states[t - 1] ^ flips[t]
    return (2 * states - 1 + sigma * rng.normal(size=length))[:, None]


def test_get_params_and_clone():
    est = SpectralRRHMM(k=2, window=2)
    params = est.get_params()
    assert params["k"] == 2 and params["window"] == 2
    other = clone(est)
    assert other.get_params() == params and other is not est
    est.set_params(k=3)
    assert est.k == 3


def test_kernel_get_params():
    est = KernelRRHMM(k=2, n_centers=5, whiten=True)
    assert clone(est).get_params()["n_centers"] == 5


def test_fit_moments_population(ex1):
    est = SpectralRRHMM(k=2).fit_moments(population_moments(ex1))
    assert est.k_ == 2 and est.n_symbols_ == 3
    assert est.sequence_probability([0, 2, 1]) == pytest.approx(
        exact_joint_prob(ex1, [0, 2, 1]), abs=1e-10)


def test_auto_rank(ex1, ex2):
    assert SpectralRRHMM().fit_moments(population_moments(ex1)).k_ == 2
    assert SpectralRRHMM(window=2).fit_moments(population_moments_stacked(ex2, 2)).k_ == 3


def test_fit_triples(ex1):
    est = SpectralRRHMM(k=2).fit(sample_triples(ex1, 20_000, seed=1))
    assert est.model_.B.shape == (3, 2, 2)
    proba = est.predict_proba([[0, 1], [2]])
    assert proba.shape == (2, 3)
    np.testing.assert_allclose(proba.sum(axis=1), 1, atol=1e-12)
    np.testing.assert_array_equal(est.predict([[0, 1], [2]]), proba.argmax(axis=1))


def test_fit_sequence_stacked(ex2):
    seq = sample_sequence(ex2, 50_000, seed=2)
    est = SpectralRRHMM(k=3, window=2, n_symbols=2).fit(seq)
    assert est.model_.window == 2 and est.model_.n == 2
    s = est.score_samples(seq[:200])
    assert s.shape == (200,) and np.all(np.isfinite(s))
    assert est.score(seq[:200]) == pytest.approx(s.mean())


def test_window_requires_sequence(ex1):
    with pytest.raises(UsageError):
        SpectralRRHMM(window=2).fit(sample_triples(ex1, 100, seed=0))


def test_rank_too_large(ex1):
    with pytest.raises(UsageError):
        SpectralRRHMM(k=5).fit_moments(population_moments(ex1))


def test_sample_deterministic(ex1):
    est = SpectralRRHMM(k=2).fit_moments(population_moments(ex1))
    a, b = est.sample(50, random_state=3), est.sample(50, random_state=3)
    assert np.array_equal(a, b) and a.max() < 3


def test_score_samples_telescope(ex1):
    est = SpectralRRHMM(k=2).fit_moments(population_moments(ex1))
    seq = sample_sequence(ex1, 30, seed=5)
    assert est.score_samples(seq).sum() == pytest.approx(
        np.log(exact_joint_prob(ex1, seq)), abs=1e-8)


def test_kernel_fit_and_score():
    X = sticky_gaussian_sequence(20_000, seed=0)
    est = KernelRRHMM(k=2, centers=[-1.0, 1.0]).fit(X)
    held = sticky_gaussian_sequence(500, seed=1)
    filtered = est.score_samples(held)
    marginal = est.marginal_score_samples(held)
    assert filtered.shape == marginal.shape == (500,)
    assert filtered.sum() > marginal.sum()


def test_kernel_default_centers_and_whitening():
    X = np.hstack([sticky_gaussian_sequence(3000, seed=2), np.zeros((3000, 1))])
    X[:, 1] = 3 * X[:, 0] + np.random.default_rng(0).normal(size=3000)
    est = KernelRRHMM(k=2, n_centers=8, whiten=True).fit(X)
    assert est.config_.n_centers == 8
    np.testing.assert_array_equal(est.config_.scale, [1.0, 1.0])
    assert np.isfinite(est.score(X[:100]))


def test_kernel_fit_triples():
    X = sticky_gaussian_sequence(3002, seed=4)
    triples = np.lib.stride_tricks.sliding_window_view(X, 3, axis=0).transpose(0, 2, 1)
    a = KernelRRHMM(k=2, centers=[-1.0, 1.0]).fit(triples)
    b = KernelRRHMM(k=2, centers=[-1.0, 1.0], bandwidth=a.config_.bandwidth).fit(X)
    np.testing.assert_allclose(a.moments_.P21, b.moments_.P21, atol=1e-14)
