import math

import numpy as np
import pytest

from rrhmm.diagnostics import (RECORD_FIELDS, SUMMARY_FIELDS, bound_quantities,
                               eigen_recovery_experiment, l1_error,
                               l1_error_experiment, match_eigenvalues, n0,
                               n_jobs, read_rows, theorem_sample_size,
                               true_eigenvalues, write_rows)
from rrhmm.moments import population_moments
from rrhmm.spectral import learn


def test_n0_full_epsilon():
    assert n0([0.2, 0.3, 0.5], 1.0) == 1


def test_n0_uniform():
    for n in (2, 5, 10):
        assert n0(np.full(n, 1 / n), 0.5) == math.ceil(n / 2)


def test_n0_zero_epsilon_counts_support():
    assert n0([0.5, 0.5, 0.0, 0.0], 0.0) == 2


def test_n0_monotone_in_epsilon():
    p = np.random.default_rng(0).dirichlet(np.ones(12))
    values = [n0(p, e) for e in np.linspace(0, 1, 41)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_theorem_n_monotone():
    base = dict(t=3, epsilon=0.1, eta=0.05, k=2, sigma_or=0.5, sigma_p21=0.1, n0_value=3)
    N = theorem_sample_size(**base)
    assert theorem_sample_size(**{**base, "epsilon": 0.05}) > N
    assert theorem_sample_size(**{**base, "eta": 0.01}) > N
    assert theorem_sample_size(**{**base, "sigma_p21": 0.05}) > N
    assert theorem_sample_size(**{**base, "t": 4}) > N
    assert theorem_sample_size(**{**base, "C": 2.0}) == pytest.approx(2 * N)


def test_bound_quantities_example1(ex1):
    U = learn(population_moments(ex1), 2).U
    rep = bound_quantities(ex1, U)
    for v in (rep.sigma_k_P21, rep.sigma_k_OR, rep.sigma_k_UOR, rep.theorem_N):
        assert v > 0 and np.isfinite(v)
    assert rep.n0_of_scaled_eps >= rep.n0_of_eps
    assert rep.scaled_epsilon < rep.epsilon


def test_bound_quantities_without_u(ex2):
    rep = bound_quantities(ex2, window=2)
    assert np.isnan(rep.sigma_k_UOR) and rep.sigma_k_P21 > 0


def test_true_eigenvalues(ex2):
    np.testing.assert_allclose(true_eigenvalues(ex2), [1.0, 0.72686293, 0.34536971], atol=1e-7)


def test_match_eigenvalues_is_permutation():
    true = np.array([1.0, 0.5, 0.2])
    est = np.array([0.21, 0.98, 0.52])
    out = match_eigenvalues(true, est)
    np.testing.assert_allclose(out, [0.98, 0.52, 0.21])
    assert sorted(out.real) == sorted(est)


def test_match_eigenvalues_complex_pair():
    true = np.array([1.0, 0.5 + 0.2j, 0.5 - 0.2j])
    est = np.array([0.49 - 0.21j, 1.01, 0.51 + 0.19j])
    np.testing.assert_allclose(match_eigenvalues(true, est), [1.01, 0.51 + 0.19j, 0.49 - 0.21j])


def test_population_l1_zero(suite_model):
    _, params, window = suite_model
    from rrhmm.moments import population_moments_stacked
    model = learn(population_moments_stacked(params, window), params.k)
    t = 3 if params.n <= 4 else 2
    assert l1_error(model, params, t) <= 1e-8


def test_eigen_recovery_small(ex1):
    res = eigen_recovery_experiment(ex1, Ns=(2000,), trials=3, seed=1)
    assert res.trials == [0, 1, 2]
    assert res.estimates_for(2000).shape == (3, 2)
    # the leading eigenvalue is pinned near one by construction
    assert abs(res.mean(2000)[0] - 1) < 0.05
    assert np.all(res.half_width(2000) >= 0)


def test_eigen_recovery_deterministic(ex1, monkeypatch):
    a = eigen_recovery_experiment(ex1, Ns=(1000,), trials=2, seed=7)
    monkeypatch.setenv("SPECTRAL_RRHMM_THREADS", "2")
    assert n_jobs() == 2
    b = eigen_recovery_experiment(ex1, Ns=(1000,), trials=2, seed=7)
    for key in a.estimated:
        np.testing.assert_array_equal(a.estimated[key], b.estimated[key])


def test_n_jobs_bad_value(monkeypatch):
    monkeypatch.setenv("SPECTRAL_RRHMM_THREADS", "lots")
    assert n_jobs() == 1


def test_l1_experiment_shape(ex1):
    res = l1_error_experiment(ex1, Ns=(1000, 4000), trials=2, seed=0)
    assert len(res.errors_for(1000)) == 2
    assert all(e >= 0 for e in res.errors.values())


def test_csv_roundtrip(tmp_path, ex2):
    res = eigen_recovery_experiment(ex2, Ns=(1500,), trials=2, seed=3, window=2)
    path = tmp_path / "trials.csv"
    write_rows(path, RECORD_FIELDS, res.records())
    rows = read_rows(path)
    assert list(rows[0]) == RECORD_FIELDS
    assert len(rows) == 2 * 3
    for row, rec in zip(rows, res.records()):
        assert row["estimated_value"] == rec[5]
    spath = tmp_path / "summary.csv"
    write_rows(spath, SUMMARY_FIELDS, res.summary())
    srows = read_rows(spath)
    assert list(srows[0]) == SUMMARY_FIELDS and len(srows) == 3
