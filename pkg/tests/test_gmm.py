"""Mixture densities, responsibilities, EM fitting, structure handling."""

import numpy as np
import pytest

from gmmce import (CovFactor, EmOptions, Gmm, complex_gaussian_logpdf,
                   covariance_param_count, em_fit, gmm_logpdf, kron_combine,
                   mean_log_likelihood, responsibilities, rows_cols_split)
from gmmce.errors import ConfigError
from gmmce.gmm import unitary_dft
from gmmce.util import complex_randn, hermitize, min_eig_ratio


def _random_pd(rng, n, scale=1.0):
    g = complex_randn(rng, n, n + 2)
    c = g @ g.conj().T / (n + 2)
    return hermitize(c * scale)


def _random_gmm(rng, k, n, mean_scale=1.0):
    weights = rng.random(k) + 0.2
    weights /= weights.sum()
    means = mean_scale * complex_randn(rng, k, n)
    covs = np.stack([_random_pd(rng, n) for _ in range(k)])
    return Gmm(weights=weights, means=means, covs=covs)


def _dense_logpdf(x, mu, cov):
    """Independent oracle: explicit inverse and determinant."""
    d = x - mu
    m = len(mu)
    quad = (d.conj() @ np.linalg.inv(cov) @ d).real
    return float(np.log(np.exp(-quad) / (np.pi ** m * np.linalg.det(cov).real)))


def test_logpdf_at_mean_scalar():
    factor = CovFactor(np.eye(1, dtype=complex))
    value = complex_gaussian_logpdf(np.zeros(1, complex), np.zeros(1, complex), factor)
    assert np.isclose(value, -1.1447298858494002, rtol=1e-14)  # -log(pi)


def test_logpdf_at_mean_multidim():
    for m in (2, 5, 9):
        factor = CovFactor(np.eye(m, dtype=complex))
        value = complex_gaussian_logpdf(np.zeros(m, complex), np.zeros(m, complex), factor)
        assert np.isclose(value, -m * np.log(np.pi), rtol=1e-14)


def test_logpdf_matches_dense_oracle():
    rng = np.random.default_rng(0)
    for _ in range(25):
        cov = _random_pd(rng, 3)
        mu = complex_randn(rng, 3)
        x = complex_randn(rng, 3) * 2
        ours = complex_gaussian_logpdf(x, mu, CovFactor(cov))
        assert np.isclose(ours, _dense_logpdf(x, mu, cov), rtol=1e-10, atol=1e-10)


def test_logpdf_rejects_indefinite():
    with pytest.raises(Exception):
        CovFactor(-np.eye(2, dtype=complex))


def test_responsibilities_single_component():
    gmm = _random_gmm(np.random.default_rng(1), 1, 3)
    r = responsibilities(complex_randn(np.random.default_rng(2), 3), gmm)
    np.testing.assert_allclose(r, [1.0], rtol=1e-14)


def test_responsibilities_identical_components_return_weights():
    rng = np.random.default_rng(3)
    cov = _random_pd(rng, 2)
    mu = complex_randn(rng, 2)
    gmm = Gmm(weights=np.array([0.3, 0.7]), means=np.stack([mu, mu]),
              covs=np.stack([cov, cov]))
    for _ in range(5):
        r = responsibilities(complex_randn(rng, 2) * 3, gmm)
        np.testing.assert_allclose(r, [0.3, 0.7], rtol=1e-12)


def test_responsibilities_symmetric_split():
    gmm = Gmm(weights=np.array([0.5, 0.5]),
              means=np.array([[1.0 + 0j], [-1.0 + 0j]]),
              covs=np.stack([np.eye(1, dtype=complex)] * 2))
    r = responsibilities(np.zeros(1, complex), gmm)
    np.testing.assert_allclose(r, [0.5, 0.5], rtol=1e-12)


def test_responsibilities_normalized_and_permutation_equivariant():
    rng = np.random.default_rng(4)
    gmm = _random_gmm(rng, 4, 3)
    x = complex_randn(rng, 10, 3)
    r = responsibilities(x, gmm)
    assert np.all(r >= 0)
    np.testing.assert_allclose(r.sum(axis=1), np.ones(10), atol=1e-12)
    perm = np.array([2, 0, 3, 1])
    permuted = Gmm(weights=gmm.weights[perm], means=gmm.means[perm], covs=gmm.covs[perm])
    np.testing.assert_allclose(responsibilities(x, permuted), r[:, perm], rtol=1e-10)


def test_em_single_component_closed_form():
    rng = np.random.default_rng(5)
    x = complex_randn(rng, 400, 3) + np.array([1.0, -1.0j, 0.5])
    opts = EmOptions(reg_eps=1e-6)
    gmm, report = em_fit(x, 1, opts=opts)
    np.testing.assert_allclose(gmm.weights, [1.0])
    np.testing.assert_allclose(gmm.means[0], x.mean(axis=0), rtol=1e-10)
    xc = x - x.mean(axis=0)
    scatter = hermitize((xc.T @ xc.conj()) / len(x))
    expected = scatter + 1e-6 * np.trace(scatter).real / 3 * np.eye(3)
    np.testing.assert_allclose(gmm.covs[0], expected, rtol=1e-8)
    assert report.converged


def test_em_recovers_separated_components():
    rng = np.random.default_rng(6)
    labels = rng.random(10_000) < 0.4
    x = np.where(labels[:, None], 10.0, -10.0) + complex_randn(rng, 10_000, 1)
    gmm, _ = em_fit(x, 2, opts=EmOptions(seed=1))
    means = np.sort(gmm.means[:, 0].real)
    assert abs(means[0] + 10.0) < 0.1 and abs(means[1] - 10.0) < 0.1
    np.testing.assert_allclose(np.sort(gmm.weights), [0.4, 0.6], atol=0.05)


@pytest.mark.parametrize("structure", ["full", "circulant"])
def test_em_loglik_monotone(structure):
    rng = np.random.default_rng(7)
    for trial in range(3):
        x = complex_randn(rng, 500, 6) * (1 + trial) + trial * complex_randn(rng, 1, 6)
        _, report = em_fit(x, 4, structure=structure, opts=EmOptions(seed=trial, max_iter=60))
        trace = np.asarray(report.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-8)


def test_em_circulant_covariances_diagonal_in_dft_basis():
    rng = np.random.default_rng(8)
    n = 8
    x = complex_randn(rng, 600, n)
    gmm, _ = em_fit(x, 3, structure="circulant", opts=EmOptions(max_iter=20))
    f = unitary_dft(n)
    for k in range(3):
        transformed = f @ gmm.covs[k] @ f.conj().T
        off = transformed - np.diag(np.diag(transformed))
        assert np.abs(off).max() < 1e-10 * np.abs(transformed).max()
        np.testing.assert_allclose(np.diag(transformed).real, gmm.spectra[k], rtol=1e-8)
        assert np.all(gmm.spectra[k] > 0)


def test_em_preserves_hermitian_psd():
    rng = np.random.default_rng(9)
    x = complex_randn(rng, 300, 5)
    gmm, _ = em_fit(x, 3, opts=EmOptions(max_iter=25))
    for cov in gmm.covs:
        assert np.abs(cov - cov.conj().T).max() <= 1e-12 * np.abs(cov).max()
        assert min_eig_ratio(cov) >= -1e-10


def test_em_rejects_k_above_m():
    with pytest.raises(ConfigError):
        em_fit(complex_randn(np.random.default_rng(0), 4, 2), 5)


def test_rows_cols_split_rank_one():
    n_rx = n_tx = 2
    h = np.zeros((n_rx, n_tx), dtype=complex)
    h[0, 0] = 1.0
    data = h.reshape(-1, order="F")[None, :]
    tx, rx = rows_cols_split(data, n_rx, n_tx)
    np.testing.assert_array_equal(rx, [[1, 0], [0, 0]])
    np.testing.assert_array_equal(tx, [[1, 0], [0, 0]])


def test_rows_cols_split_counts():
    data = complex_randn(np.random.default_rng(10), 100, 32)
    tx, rx = rows_cols_split(data, 8, 4)
    assert rx.shape == (400, 8)
    assert tx.shape == (800, 4)


def test_rows_cols_split_indexing_oracle():
    rng = np.random.default_rng(11)
    n_rx, n_tx, m = 3, 2, 4
    mats = complex_randn(rng, m, n_rx, n_tx)
    data = np.stack([mats[i].reshape(-1, order="F") for i in range(m)])
    tx, rx = rows_cols_split(data, n_rx, n_tx)
    for s in range(m):
        for j in range(n_tx):
            np.testing.assert_array_equal(rx[s * n_tx + j], mats[s][:, j])
        for i in range(n_rx):
            np.testing.assert_array_equal(tx[s * n_rx + i], mats[s][i, :])


def test_kron_combine_single_components():
    rng = np.random.default_rng(12)
    tx = _random_gmm(rng, 1, 2)
    rx = _random_gmm(rng, 1, 3)
    data = complex_randn(rng, 50, 6)
    combined = kron_combine(tx, rx, data)
    assert combined.num_components == 1
    np.testing.assert_allclose(combined.weights, [1.0])
    np.testing.assert_allclose(combined.covs[0], np.kron(tx.covs[0], rx.covs[0]), rtol=1e-12)
    np.testing.assert_allclose(combined.means[0], np.kron(tx.means[0], rx.means[0]), rtol=1e-12)


def test_kron_combine_weights_sum_to_one():
    rng = np.random.default_rng(13)
    tx = _random_gmm(rng, 2, 2)
    rx = _random_gmm(rng, 3, 2)
    combined = kron_combine(tx, rx, complex_randn(rng, 200, 4))
    assert combined.num_components == 6
    assert abs(combined.weights.sum() - 1.0) < 1e-12


def test_kron_combine_richer_model_dominates_on_held_out():
    # mixture data with genuinely separated per-side structure
    rng = np.random.default_rng(14)
    n_rx, n_tx, m = 4, 2, 4000
    covs_rx = [_random_pd(rng, n_rx, s) for s in (0.2, 3.0)]
    means_tx = [np.array([3.0, 0.0]), np.array([-3.0, 0.0])]
    mats = np.empty((m, n_rx, n_tx), dtype=complex)
    for i in range(m):
        a, b = rng.integers(2), rng.integers(2)
        chol = np.linalg.cholesky(covs_rx[b] + 1e-9 * np.eye(n_rx))
        noise = chol @ complex_randn(rng, n_rx, n_tx)
        mats[i] = noise + np.outer(np.ones(n_rx) * 0.5, means_tx[a])
    data = np.stack([mats[i].reshape(-1, order="F") for i in range(m)])
    train, held = data[:3000], data[3000:]

    def fit(k_tx, k_rx):
        tx_d, rx_d = rows_cols_split(train, n_rx, n_tx)
        tx, _ = em_fit(tx_d, k_tx, opts=EmOptions(seed=0, max_iter=60))
        rx, _ = em_fit(rx_d, k_rx, opts=EmOptions(seed=1, max_iter=60))
        return kron_combine(tx, rx, train)

    rich = mean_log_likelihood(held, fit(2, 2))
    poor = mean_log_likelihood(held, fit(1, 1))
    assert rich >= poor


def test_gmm_logpdf_reduces_to_component():
    rng = np.random.default_rng(15)
    gmm = _random_gmm(rng, 1, 3)
    x = complex_randn(rng, 3)
    expected = complex_gaussian_logpdf(x, gmm.means[0], gmm.factors[0])
    assert np.isclose(gmm_logpdf(x, gmm), expected, rtol=1e-12)


def test_gmm_logpdf_permutation_invariant():
    rng = np.random.default_rng(16)
    gmm = _random_gmm(rng, 4, 2)
    x = complex_randn(rng, 2)
    perm = np.array([3, 1, 0, 2])
    permuted = Gmm(weights=gmm.weights[perm], means=gmm.means[perm], covs=gmm.covs[perm])
    assert np.isclose(gmm_logpdf(x, gmm), gmm_logpdf(x, permuted), rtol=1e-12)


def test_gmm_logpdf_matches_direct_summation():
    rng = np.random.default_rng(17)
    gmm = _random_gmm(rng, 3, 2)
    for _ in range(10):
        x = complex_randn(rng, 2)
        direct = np.log(sum(
            w * np.exp(_dense_logpdf(x, mu, cov))
            for w, mu, cov in zip(gmm.weights, gmm.means, gmm.covs)))
        assert np.isclose(gmm_logpdf(x, gmm), direct, rtol=1e-10)


def test_covariance_param_count_reference_values():
    full = covariance_param_count("full", k=32, n=128)
    kron = covariance_param_count("kronecker", k_rx=8, n_rx=32, k_tx=4, n_tx=4)
    assert full == 264192
    assert kron == 4264
    assert covariance_param_count("circulant", k=16, n=64) == 1024


def test_covariance_param_count_from_gmm():
    rng = np.random.default_rng(18)
    gmm = _random_gmm(rng, 2, 4)
    assert gmm.covariance_param_count() == 2 * 4 * 5 // 2
