"""Observation models, pilot patterns, and noisy observation draws."""

import numpy as np
import pytest

from gmmce import (make_pattern, mimo_model, model_from_json, model_to_json, observe,
                   observe_batch, simo_model, snr_db_to_sigma2, wideband_model,
                   PilotPattern)
from gmmce.errors import ConfigError, DimensionError
from gmmce.observation import dft_pilot_matrix
from gmmce.util import complex_randn


def _vec(x):
    return np.asarray(x).reshape(-1, order="F")


def test_simo_model_is_identity():
    model = simo_model(4, 0.1)
    np.testing.assert_array_equal(model.a, np.eye(4))
    assert model.m == model.n == 4


def test_simo_ls_identity():
    model = simo_model(4, 0.1)
    y = complex_randn(np.random.default_rng(0), 4)
    np.testing.assert_allclose(np.linalg.pinv(model.a) @ y, y, rtol=1e-12)


def test_snr_roundtrip():
    assert np.isclose(snr_db_to_sigma2(10.0), 0.1)
    assert np.isclose(snr_db_to_sigma2(0.0), 1.0)
    assert np.isclose(snr_db_to_sigma2(-10.0), 10.0)


def test_mimo_identity_pilot_hook():
    model = mimo_model(3, 2, 2, 0.1, pilot_matrix=np.eye(2))
    np.testing.assert_array_equal(model.a, np.eye(6))


def test_mimo_dims():
    model = mimo_model(32, 4, 4, 0.1)
    assert model.a.shape == (128, 128)


def test_mimo_vec_identity():
    # A vec(H) = vec(H P) for the column-stacking convention
    rng = np.random.default_rng(1)
    n_rx, n_tx, n_p = 5, 3, 2
    model = mimo_model(n_rx, n_tx, n_p, 0.1)
    p = dft_pilot_matrix(n_tx, n_p)
    h = complex_randn(rng, n_rx, n_tx)
    np.testing.assert_allclose(model.a @ _vec(h), _vec(h @ p), rtol=1e-10, atol=1e-12)


def test_mimo_gram_identity():
    n_rx, n_tx, n_p = 3, 4, 2
    model = mimo_model(n_rx, n_tx, n_p, 0.1)
    p = dft_pilot_matrix(n_tx, n_p)
    expected = np.kron(p.conj() @ p.T, np.eye(n_rx))
    np.testing.assert_allclose(model.a.conj().T @ model.a, expected, rtol=1e-10, atol=1e-12)


def test_pilot_matrix_unit_columns():
    for n_tx, n_p in [(4, 2), (4, 4), (2, 6)]:
        p = dft_pilot_matrix(n_tx, n_p)
        np.testing.assert_allclose(np.linalg.norm(p, axis=0), np.ones(n_p), rtol=1e-12)
        assert np.linalg.matrix_rank(p) == min(n_tx, n_p)


def test_wideband_full_selection_is_permutation():
    pattern = make_pattern("block", 3, 2, 6)
    model = wideband_model(pattern, 0.1)
    a = model.a.real
    assert a.shape == (6, 6)
    assert np.array_equal(np.sort(np.argmax(a, axis=1)), np.arange(6))
    np.testing.assert_array_equal(a @ a.T, np.eye(6))


def test_wideband_selects_pilot_entries():
    rng = np.random.default_rng(2)
    pattern = make_pattern("comb", 8, 4, 8)
    model = wideband_model(pattern, 0.1)
    h = complex_randn(rng, 8, 4)
    y = model.a @ _vec(h)
    for r, (c, t) in enumerate(pattern.positions):
        assert y[r] == h[c, t]


def test_wideband_row_and_column_sums():
    pattern = make_pattern("lattice", 12, 4, 8)
    a = wideband_model(pattern, 0.1).a.real
    np.testing.assert_array_equal(a.sum(axis=1), np.ones(8))
    assert a.sum(axis=0).max() <= 1.0


def test_block_pattern_fills_earliest_symbols():
    pattern = make_pattern("block", 4, 3, 8)
    expected = {(c, 0) for c in range(4)} | {(c, 1) for c in range(4)}
    assert set(pattern.positions) == expected


def test_comb_pattern_spacing():
    n_c, n_t, n_p = 24, 4, 24
    pattern = make_pattern("comb", n_c, n_t, n_p)
    assert pattern.n_p == n_p
    per_symbol = sorted(c for c, t in pattern.positions if t == 0)
    assert len(per_symbol) == n_p // n_t
    gaps = np.diff(per_symbol)
    assert abs(gaps.mean() - n_c * n_t / n_p) <= 1.0


def test_lattice_pattern_offsets_alternate():
    pattern = make_pattern("lattice", 8, 4, 16)
    even = sorted(c for c, t in pattern.positions if t == 0)
    odd = sorted(c for c, t in pattern.positions if t == 1)
    spacing = 8 // 4
    assert odd == [(c + spacing // 2) % 8 for c in even] or \
           sorted((c + spacing // 2) % 8 for c in even) == odd
    assert len(set(pattern.positions)) == 16


def test_comb_pattern_infeasible():
    with pytest.raises(ConfigError):
        make_pattern("comb", 8, 3, 8)  # not divisible by n_t


def test_pattern_rejects_duplicates():
    with pytest.raises(ConfigError):
        PilotPattern(layout="block", n_c=4, n_t=2, positions=((0, 0), (0, 0)))


def test_observe_noiseless():
    model = simo_model(3, 0.0)
    h = np.array([1.0, 2.0j, -1.0])
    y = observe(np.random.default_rng(0), model, h)
    np.testing.assert_array_equal(y, h)


def test_observe_noise_power():
    model = simo_model(6, 0.5)
    rng = np.random.default_rng(11)
    zeros = np.zeros((100_000, 6), dtype=complex)
    y = observe_batch(rng, model, zeros)
    power = np.mean(np.sum(np.abs(y) ** 2, axis=1))
    assert abs(power - 6 * 0.5) / (6 * 0.5) < 0.02


def test_observe_deterministic():
    model = simo_model(4, 0.3)
    h = complex_randn(np.random.default_rng(1), 4)
    y1 = observe(np.random.default_rng(7), model, h)
    y2 = observe(np.random.default_rng(7), model, h)
    assert y1.tobytes() == y2.tobytes()


def test_observe_dimension_mismatch():
    with pytest.raises(DimensionError):
        observe(np.random.default_rng(0), simo_model(4, 0.1), np.zeros(3))


def test_model_json_roundtrip():
    models = [simo_model(8, 0.25),
              mimo_model(4, 2, 2, 0.5),
              wideband_model(make_pattern("lattice", 12, 4, 8), 2.0)]
    for model in models:
        clone = model_from_json(model_to_json(model))
        assert clone.a.tobytes() == model.a.tobytes()
        assert clone.sigma2 == model.sigma2 and clone.kind == model.kind
