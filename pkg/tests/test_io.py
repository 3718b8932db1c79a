"""Binary dataset/mixture formats and the CSV debug export."""

import numpy as np
import pytest

from gmmce import EmOptions, em_fit, kron_combine, rows_cols_split
from gmmce.errors import ConfigError
from gmmce.io import (export_dataset_csv, gmm_from_bytes, gmm_to_bytes, read_dataset,
                      read_gmm, write_dataset, write_gmm)
from gmmce.util import complex_randn


def test_dataset_roundtrip_bit_exact(tmp_path):
    samples = complex_randn(np.random.default_rng(0), 50, 7)
    path = tmp_path / "data.gmmc"
    write_dataset(path, samples)
    loaded = read_dataset(path)
    assert loaded.tobytes() == samples.tobytes()


def test_dataset_header(tmp_path):
    samples = complex_randn(np.random.default_rng(1), 3, 2)
    path = tmp_path / "data.gmmc"
    write_dataset(path, samples)
    raw = path.read_bytes()
    assert raw[:4] == b"GMMC"
    assert len(raw) == 20 + 3 * 2 * 16


def test_dataset_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.gmmc"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(ConfigError):
        read_dataset(path)


def test_dataset_csv_export(tmp_path):
    samples = np.array([[1.0 + 2.0j, -0.5j]])
    path = tmp_path / "data.csv"
    export_dataset_csv(path, samples)
    lines = path.read_text().splitlines()
    assert lines[0] == "re_0,im_0,re_1,im_1"
    values = [float(v) for v in lines[1].split(",")]
    assert values == [1.0, 2.0, 0.0, -0.5]


def _fitted(structure, rng):
    data = complex_randn(rng, 200, 4)
    gmm, _ = em_fit(data, 2, structure=structure, opts=EmOptions(max_iter=10))
    return gmm


def test_gmm_roundtrip_full(tmp_path):
    gmm = _fitted("full", np.random.default_rng(2))
    path = tmp_path / "full.gmmp"
    write_gmm(path, gmm)
    loaded = read_gmm(path)
    assert loaded.structure == "full"
    assert loaded.weights.tobytes() == gmm.weights.tobytes()
    assert loaded.means.tobytes() == gmm.means.tobytes()
    assert loaded.covs.tobytes() == gmm.covs.tobytes()


def test_gmm_roundtrip_circulant(tmp_path):
    gmm = _fitted("circulant", np.random.default_rng(3))
    path = tmp_path / "circ.gmmp"
    write_gmm(path, gmm)
    loaded = read_gmm(path)
    assert loaded.structure == "circulant"
    assert loaded.spectra.tobytes() == gmm.spectra.tobytes()
    assert loaded.covs.tobytes() == gmm.covs.tobytes()


def test_gmm_roundtrip_kronecker(tmp_path):
    rng = np.random.default_rng(4)
    data = complex_randn(rng, 300, 6)
    tx_d, rx_d = rows_cols_split(data, 3, 2)
    tx, _ = em_fit(tx_d, 2, opts=EmOptions(max_iter=5))
    rx, _ = em_fit(rx_d, 2, opts=EmOptions(max_iter=5))
    gmm = kron_combine(tx, rx, data)
    path = tmp_path / "kron.gmmp"
    write_gmm(path, gmm)
    loaded = read_gmm(path)
    assert loaded.structure == "kronecker"
    assert loaded.weights.tobytes() == gmm.weights.tobytes()
    assert loaded.covs.tobytes() == gmm.covs.tobytes()
    assert loaded.tx.covs.tobytes() == gmm.tx.covs.tobytes()
    assert loaded.rx.means.tobytes() == gmm.rx.means.tobytes()


def test_gmm_bytes_stable():
    gmm = _fitted("full", np.random.default_rng(5))
    blob = gmm_to_bytes(gmm)
    assert gmm_to_bytes(gmm_from_bytes(blob)) == blob
    assert blob[:4] == b"GMMP"
