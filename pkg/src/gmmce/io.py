"""Binary file formats for datasets and fitted mixtures, plus CSV debug export.

Dataset format (magic ``GMMC``): little-endian header of u32 version, u64
sample count, u32 dimension, followed by interleaved (re, im) f64 entries,
row-major per sample.

Mixture format (magic ``GMMP``): little-endian header of u32 version, u32
component count, u32 dimension, u8 structure tag; then weights, means, and
a structure-specific covariance payload (dense matrices, DFT-basis
eigenvalue vectors, or recursively embedded per-side mixtures).  Round
trips are bit-exact.
"""

from __future__ import annotations

import io as _io
import struct

import numpy as np

from .errors import ConfigError
from .gmm import Gmm, STRUCTURE_CIRCULANT, STRUCTURE_FULL, STRUCTURE_KRONECKER

DATASET_MAGIC = b"GMMC"
GMM_MAGIC = b"GMMP"
VERSION = 1

_STRUCT_TAGS = {STRUCTURE_FULL: 0, STRUCTURE_CIRCULANT: 1, STRUCTURE_KRONECKER: 2}
_TAG_STRUCTS = {v: k for k, v in _STRUCT_TAGS.items()}


def _complex_bytes(a: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(a, dtype=np.complex128).reshape(-1)
    return flat.view(np.float64).astype("<f8", copy=False).tobytes()


def _read_complex(buf, count: int) -> np.ndarray:
    raw = buf.read(16 * count)
    if len(raw) != 16 * count:
        raise ConfigError("truncated file")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).view(np.complex128)


def write_dataset(path, samples: np.ndarray) -> None:
    samples = np.ascontiguousarray(samples, dtype=np.complex128)
    if samples.ndim != 2:
        raise ConfigError("dataset must be (samples, dim)")
    m, n = samples.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIQI", DATASET_MAGIC, VERSION, m, n))
        f.write(_complex_bytes(samples))


def read_dataset(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, version, m, n = struct.unpack("<4sIQI", f.read(20))
        if magic != DATASET_MAGIC:
            raise ConfigError(f"bad dataset magic {magic!r}")
        if version != VERSION:
            raise ConfigError(f"unsupported dataset version {version}")
        return _read_complex(f, m * n).reshape(m, n)


def export_dataset_csv(path, samples: np.ndarray) -> None:
    """Debug export: one sample per row, columns re_0,im_0,...,re_{N-1},im_{N-1}."""
    samples = np.asarray(samples, dtype=np.complex128)
    m, n = samples.shape
    header = ",".join(f"re_{i},im_{i}" for i in range(n))
    stacked = np.empty((m, 2 * n))
    stacked[:, 0::2] = samples.real
    stacked[:, 1::2] = samples.imag
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header + "\n")
        for row in stacked:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_gmm_stream(f, gmm: Gmm) -> None:
    tag = _STRUCT_TAGS[gmm.structure]
    f.write(struct.pack("<4sIIIB", GMM_MAGIC, VERSION, gmm.num_components, gmm.dim, tag))
    f.write(np.ascontiguousarray(gmm.weights, dtype="<f8").tobytes())
    f.write(_complex_bytes(gmm.means))
    if gmm.structure == STRUCTURE_FULL:
        f.write(_complex_bytes(gmm.covs))
    elif gmm.structure == STRUCTURE_CIRCULANT:
        f.write(np.ascontiguousarray(gmm.spectra, dtype="<f8").tobytes())
    else:
        for factor in (gmm.tx, gmm.rx):
            blob = gmm_to_bytes(factor)
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)


def gmm_to_bytes(gmm: Gmm) -> bytes:
    buf = _io.BytesIO()
    _write_gmm_stream(buf, gmm)
    return buf.getvalue()


def _read_gmm_stream(f) -> Gmm:
    magic, version, k, n, tag = struct.unpack("<4sIIIB", f.read(17))
    if magic != GMM_MAGIC:
        raise ConfigError(f"bad mixture magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"unsupported mixture version {version}")
    if tag not in _TAG_STRUCTS:
        raise ConfigError(f"unknown structure tag {tag}")
    structure = _TAG_STRUCTS[tag]
    raw = f.read(8 * k)
    weights = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    means = _read_complex(f, k * n).reshape(k, n)
    if structure == STRUCTURE_FULL:
        covs = _read_complex(f, k * n * n).reshape(k, n, n)
        return Gmm(weights=weights, means=means, covs=covs, structure=structure)
    if structure == STRUCTURE_CIRCULANT:
        spectra = np.frombuffer(f.read(8 * k * n), dtype="<f8").astype(np.float64).reshape(k, n)
        from .gmm import unitary_dft
        from .util import hermitize
        dft = unitary_dft(n)
        covs = hermitize((dft.conj().T[None, :, :] * spectra[:, None, :]) @ dft)
        return Gmm(weights=weights, means=means, covs=covs,
                   structure=structure, spectra=spectra)
    (tx_len,) = struct.unpack("<Q", f.read(8))
    tx = gmm_from_bytes(f.read(tx_len))
    (rx_len,) = struct.unpack("<Q", f.read(8))
    rx = gmm_from_bytes(f.read(rx_len))
    covs = np.einsum("iab,jcd->ijacbd", tx.covs, rx.covs).reshape(k, n, n)
    return Gmm(weights=weights, means=means, covs=covs,
               structure=structure, tx=tx, rx=rx)


def gmm_from_bytes(blob: bytes) -> Gmm:
    return _read_gmm_stream(_io.BytesIO(blob))


def write_gmm(path, gmm: Gmm) -> None:
    with open(path, "wb") as f:
        _write_gmm_stream(f, gmm)


def read_gmm(path) -> Gmm:
    with open(path, "rb") as f:
        return _read_gmm_stream(f)
