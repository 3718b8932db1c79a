"""Shared helpers: seeded RNG streams and small complex-linalg utilities."""

from __future__ import annotations

import numpy as np

# Fixed domain tags so that independent parts of a run derive independent,
# order-insensitive RNG streams from one master seed.
DOMAIN_TRAIN = 1
DOMAIN_TEST = 2
DOMAIN_NOISE = 3
DOMAIN_FIT = 4
DOMAIN_PRIOR = 5
DOMAIN_BALL = 6


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Derive a dedicated RNG stream from (master seed, integer path).

    Streams for distinct paths are statistically independent and do not
    depend on the order in which they are created, so parallel callers get
    identical results regardless of scheduling.
    """
    return np.random.default_rng(np.random.SeedSequence((int(master_seed),) + tuple(int(p) for p in path)))


def complex_randn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Draw circular standard complex Gaussians, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Symmetrize the (stack of) matrices to exact Hermitian form."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def is_hermitian(a: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(np.abs(a).max(), 1e-300)
    return bool(np.abs(a - a.conj().T).max() <= rtol * scale)


def min_eig_ratio(a: np.ndarray) -> float:
    """Smallest eigenvalue over largest, for PSD checks with relative slack."""
    ev = np.linalg.eigvalsh(a)
    top = max(ev[-1], 1e-300)
    return float(ev[0] / top)
