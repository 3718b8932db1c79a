"""Classical comparison estimators: LS, covariance-based LMMSE, sparse recovery.

The genie variants consume side information explicitly (true per-sample
covariance, or the true channel for sparsity-order selection); nothing is
cached across observations for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, DivergedError
from .estimator import S_REG
from .observation import ObservationModel

DICT_DFT = "dft_oversampled"
DICT_KRON_DFT = "kron_dft"


@dataclass(frozen=True)
class Dictionary:
    """Unit-column sparsifying dictionary for compressed-sensing baselines."""

    matrix: np.ndarray
    oversampling: int
    kind: str

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[1]


def _oversampled_dft(n: int, oversampling: int) -> np.ndarray:
    l = oversampling * n
    grid = np.outer(np.arange(n), np.arange(l))
    return np.exp(2j * np.pi * grid / l) / np.sqrt(n)


def build_dictionary(model_kind: str, n, oversampling: int) -> Dictionary:
    """Oversampled DFT dictionary; for MIMO, a Kronecker product of per-side ones.

    ``n`` is the vector dimension, or a (n_rx, n_tx) pair for kind
    ``kron_dft`` where each side gets its own ``oversampling`` factor.
    """
    if oversampling not in (2, 4):
        raise ConfigError("oversampling must be 2 or 4")
    if model_kind == DICT_KRON_DFT:
        n_rx, n_tx = n
        d = np.kron(_oversampled_dft(n_tx, oversampling), _oversampled_dft(n_rx, oversampling))
        return Dictionary(matrix=d, oversampling=oversampling, kind=DICT_KRON_DFT)
    return Dictionary(matrix=_oversampled_dft(int(n), oversampling),
                      oversampling=oversampling, kind=DICT_DFT)


# -- least squares -------------------------------------------------------


class LsEstimator:
    """Pseudoinverse estimator with the pseudoinverse precomputed per model."""

    def __init__(self, model: ObservationModel):
        self.model = model
        self.pinv = np.linalg.pinv(model.a)

    def estimate(self, y: np.ndarray) -> np.ndarray:
        return self.pinv @ np.asarray(y, dtype=complex)

    def estimate_batch(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=complex) @ self.pinv.T


def ls_estimate(model: ObservationModel, y: np.ndarray) -> np.ndarray:
    return LsEstimator(model).estimate(y)


# -- covariance-based LMMSE ----------------------------------------------


def _lifted(s: np.ndarray) -> np.ndarray:
    """The same relative diagonal lift every covariance-based estimator uses."""
    m = s.shape[-1]
    tr = np.trace(s, axis1=-2, axis2=-1).real
    return s + (S_REG * np.maximum(tr, 1e-30) / m)[..., None, None] * np.eye(m)


def lmmse_filter(cov: np.ndarray, model: ObservationModel) -> np.ndarray:
    """W = C A^H (A C A^H + sigma2 I)^{-1} for a fixed covariance."""
    a = model.a
    ac = a @ cov
    s = _lifted(ac @ a.conj().T + model.sigma2 * np.eye(model.m))
    return np.linalg.solve(s, ac).conj().T


class SampleCovLmmse:
    """LMMSE from the training sample covariance (no mean subtraction)."""

    def __init__(self, train: np.ndarray, model: ObservationModel):
        train = np.asarray(train, dtype=complex)
        if train.ndim != 2 or train.shape[1] != model.n:
            raise DimensionError("training set must be (M, N)")
        self.cov = (train.T @ train.conj()) / train.shape[0]
        self.cov = 0.5 * (self.cov + self.cov.conj().T)
        self.model = model
        self.filter = lmmse_filter(self.cov, model)

    def with_model(self, model: ObservationModel) -> "SampleCovLmmse":
        clone = object.__new__(SampleCovLmmse)
        clone.cov = self.cov
        clone.model = model
        clone.filter = lmmse_filter(self.cov, model)
        return clone

    def estimate(self, y: np.ndarray) -> np.ndarray:
        return self.filter @ np.asarray(y, dtype=complex)

    def estimate_batch(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=complex) @ self.filter.T


def sample_cov_lmmse(train: np.ndarray, model: ObservationModel, y: np.ndarray) -> np.ndarray:
    return SampleCovLmmse(train, model).estimate(y)


def genie_lmmse(c_delta: np.ndarray, model: ObservationModel, y: np.ndarray) -> np.ndarray:
    """LMMSE with the observation's own true covariance (factored per call)."""
    return lmmse_filter(np.asarray(c_delta, dtype=complex), model) @ np.asarray(y, complex)


def genie_lmmse_batch(covs: np.ndarray, model: ObservationModel, y: np.ndarray) -> np.ndarray:
    """Per-observation genie LMMSE over stacked covariances (B, N, N)."""
    a = model.a
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    ac = np.einsum("ij,bjl->bil", a, covs)
    s = _lifted(ac @ a.conj().T + model.sigma2 * np.eye(model.m))
    z = np.linalg.solve(s, y[..., None])
    return np.einsum("bij,bi->bj", ac.conj(), z[..., 0])


# -- greedy sparse recovery ----------------------------------------------


def omp_genie(model: ObservationModel, dictionary: Dictionary, y: np.ndarray,
              h_true: np.ndarray, s_max: int | None = None) -> np.ndarray:
    """Orthogonal matching pursuit with genie-selected sparsity order.

    Runs OMP on the effective dictionary A D for orders 1..s_max and returns
    the reconstruction closest to the true channel; ties resolve to the
    smaller order.  Simulation-only: a performance bound, not an estimator
    deployable without the true channel.
    """
    y = np.asarray(y, dtype=complex)
    h_true = np.asarray(h_true, dtype=complex)
    d = dictionary.matrix
    phi = model.a @ d
    n_atoms = phi.shape[1]
    s_max = model.m if s_max is None else s_max
    s_max = min(s_max, n_atoms)
    scores_norm = np.linalg.norm(phi, axis=0)
    scores_norm[scores_norm == 0] = 1.0

    selected: list[int] = []
    residual = y.copy()
    best_err = np.inf
    best = np.zeros(d.shape[0], dtype=complex)
    available = np.ones(n_atoms, dtype=bool)
    for _ in range(s_max):
        scores = np.abs(phi.conj().T @ residual) / scores_norm
        scores[~available] = -1.0
        idx = int(np.argmax(scores))
        selected.append(idx)
        available[idx] = False
        coef, *_ = np.linalg.lstsq(phi[:, selected], y, rcond=None)
        residual = y - phi[:, selected] @ coef
        h_hat = d[:, selected] @ coef
        err = np.linalg.norm(h_true - h_hat)
        if err < best_err:
            best_err = err
            best = h_hat
    return best


def omp_genie_batch(model: ObservationModel, dictionary: Dictionary, y: np.ndarray,
                    h_true: np.ndarray, s_max: int | None = None) -> np.ndarray:
    out = np.empty_like(np.atleast_2d(h_true))
    for i, (yi, hi) in enumerate(zip(np.atleast_2d(y), np.atleast_2d(h_true))):
        out[i] = omp_genie(model, dictionary, yi, hi, s_max=s_max)
    return out


# -- approximate message passing ------------------------------------------


def _soft_threshold(u: np.ndarray, tau: np.ndarray) -> np.ndarray:
    mag = np.abs(u)
    scale = np.maximum(1.0 - tau / np.maximum(mag, 1e-300), 0.0)
    return u * scale


def amp_estimate(model: ObservationModel, dictionary: Dictionary, y: np.ndarray,
                 iterations: int = 100, alpha: float = 1.1) -> np.ndarray:
    """Complex AMP with soft thresholding and Onsager correction.

    The effective dictionary A D is column-normalized (undone on output).
    The threshold is alpha times the universal level sqrt(2 log L) scaled by
    the residual RMS; alpha is a documented tunable.  The iteration budget
    is fixed; nonconvergence within it is not an error.
    """
    single = np.asarray(y).ndim == 1
    out = amp_estimate_batch(model, dictionary, np.atleast_2d(y),
                             iterations=iterations, alpha=alpha)
    return out[0] if single else out


def amp_estimate_batch(model: ObservationModel, dictionary: Dictionary, y: np.ndarray,
                       iterations: int = 100, alpha: float = 1.1) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    d = dictionary.matrix
    phi = model.a @ d
    norms = np.linalg.norm(phi, axis=0)
    norms[norms == 0] = 1.0
    phi = phi / norms
    t_count, m = y.shape
    n_atoms = phi.shape[1]
    thresh_scale = alpha * np.sqrt(2.0 * np.log(n_atoms))

    coef = np.zeros((t_count, n_atoms), dtype=complex)
    z_prev = np.zeros_like(y)
    z = None
    for it in range(iterations):
        onsager = (np.count_nonzero(coef, axis=1) / m)[:, None] * z_prev
        z = y - coef @ phi.T + onsager
        if not np.all(np.isfinite(z)):
            raise DivergedError(f"AMP produced non-finite iterates at iteration {it}")
        sigma = np.linalg.norm(z, axis=1) / np.sqrt(m)
        coef = _soft_threshold(coef + z @ phi.conj(), thresh_scale * sigma[:, None])
        z_prev = z
    return (coef / norms) @ d.T
