"""Mixture-of-LMMSE conditional-mean estimation with offline precomputation.

For a fitted mixture and a fixed observation model, all per-component
filters, projected means, and observation-space covariance factorizations
are computed once; each estimate is then a responsibility-weighted convex
combination of per-component LMMSE estimates.  Circulant mixtures observed
through the identity model additionally get an FFT fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import logsumexp

from .channels import SyntheticGmmPrior
from .errors import ConfigError, DimensionError, NumericError
from .gmm import LOG_PI, Gmm, STRUCTURE_CIRCULANT, _safe_log
from .observation import KIND_SIMO, ObservationModel

S_REG = 1e-12  # relative diagonal lift applied to every observation covariance


@dataclass(frozen=True)
class FastPath:
    """FFT-domain quantities for circulant covariances under identity observation."""

    gains: np.ndarray          # (K, N): spectrum / (spectrum + sigma2)
    fourier_means: np.ndarray  # (K, N)
    inv_noisy: np.ndarray      # (K, N): 1 / (spectrum + sigma2)
    logdets: np.ndarray        # (K,): sum log(spectrum + sigma2)


@dataclass(frozen=True)
class GmmEstimator:
    """Precomputed conditional-mean estimator for one (mixture, model) pair."""

    gmm: Gmm
    model: ObservationModel
    proj_means: np.ndarray  # (K, m): A mu_k
    chols: np.ndarray       # (K, m, m): lower factors of A C_k A^H + sigma2 I
    logdets: np.ndarray     # (K,)
    filters: np.ndarray     # (K, N, m): W_k = C_k A^H S_k^{-1}
    fast: FastPath | None = None

    # -- responsibilities ------------------------------------------------

    def log_joint(self, y: np.ndarray) -> np.ndarray:
        """log p(k) + log N(y; A mu_k, S_k) for a batch (T, m)."""
        y2 = np.atleast_2d(np.asarray(y, dtype=complex))
        if y2.shape[1] != self.model.m:
            raise DimensionError(f"observation dimension must be {self.model.m}")
        k = self.gmm.num_components
        m = self.model.m
        lj = np.empty((y2.shape[0], k))
        logw = self.gmm.log_weights
        for j in range(k):
            z = solve_triangular(self.chols[j], (y2 - self.proj_means[j]).T,
                                 lower=True, check_finite=False)
            quad = np.einsum("ij,ij->j", z.conj(), z).real
            lj[:, j] = logw[j] - m * LOG_PI - self.logdets[j] - quad
        return lj

    def responsibilities(self, y: np.ndarray) -> np.ndarray:
        """Posterior component probabilities given the observation."""
        lj = self.log_joint(y)
        r = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        return r[0] if np.asarray(y).ndim == 1 else r

    # -- estimation ------------------------------------------------------

    def component_lmmse(self, y: np.ndarray, k: int) -> np.ndarray:
        """W_k (y - A mu_k) + mu_k."""
        if not 0 <= k < self.gmm.num_components:
            raise IndexError(f"component index {k} out of range")
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.model.m,):
            raise DimensionError(f"observation dimension must be {self.model.m}")
        return self.filters[k] @ (y - self.proj_means[k]) + self.gmm.means[k]

    def estimate(self, y: np.ndarray) -> np.ndarray:
        """Responsibility-weighted combination of per-component LMMSE estimates."""
        resp = self.responsibilities(y)
        out = np.zeros(self.model.n, dtype=complex)
        for k in range(self.gmm.num_components):
            out += resp[k] * self.component_lmmse(y, k)
        return out

    def estimate_batch(self, y: np.ndarray) -> np.ndarray:
        """Vectorized estimate() over rows of y; uses the fast path if present."""
        if self.fast is not None:
            return self.estimate_fast_batch(y)
        y2 = np.atleast_2d(np.asarray(y, dtype=complex))
        lj = self.log_joint(y2)
        resp = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        out = np.zeros((y2.shape[0], self.model.n), dtype=complex)
        for k in range(self.gmm.num_components):
            comp = (y2 - self.proj_means[k]) @ self.filters[k].T + self.gmm.means[k]
            out += resp[:, k, None] * comp
        return out

    # -- FFT fast path ---------------------------------------------------

    def estimate_fast(self, y: np.ndarray) -> np.ndarray:
        """O(K N log N) estimate for circulant mixtures under identity observation."""
        return self.estimate_fast_batch(np.atleast_2d(np.asarray(y, complex)))[0]

    def estimate_fast_batch(self, y: np.ndarray) -> np.ndarray:
        if self.fast is None:
            raise ConfigError("fast path requires circulant structure, identity "
                              "observation, and white noise")
        fp = self.fast
        y2 = np.atleast_2d(np.asarray(y, dtype=complex))
        if y2.shape[1] != self.model.m:
            raise DimensionError(f"observation dimension must be {self.model.m}")
        yf = np.fft.fft(y2, axis=1, norm="ortho")
        t, n = y2.shape
        k = self.gmm.num_components
        lj = np.empty((t, k))
        logw = self.gmm.log_weights
        for j in range(k):
            quad = np.abs(yf - fp.fourier_means[j]) ** 2 @ fp.inv_noisy[j]
            lj[:, j] = logw[j] - n * LOG_PI - fp.logdets[j] - quad
        resp = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        acc = np.zeros((t, n), dtype=complex)
        for j in range(k):
            acc += resp[:, j, None] * (fp.gains[j] * (yf - fp.fourier_means[j]))
        return np.fft.ifft(acc, axis=1, norm="ortho") + resp @ self.gmm.means


def precompute(gmm: Gmm, model: ObservationModel) -> GmmEstimator:
    """Build all per-component quantities for repeated estimation.

    Observation covariances S_k = A C_k A^H + sigma2 I get a relative
    diagonal lift of 1e-12 before factorization so near-singular components
    at very high SNR stay factorizable; the same lift is applied by every
    covariance-based estimator in this package.
    """
    if gmm.dim != model.n:
        raise DimensionError(f"mixture dimension {gmm.dim} != model dimension {model.n}")
    a = model.a
    m = model.m
    identity_obs = model.kind == KIND_SIMO
    k = gmm.num_components

    ac = gmm.covs if identity_obs else np.einsum("ij,kjl->kil", a, gmm.covs)
    s = ac if identity_obs else ac @ a.conj().T
    s = s + model.sigma2 * np.eye(m)
    tr = np.einsum("kii->k", s).real
    s = s + (S_REG * np.maximum(tr, 1e-30) / m)[:, None, None] * np.eye(m)

    chols = np.empty_like(s)
    filters = np.empty((k, model.n, m), dtype=complex)
    for j in range(k):
        try:
            chols[j] = np.linalg.cholesky(s[j])
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"observation covariance of component {j} "
                               "is not positive definite") from exc
        # W = C A^H S^{-1} = (S^{-1} A C)^H since S and C are Hermitian
        filters[j] = cho_solve((chols[j], True), ac[j], check_finite=False).conj().T
    logdets = 2.0 * np.log(np.einsum("kii->ki", chols).real).sum(axis=1)
    proj_means = gmm.means if identity_obs else gmm.means @ a.T

    fast = None
    if gmm.structure == STRUCTURE_CIRCULANT and identity_obs:
        noisy = gmm.spectra + model.sigma2
        fast = FastPath(gains=gmm.spectra / noisy,
                        fourier_means=np.fft.fft(gmm.means, axis=1, norm="ortho"),
                        inv_noisy=1.0 / noisy,
                        logdets=np.log(noisy).sum(axis=1))
    return GmmEstimator(gmm=gmm, model=model, proj_means=np.asarray(proj_means),
                        chols=chols, logdets=logdets, filters=filters, fast=fast)


@dataclass(frozen=True)
class ExactCmeOracle:
    """Closed-form conditional mean under a known ground-truth mixture prior.

    Only defined for square, well-conditioned observation matrices, where
    the mixture estimator built from the true parameters is the exact
    conditional mean of the generative model.
    """

    prior: SyntheticGmmPrior
    model: ObservationModel
    estimator: GmmEstimator

    def cme(self, y: np.ndarray) -> np.ndarray:
        return self.estimator.estimate(y)

    def cme_batch(self, y: np.ndarray) -> np.ndarray:
        return self.estimator.estimate_batch(y)


def exact_cme_oracle(prior: SyntheticGmmPrior, model: ObservationModel,
                     max_cond: float = 1e8) -> ExactCmeOracle:
    if model.m != model.n:
        raise ConfigError("exact conditional mean requires a square observation matrix")
    cond = np.linalg.cond(model.a)
    if not cond < max_cond:
        raise ConfigError(f"observation matrix condition number {cond:.3g} too large")
    return ExactCmeOracle(prior=prior, model=model,
                          estimator=precompute(prior.gmm, model))


def exact_cme(oracle: ExactCmeOracle, y: np.ndarray) -> np.ndarray:
    return oracle.cme(y)
