"""Complex Gaussian mixture models: densities, responsibilities, EM fitting.

Covariances can be unconstrained (``full``), diagonalized by the unitary DFT
(``circulant``), or Kronecker products of independently fitted transmit- and
receive-side mixtures (``kronecker``).  All densities use the circular
(proper) complex Gaussian convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import ConfigError, DimensionError, NumericError
from .util import hermitize

LOG_PI = float(np.log(np.pi))

STRUCTURE_FULL = "full"
STRUCTURE_CIRCULANT = "circulant"
STRUCTURE_KRONECKER = "kronecker"
_STRUCTURES = (STRUCTURE_FULL, STRUCTURE_CIRCULANT, STRUCTURE_KRONECKER)


class CovFactor:
    """Cholesky factorization of a Hermitian PD matrix with cached logdet."""

    __slots__ = ("chol", "logdet")

    def __init__(self, cov: np.ndarray, label: str = "covariance"):
        try:
            self.chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"{label} is not positive definite") from exc
        self.logdet = 2.0 * float(np.log(np.diag(self.chol).real).sum())

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Solve L z = x columnwise (x holds vectors in its columns)."""
        return solve_triangular(self.chol, x, lower=True, check_finite=False)


def unitary_dft(n: int) -> np.ndarray:
    """Unitary DFT matrix F with F @ x == fft(x, norm="ortho")."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


@dataclass(frozen=True)
class Gmm:
    """K-component complex Gaussian mixture.

    ``covs`` always holds the dense component covariances.  For structured
    mixtures the generating representation is kept alongside: ``spectra``
    (real DFT-basis eigenvalue vectors) for circulant covariances, and the
    per-side factor mixtures ``tx``/``rx`` for Kronecker covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    structure: str = STRUCTURE_FULL
    spectra: np.ndarray | None = None
    tx: "Gmm | None" = None
    rx: "Gmm | None" = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=complex)
        c = np.asarray(self.covs, dtype=complex)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", c)
        k = w.shape[0]
        if mu.shape[0] != k or c.shape[0] != k or mu.ndim != 2 or c.shape[1:] != (mu.shape[1],) * 2:
            raise DimensionError("inconsistent weights/means/covs shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be nonnegative and sum to 1")
        scale = max(np.abs(c).max(), 1e-300)
        if np.abs(c - np.conj(np.swapaxes(c, -1, -2))).max() > 1e-10 * scale:
            raise ConfigError("covariances must be Hermitian")
        if self.structure not in _STRUCTURES:
            raise ConfigError(f"unknown structure {self.structure!r}")
        if self.structure == STRUCTURE_CIRCULANT:
            if self.spectra is None or np.any(np.asarray(self.spectra) <= 0):
                raise ConfigError("circulant structure requires positive spectra")
            object.__setattr__(self, "spectra", np.asarray(self.spectra, dtype=float))
        if self.structure == STRUCTURE_KRONECKER and (self.tx is None or self.rx is None):
            raise ConfigError("kronecker structure requires tx and rx factors")

    @property
    def num_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def factors(self) -> list[CovFactor]:
        return [CovFactor(self.covs[k], f"component {k} covariance") for k in range(self.num_components)]

    @cached_property
    def log_weights(self) -> np.ndarray:
        return _safe_log(self.weights)

    def covariance_param_count(self) -> int:
        return covariance_param_count(
            self.structure, k=self.num_components, n=self.dim,
            k_tx=None if self.tx is None else self.tx.num_components,
            n_tx=None if self.tx is None else self.tx.dim,
            k_rx=None if self.rx is None else self.rx.num_components,
            n_rx=None if self.rx is None else self.rx.dim)


def _safe_log(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(w > 0, np.log(np.maximum(w, 1e-300)), -np.inf)


def covariance_param_count(structure: str, *, k: int | None = None, n: int | None = None,
                           k_tx: int | None = None, n_tx: int | None = None,
                           k_rx: int | None = None, n_rx: int | None = None) -> int:
    """Number of covariance parameters of a mixture.

    A Hermitian n x n matrix carries n(n+1)/2 parameter slots; a circulant
    one carries n (its DFT-basis eigenvalues); a Kronecker mixture counts
    both factor mixtures.
    """
    if structure == STRUCTURE_FULL:
        return k * (n * (n + 1)) // 2
    if structure == STRUCTURE_CIRCULANT:
        return k * n
    if structure == STRUCTURE_KRONECKER:
        return (k_rx * (n_rx * (n_rx + 1)) // 2) + (k_tx * (n_tx * (n_tx + 1)) // 2)
    raise ConfigError(f"unknown structure {structure!r}")


@dataclass
class FitReport:
    """EM diagnostics: per-iteration mean log-likelihood trace."""

    loglik_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


@dataclass(frozen=True)
class EmOptions:
    max_iter: int = 500
    tol: float = 1e-6
    reg_eps: float = 1e-6
    zero_mean: bool = False
    seed: int = 0


def complex_gaussian_logpdf(x: np.ndarray, mu: np.ndarray, cov_factor: CovFactor):
    """Log-density of the circular complex Gaussian via a precomputed factorization.

    Returns ``-m*log(pi) - logdet(C) - (x-mu)^H C^{-1} (x-mu)`` computed with
    triangular solves.  ``x`` may be a single vector or a stack (batch, m).
    """
    x = np.asarray(x)
    single = x.ndim == 1
    diff = (np.atleast_2d(x) - mu).T
    z = cov_factor.whiten(diff)
    m = mu.shape[0]
    out = -m * LOG_PI - cov_factor.logdet - np.einsum("ij,ij->j", z.conj(), z).real
    return float(out[0]) if single else out


def component_log_likelihoods(x: np.ndarray, gmm: Gmm) -> np.ndarray:
    """log p(k) + log N(x; mu_k, C_k) for all components; x batched to (M, K)."""
    x2 = np.atleast_2d(np.asarray(x, dtype=complex))
    out = np.empty((x2.shape[0], gmm.num_components))
    for k in range(gmm.num_components):
        out[:, k] = complex_gaussian_logpdf(x2, gmm.means[k], gmm.factors[k])
    return out + gmm.log_weights


def responsibilities(x: np.ndarray, gmm: Gmm) -> np.ndarray:
    """Posterior component probabilities, computed in the log domain."""
    lj = component_log_likelihoods(x, gmm)
    r = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
    return r[0] if np.asarray(x).ndim == 1 else r


def gmm_logpdf(x: np.ndarray, gmm: Gmm):
    """Log of the mixture density (log-sum-exp over components)."""
    lj = component_log_likelihoods(x, gmm)
    out = logsumexp(lj, axis=1)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def mean_log_likelihood(x: np.ndarray, gmm: Gmm) -> float:
    return float(np.mean(gmm_logpdf(np.atleast_2d(x), gmm)))


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances (M, K) without forming (M, K, N) temporaries."""
    xx = np.einsum("ij,ij->i", x.conj(), x).real
    cc = np.einsum("ij,ij->i", centers.conj(), centers).real
    cross = (x @ centers.conj().T).real
    return np.maximum(xx[:, None] - 2.0 * cross + cc[None, :], 0.0)


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, x.shape[1]), dtype=complex)
    centers[0] = x[rng.integers(x.shape[0])]
    d2 = _sq_dists(x, centers[:1])[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:  # all points coincide with chosen centers
            centers[i] = x[rng.integers(x.shape[0])]
            continue
        centers[i] = x[rng.choice(x.shape[0], p=d2 / total)]
        d2 = np.minimum(d2, _sq_dists(x, centers[i:i + 1])[:, 0])
    return centers


def _scatter(x: np.ndarray, weights=None) -> np.ndarray:
    """Weighted scatter sum_m w_m x_m x_m^H (unnormalized if weights given)."""
    if weights is None:
        return hermitize(x.T @ x.conj())
    return hermitize((x.T * weights) @ x.conj())


def _init_clusters(x: np.ndarray, k: int, zero_mean: bool, rng: np.random.Generator):
    """k-means++ seeding with one hard assignment; returns weights, means, assign."""
    m = x.shape[0]
    centers = _kmeanspp_centers(x, k, rng)
    assign = np.argmin(_sq_dists(x, centers), axis=1)
    weights = np.bincount(assign, minlength=k).astype(float)
    weights = np.maximum(weights, 1.0)
    weights /= weights.sum()
    means = np.zeros((k, x.shape[1]), dtype=complex)
    if not zero_mean:
        for j in range(k):
            sel = x[assign == j]
            means[j] = sel.mean(axis=0) if len(sel) else centers[j]
    return weights, means, assign


def _regularize_covs(covs: np.ndarray, eps: float, floor_trace: float = 0.0) -> np.ndarray:
    """Relative diagonal lift; collapsed components fall back to a floor tied
    to the global data scale so factorizations stay positive definite."""
    n = covs.shape[-1]
    tr = np.einsum("kii->k", covs).real
    tr = np.maximum(tr, max(1e-6 * floor_trace, 1e-30))
    return covs + (eps * tr / n)[:, None, None] * np.eye(n)


def _chol_stack(covs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        for j in range(covs.shape[0]):  # identify the offender for the error message
            CovFactor(covs[j], f"component {j} covariance")
        raise


def em_fit(data: np.ndarray, k: int, structure: str = STRUCTURE_FULL,
           opts: EmOptions | None = None) -> tuple[Gmm, FitReport]:
    """Fit a K-component mixture by expectation-maximization.

    ``structure="circulant"`` transforms the data by the unitary DFT and
    constrains covariances to be diagonal in that basis, which makes the
    data-domain covariances circulant.  Mean log-likelihood is nondecreasing
    across iterations; fitting stops once the improvement falls below
    ``opts.tol`` or at ``opts.max_iter``.
    """
    opts = opts or EmOptions()
    x = np.asarray(data, dtype=complex)
    if x.ndim != 2:
        raise DimensionError("data must be (samples, dim)")
    if not np.all(np.isfinite(x)):
        raise ConfigError("data must be finite")
    if k < 1 or k > x.shape[0]:
        raise ConfigError(f"need 1 <= K <= number of samples, got K={k}, M={x.shape[0]}")
    if structure == STRUCTURE_FULL:
        return _em_fit_full(x, k, opts)
    if structure == STRUCTURE_CIRCULANT:
        return _em_fit_circulant(x, k, opts)
    if structure == STRUCTURE_KRONECKER:
        raise ConfigError("kronecker mixtures are built via rows_cols_split + kron_combine")
    raise ConfigError(f"unknown structure {structure!r}")


def _log_joint_full(x, xc, log_weights, means, invs, logdets, work):
    """Expanded quadratic form per component, gemm-friendly and temp-free.

    With w = x* P: (x-mu)^H P (x-mu) = rowdot(w, x) - 2 Re(w mu) + mu^H P mu.
    ``xc`` is the precomputed conjugate of ``x`` and ``work`` a reusable
    (M, N) buffer holding w.
    """
    m, n = x.shape
    lj = np.empty((m, log_weights.shape[0]))
    for j in range(log_weights.shape[0]):
        np.matmul(xc, invs[j], out=work)
        quad = np.einsum("ij,ij->i", work, x).real
        quad -= 2.0 * (work @ means[j]).real
        quad += (means[j].conj() @ (invs[j] @ means[j])).real
        lj[:, j] = log_weights[j] - n * LOG_PI - logdets[j] - quad
    return lj


def _em_fit_full(x: np.ndarray, k: int, opts: EmOptions):
    m, n = x.shape
    rng = np.random.default_rng(opts.seed)
    weights, means, assign = _init_clusters(x, k, opts.zero_mean, rng)
    covs = np.empty((k, n, n), dtype=complex)
    global_cov = _scatter(x) / m
    global_trace = float(np.trace(global_cov).real)
    for j in range(k):
        sel = assign == j
        covs[j] = _scatter(x[sel] - means[j]) / sel.sum() if sel.any() else global_cov
    covs = _regularize_covs(covs, opts.reg_eps, global_trace)

    work = np.empty_like(x)
    xc = x.conj()
    report = FitReport()
    prev = -np.inf
    for it in range(opts.max_iter):
        chols = _chol_stack(covs)
        logdets = 2.0 * np.log(np.einsum("kii->ki", chols).real).sum(axis=1)
        invs = np.linalg.inv(covs)
        lj = _log_joint_full(x, xc, _safe_log(weights), means, invs, logdets, work)
        norm = logsumexp(lj, axis=1)
        mean_ll = float(norm.mean())
        report.loglik_trace.append(mean_ll)
        report.iterations = it + 1
        if it > 0 and mean_ll - prev < opts.tol:
            report.converged = True
            break
        prev = mean_ll
        if it == opts.max_iter - 1:
            break  # keep returned parameters consistent with the last trace entry
        r = np.exp(lj - norm[:, None])
        nk = r.sum(axis=0)
        dead = nk < 1e-9 * m
        weights = nk / nk.sum()
        if not opts.zero_mean:
            means = (r.T @ x) / np.maximum(nk, 1e-30)[:, None]
        for j in range(k):
            if dead[j]:
                # re-seed a starved component at the least likely datum; its
                # near-zero weight keeps the likelihood trace monotone
                means[j] = 0.0 if opts.zero_mean else x[np.argmin(norm)]
                covs[j] = global_cov
            else:
                # weighted uncentered scatter minus the mean outer product
                np.multiply(xc, r[:, j, None], out=work)
                scatter = (x.T @ work) / nk[j]
                scatter -= np.outer(means[j], means[j].conj())
                covs[j] = scatter
        covs = _regularize_covs(hermitize(covs), opts.reg_eps, global_trace)
    return Gmm(weights=weights, means=means, covs=hermitize(covs),
               structure=STRUCTURE_FULL), report


def _log_joint_diag(xf, log_weights, fmeans, variances):
    m, n = xf.shape
    lj = np.empty((m, log_weights.shape[0]))
    logdets = np.log(variances).sum(axis=1)
    for j in range(log_weights.shape[0]):
        quad = np.abs(xf - fmeans[j]) ** 2 @ (1.0 / variances[j])
        lj[:, j] = log_weights[j] - n * LOG_PI - logdets[j] - quad
    return lj


def _regularize_vars(variances: np.ndarray, eps: float, floor_var: float = 0.0) -> np.ndarray:
    level = np.maximum(variances.mean(axis=1), max(1e-6 * floor_var, 1e-30))
    return variances + (eps * level)[:, None]


def _em_fit_circulant(x: np.ndarray, k: int, opts: EmOptions):
    m, n = x.shape
    rng = np.random.default_rng(opts.seed)
    xf = np.fft.fft(x, axis=1, norm="ortho")
    weights, fmeans, assign = _init_clusters(xf, k, opts.zero_mean, rng)
    variances = np.empty((k, n))
    global_var = np.mean(np.abs(xf) ** 2, axis=0)
    global_level = float(global_var.mean())
    for j in range(k):
        sel = assign == j
        variances[j] = np.mean(np.abs(xf[sel] - fmeans[j]) ** 2, axis=0) if sel.any() else global_var
    variances = _regularize_vars(variances, opts.reg_eps, global_level)

    report = FitReport()
    prev = -np.inf
    for it in range(opts.max_iter):
        lj = _log_joint_diag(xf, _safe_log(weights), fmeans, variances)
        norm = logsumexp(lj, axis=1)
        mean_ll = float(norm.mean())
        report.loglik_trace.append(mean_ll)
        report.iterations = it + 1
        if it > 0 and mean_ll - prev < opts.tol:
            report.converged = True
            break
        prev = mean_ll
        if it == opts.max_iter - 1:
            break
        r = np.exp(lj - norm[:, None])
        nk = r.sum(axis=0)
        dead = nk < 1e-9 * m
        weights = nk / nk.sum()
        if not opts.zero_mean:
            fmeans = (r.T @ xf) / np.maximum(nk, 1e-30)[:, None]
        for j in range(k):
            if dead[j]:
                fmeans[j] = 0.0 if opts.zero_mean else xf[np.argmin(norm)]
                variances[j] = global_var
            else:
                variances[j] = (r[:, j] @ np.abs(xf - fmeans[j]) ** 2) / nk[j]
        variances = _regularize_vars(variances, opts.reg_eps, global_level)

    means = np.fft.ifft(fmeans, axis=1, norm="ortho")
    f = unitary_dft(n)
    covs = hermitize((f.conj().T[None, :, :] * variances[:, None, :]) @ f)
    return Gmm(weights=weights, means=means, covs=covs,
               structure=STRUCTURE_CIRCULANT, spectra=variances), report


def rows_cols_split(data: np.ndarray, n_rx: int, n_tx: int):
    """Split vectorized channel matrices into per-side training sets.

    Returns ``(tx_dataset, rx_dataset)``.  Columns of each unvectorized
    channel matrix become receive-side samples; rows are transposed without
    conjugation into transmit-side samples, so the transmit-side covariance
    is estimated untransposed.
    """
    x = np.asarray(data, dtype=complex)
    if x.ndim != 2 or x.shape[1] != n_rx * n_tx:
        raise DimensionError("data dimension must equal n_rx * n_tx")
    m = x.shape[0]
    cube = x.reshape(m, n_tx, n_rx)  # cube[s, i_tx, i_rx] = vec entry i_tx*n_rx + i_rx
    rx = cube.reshape(m * n_tx, n_rx)
    tx = cube.transpose(0, 2, 1).reshape(m * n_rx, n_tx)
    return tx, rx


def kron_combine(tx_gmm: Gmm, rx_gmm: Gmm, data: np.ndarray) -> Gmm:
    """Combine per-side mixtures into a Kronecker-covariance mixture.

    Component (i, j) gets mean ``kron(mu_tx_i, mu_rx_j)`` and covariance
    ``kron(C_tx_i, C_rx_j)``; mixing weights are the average
    responsibilities of the combined model over ``data`` (one E-step with
    means and covariances held fixed, starting from product weights).
    """
    x = np.atleast_2d(np.asarray(data, dtype=complex))
    n = tx_gmm.dim * rx_gmm.dim
    if x.shape[1] != n:
        raise DimensionError("data dimension must equal ntx * nrx")
    k_tx, k_rx = tx_gmm.num_components, rx_gmm.num_components
    means = np.einsum("it,jr->ijtr", tx_gmm.means, rx_gmm.means).reshape(k_tx * k_rx, n)
    covs = np.einsum("iab,jcd->ijacbd", tx_gmm.covs, rx_gmm.covs).reshape(k_tx * k_rx, n, n)
    weights0 = np.outer(tx_gmm.weights, rx_gmm.weights).reshape(-1)
    weights0 = weights0 / weights0.sum()
    combined = Gmm(weights=weights0, means=means, covs=hermitize(covs),
                   structure=STRUCTURE_KRONECKER, tx=tx_gmm, rx=rx_gmm)
    r = np.atleast_2d(responsibilities(x, combined))
    weights = r.mean(axis=0)
    weights = weights / weights.sum()
    return replace(combined, weights=weights)
