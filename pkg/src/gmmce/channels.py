"""Spatial channel generation for uniform linear arrays.

Channels are conditionally Gaussian: each sample draws cluster angles and
path gains, builds the corresponding spatial covariance, and then draws
``h ~ CN(0, C)``.  MIMO covariances factor into a Kronecker product of
independent transmit- and receive-side covariances.  A synthetic
ground-truth mixture prior is also provided for estimator validation
studies where the exact conditional mean is computable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import ConfigError, DimensionError
from .util import complex_randn, hermitize, stream, DOMAIN_PRIOR

DEFAULT_ANGLE_SPREAD = np.deg2rad(2.0)
DEFAULT_QUAD_POINTS = 720


@dataclass(frozen=True)
class ClusterParams:
    """Center angles, power weights, and angular spread of propagation clusters."""

    angles: np.ndarray
    gains: np.ndarray
    angle_spread: float

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        gains = np.asarray(self.gains, dtype=float)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "gains", gains)
        if angles.shape != gains.shape or angles.ndim != 1 or angles.size == 0:
            raise DimensionError("angles and gains must be equal-length 1-d arrays")
        if np.any(gains < 0) or abs(gains.sum() - 1.0) > 1e-12:
            raise ConfigError("gains must be nonnegative and sum to 1")
        if np.any((angles < 0) | (angles >= 2 * np.pi)):
            raise ConfigError("angles must lie in [0, 2*pi)")
        if not self.angle_spread > 0:
            raise ConfigError("angle_spread must be positive")


@dataclass(frozen=True)
class SpatialCovariance:
    """Hermitian PSD spatial covariance of one array side."""

    matrix: np.ndarray
    side: str  # "rx" | "tx"


def steering_vector(theta: float, n: int) -> np.ndarray:
    """ULA steering vector: entry i is exp(j*pi*i*sin(theta))."""
    if n < 1:
        raise DimensionError("antenna count must be >= 1")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(theta))


def laplacian_power_density(theta, params: ClusterParams):
    """Cluster power density: gain-weighted Laplacians in wrapped angle distance.

    The density of each cluster is ``exp(-sqrt(2)*|d|/s) / (sqrt(2)*s)`` with
    ``d`` the angle difference wrapped into (-pi, pi] and ``s`` the spread.
    """
    theta = np.asarray(theta, dtype=float)
    b = params.angle_spread / np.sqrt(2.0)
    d = np.angle(np.exp(1j * (theta[..., None] - params.angles)))
    return (np.exp(-np.abs(d) / b) / (2.0 * b)) @ params.gains


@lru_cache(maxsize=16)
def _bessel_table(n: int, n_max: int) -> np.ndarray:
    """J_m(pi*delta) for delta = 0..n-1 and m = -n_max..n_max."""
    m = np.arange(-n_max, n_max + 1)
    return special.jv(m[None, :], np.pi * np.arange(n)[:, None])


def _cov_first_column(angles: np.ndarray, gains: np.ndarray, spread: float,
                      n: int, quad_points: int) -> np.ndarray:
    """First column of the Toeplitz covariance, batched over parameter sets.

    The angular integral of density times steering phase is evaluated as a
    truncated Fourier series on the circle: the steering phase expands into
    Bessel harmonics and the wrapped Laplacian contributes its characteristic
    function 1/(1 + (b*m)^2).  The truncation bandwidth is quad_points//2,
    so the result is converged to machine precision once quad_points exceeds
    roughly 2*(pi*n + 40); doubling quad_points beyond that is a no-op.
    """
    n_max = quad_points // 2
    b = spread / np.sqrt(2.0)
    m = np.arange(-n_max, n_max + 1)
    phi = 1.0 / (1.0 + (b * m) ** 2)
    # w[..., m] = phi(m) * sum_c gain_c e^{j m angle_c}
    w = np.einsum("...c,...mc->...m", gains, np.exp(1j * m[:, None] * angles[..., None, :]))
    w *= phi
    return w @ _bessel_table(n, n_max).T


def _toeplitz_from_column(col: np.ndarray) -> np.ndarray:
    n = col.shape[-1]
    idx = np.arange(n)[:, None] - np.arange(n)[None, :]
    c = col[..., np.abs(idx)]
    return np.where(idx >= 0, c, np.conj(c))


def spatial_covariance(params: ClusterParams, n: int,
                       quad_points: int = DEFAULT_QUAD_POINTS,
                       side: str = "rx") -> SpatialCovariance:
    """Spatial covariance of a ULA under the cluster power density.

    Integrates density-weighted steering outer products over the circle and
    renormalizes the result to trace n.  ``quad_points`` controls the angular
    resolution of the integration (Fourier bandwidth quad_points//2).
    """
    if quad_points < 64:
        raise ConfigError("quad_points must be >= 64")
    if n < 1:
        raise DimensionError("antenna count must be >= 1")
    col = _cov_first_column(params.angles, params.gains, params.angle_spread, n, quad_points)
    mat = hermitize(_toeplitz_from_column(col))
    mat *= n / np.trace(mat).real
    return SpatialCovariance(matrix=mat, side=side)


def _draw_cluster_geometry(rng: np.random.Generator, n_clusters: int, two_sided: bool):
    """One sample's cluster draw; fixed consumption order for reproducibility."""
    aoa = rng.uniform(0.0, 2 * np.pi, n_clusters)
    aod = rng.uniform(0.0, 2 * np.pi, n_clusters) if two_sided else None
    gains = rng.standard_normal(n_clusters) ** 2
    gains = gains / gains.sum()
    return aoa, aod, gains


def draw_3gpp_sample(rng: np.random.Generator, n_clusters: int, n_rx: int, n_tx: int = 1,
                     angle_spread: float = DEFAULT_ANGLE_SPREAD,
                     quad_points: int = DEFAULT_QUAD_POINTS):
    """Draw one channel sample and its ground-truth covariance.

    Cluster angles are uniform on [0, 2*pi); per-cluster powers are squared
    standard normals normalized to sum one.  For MIMO (n_tx > 1) the
    covariance is the Kronecker product of the per-side covariances and the
    returned vector follows column-stacking of the channel matrix.
    """
    if n_clusters < 1:
        raise ConfigError("n_clusters must be >= 1")
    aoa, aod, gains = _draw_cluster_geometry(rng, n_clusters, n_tx > 1)
    c_rx = spatial_covariance(ClusterParams(aoa, gains, angle_spread), n_rx,
                              quad_points, side="rx").matrix
    if n_tx == 1:
        cov = c_rx
    else:
        c_tx = spatial_covariance(ClusterParams(aod, gains, angle_spread), n_tx,
                                  quad_points, side="tx").matrix
        cov = np.kron(c_tx, c_rx)
    white = complex_randn(rng, cov.shape[0])
    h = np.linalg.cholesky(_psd_jitter(cov)) @ white
    return h, cov


def _psd_jitter(c: np.ndarray) -> np.ndarray:
    """Tiny relative diagonal lift so Cholesky succeeds on boundary-PSD input."""
    n = c.shape[-1]
    tr = np.trace(c, axis1=-2, axis2=-1).real
    eye = np.eye(n)
    return c + (1e-12 / n) * tr[..., None, None] * eye


@dataclass
class ChannelDataset:
    """Channel samples plus (optionally) their per-sample true covariances."""

    samples: np.ndarray                     # (M, N) complex
    covs: np.ndarray | None = None          # (M, N, N), SIMO only
    covs_tx: np.ndarray | None = None       # (M, n_tx, n_tx), MIMO
    covs_rx: np.ndarray | None = None       # (M, n_rx, n_rx), MIMO

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def has_covs(self) -> bool:
        return self.covs is not None or self.covs_rx is not None

    def full_cov_chunks(self, chunk: int = 512):
        """Yield (start, stop, C) with full-dimension covariances per sample."""
        m = len(self)
        for start in range(0, m, chunk):
            stop = min(start + chunk, m)
            if self.covs is not None:
                yield start, stop, self.covs[start:stop]
            else:
                ctx = self.covs_tx[start:stop]
                crx = self.covs_rx[start:stop]
                batch = np.einsum("bij,bkl->bikjl", ctx, crx)
                nt, nr = ctx.shape[1], crx.shape[1]
                yield start, stop, batch.reshape(stop - start, nt * nr, nt * nr)


def draw_3gpp_dataset(master_seed: int, count: int, n_clusters: int, n_rx: int,
                      n_tx: int = 1, angle_spread: float = DEFAULT_ANGLE_SPREAD,
                      quad_points: int = DEFAULT_QUAD_POINTS, domain: int = 0,
                      keep_covs: bool = False, batch: int = 2048) -> ChannelDataset:
    """Generate a dataset with one independent RNG stream per sample.

    Per-sample streams are derived from (master_seed, domain, sample index),
    so the result does not depend on batching or evaluation order.
    """
    two_sided = n_tx > 1
    n = n_rx * n_tx
    samples = np.empty((count, n), dtype=complex)
    covs = np.empty((count, n, n), dtype=complex) if (keep_covs and not two_sided) else None
    covs_tx = np.empty((count, n_tx, n_tx), dtype=complex) if (keep_covs and two_sided) else None
    covs_rx = np.empty((count, n_rx, n_rx), dtype=complex) if (keep_covs and two_sided) else None

    for start in range(0, count, batch):
        stop = min(start + batch, count)
        b = stop - start
        aoa = np.empty((b, n_clusters))
        aod = np.empty((b, n_clusters)) if two_sided else None
        gains = np.empty((b, n_clusters))
        white = np.empty((b, n), dtype=complex)
        for i in range(b):
            rng = stream(master_seed, domain, start + i)
            a, d, g = _draw_cluster_geometry(rng, n_clusters, two_sided)
            aoa[i], gains[i] = a, g
            if two_sided:
                aod[i] = d
            white[i] = complex_randn(rng, n)

        col_rx = _cov_first_column(aoa, gains, angle_spread, n_rx, quad_points)
        c_rx = hermitize(_toeplitz_from_column(col_rx))
        c_rx *= (n_rx / np.einsum("bii->b", c_rx).real)[:, None, None]
        if two_sided:
            col_tx = _cov_first_column(aod, gains, angle_spread, n_tx, quad_points)
            c_tx = hermitize(_toeplitz_from_column(col_tx))
            c_tx *= (n_tx / np.einsum("bii->b", c_tx).real)[:, None, None]
            full = np.einsum("bij,bkl->bikjl", c_tx, c_rx).reshape(b, n, n)
        else:
            full = c_rx
        chol = np.linalg.cholesky(_psd_jitter(full))
        samples[start:stop] = np.einsum("bij,bj->bi", chol, white)
        if keep_covs:
            if two_sided:
                covs_tx[start:stop] = c_tx
                covs_rx[start:stop] = c_rx
            else:
                covs[start:stop] = full

    return ChannelDataset(samples=samples, covs=covs, covs_tx=covs_tx, covs_rx=covs_rx)


@dataclass(frozen=True)
class SyntheticGmmPrior:
    """Ground-truth mixture prior used by the convergence harness."""

    gmm: "Gmm"  # noqa: F821 - forward reference, see gmm module
    rng_seed: int


def draw_synthetic_gmm_sample(rng: np.random.Generator, prior: SyntheticGmmPrior) -> np.ndarray:
    """Sample the mixture: component index by weights, then that Gaussian."""
    gmm = prior.gmm
    k = int(rng.choice(gmm.num_components, p=gmm.weights))
    white = complex_randn(rng, gmm.dim)
    chol = np.linalg.cholesky(_psd_jitter(gmm.covs[k]))
    return gmm.means[k] + chol @ white


def draw_synthetic_gmm_dataset(prior: SyntheticGmmPrior, count: int,
                               seed: int | None = None,
                               domain: int = DOMAIN_PRIOR) -> ChannelDataset:
    """Dataset of mixture samples with per-sample RNG streams.

    Streams derive from (seed, domain, sample index); ``seed`` defaults to
    the prior's own seed.
    """
    gmm = prior.gmm
    seed = prior.rng_seed if seed is None else seed
    chols = np.linalg.cholesky(_psd_jitter(gmm.covs))
    samples = np.empty((count, gmm.dim), dtype=complex)
    for i in range(count):
        rng = stream(seed, domain, i)
        k = int(rng.choice(gmm.num_components, p=gmm.weights))
        samples[i] = gmm.means[k] + chols[k] @ complex_randn(rng, gmm.dim)
    return ChannelDataset(samples=samples)


def make_synthetic_prior(seed: int, k: int, dim: int, mean_scale: float = 2.0,
                         cov_scale: float = 0.5) -> SyntheticGmmPrior:
    """Random but reproducible ground-truth mixture for validation studies.

    Component means are drawn on the mean_scale sphere-ish cloud and the
    covariances are random Hermitian PD matrices with trace dim*cov_scale^2,
    so larger mean_scale/cov_scale ratios give stronger multimodality.
    """
    from .gmm import Gmm  # local import to avoid a cycle at module load

    rng = stream(seed, DOMAIN_PRIOR, 0)
    means = mean_scale * complex_randn(rng, k, dim)
    covs = np.empty((k, dim, dim), dtype=complex)
    for j in range(k):
        g = complex_randn(rng, dim, dim + 2)
        c = g @ g.conj().T
        covs[j] = hermitize(c * (dim * cov_scale ** 2 / np.trace(c).real))
    weights = rng.random(k) + 0.5
    weights /= weights.sum()
    return SyntheticGmmPrior(gmm=Gmm(weights=weights, means=means, covs=covs),
                             rng_seed=seed)
