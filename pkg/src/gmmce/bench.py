"""Benchmark harness: scenario configs, sweeps, convergence study, CSV output.

A single JSON config declares the scenario, the estimators under test, and
the evaluation grid.  All randomness derives from one master seed through
fixed-purpose streams, so identical configs reproduce identical results
regardless of evaluation order.  Within one SNR cell every estimator sees
the same channels and the same noise realizations.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines
from .channels import (ChannelDataset, draw_3gpp_dataset, draw_synthetic_gmm_dataset,
                       make_synthetic_prior, DEFAULT_QUAD_POINTS)
from .errors import ConfigError, DimensionError
from .estimator import exact_cme_oracle, precompute
from .gmm import EmOptions, em_fit, kron_combine, rows_cols_split
from .observation import (make_pattern, mimo_model, observe_batch, simo_model,
                          snr_db_to_sigma2, wideband_model)
from .util import stream, DOMAIN_BALL, DOMAIN_FIT, DOMAIN_NOISE, DOMAIN_TEST, DOMAIN_TRAIN

SCENARIO_SIMO = "simo_3gpp"
SCENARIO_MIMO = "mimo_3gpp"
SCENARIO_WIDEBAND = "wideband_synthetic"
SCENARIO_SYNTHETIC = "synthetic_gmm"
_SCENARIOS = (SCENARIO_SIMO, SCENARIO_MIMO, SCENARIO_WIDEBAND, SCENARIO_SYNTHETIC)

_ESTIMATOR_NAMES = ("ls", "sample_cov", "genie_lmmse", "gmm", "omp_genie", "amp")

CSV_HEADER = "scenario,estimator,K,M,snr_db,nmse,wall_time_ms,seed"


def _take(doc: dict, allowed: dict, where: str) -> dict:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = dict(allowed)
    out.update(doc)
    return out


_EM_KEYS = ("max_iter", "tol", "reg_eps", "zero_mean")


def _check_em(doc: dict, where: str) -> dict:
    unknown = set(doc) - set(_EM_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return dict(doc)


@dataclass(frozen=True)
class Dims:
    n_rx: int = 1
    n_tx: int = 1
    n_p: int = 0
    n_c: int = 0
    n_t: int = 0


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    id: str
    k: int = 0
    structure: str = "full"
    k_tx: int = 0
    k_rx: int = 0
    em: dict = field(default_factory=dict)
    oversampling: int = 0
    iterations: int = 100
    alpha: float = 1.1
    s_max: int | None = None


@dataclass(frozen=True)
class PriorSpec:
    k: int = 8
    dim: int = 8
    mean_scale: float = 2.0
    cov_scale: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class ConvergeSpec:
    k_ladder: tuple = (1, 2, 4, 8, 16)
    ball_radius: float | None = None  # None: 1.25 * median pilot observation norm
    n_ball: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    dims: Dims
    estimators: tuple
    snr_grid_db: tuple
    m_train: int
    t_test: int = 10_000
    master_seed: int = 0
    n_clusters: int = 1
    angle_spread_deg: float = 2.0
    quad_points: int = DEFAULT_QUAD_POINTS
    pilot_layout: str = "block"
    em: dict = field(default_factory=dict)
    prior: PriorSpec | None = None
    converge: ConvergeSpec = ConvergeSpec()
    k_list: tuple = ()
    m_list: tuple = ()
    measure_wall_time: bool = True

    def __post_init__(self):
        if self.scenario not in _SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if len(self.snr_grid_db) == 0:
            raise ConfigError("snr_grid_db must be nonempty")
        if self.t_test < 1:
            raise ConfigError("t_test must be >= 1")
        ids = [e.id for e in self.estimators]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"estimator ids must be unique, got {ids}")
        for e in self.estimators:
            if e.name not in _ESTIMATOR_NAMES:
                raise ConfigError(f"unknown estimator {e.name!r}")
        if self.scenario in (SCENARIO_WIDEBAND, SCENARIO_SYNTHETIC) and self.prior is None:
            raise ConfigError(f"{self.scenario} needs a prior section")


def _parse_estimator(doc: dict, index: int) -> EstimatorSpec:
    allowed = dict(name=None, id=None, k=0, structure="full", k_tx=0, k_rx=0,
                   em={}, oversampling=0, iterations=100, alpha=1.1, s_max=None)
    d = _take(doc, allowed, f"estimators[{index}]")
    d["em"] = _check_em(d["em"], f"estimators[{index}].em")
    if d["name"] is None:
        raise ConfigError(f"estimators[{index}] needs a name")
    if d["id"] is None:
        d["id"] = d["name"]
    if d["name"] == "gmm":
        if d["structure"] == "kronecker":
            if d["k_tx"] < 1 or d["k_rx"] < 1:
                raise ConfigError("kronecker gmm needs k_tx and k_rx")
            d["k"] = d["k_tx"] * d["k_rx"]
        elif d["k"] < 1:
            raise ConfigError("gmm estimator needs k >= 1")
    if d["oversampling"] == 0:
        d["oversampling"] = 4 if d["name"] == "omp_genie" else 2
    return EstimatorSpec(**d)


def config_from_json(text: str) -> ScenarioConfig:
    doc = json.loads(text)
    allowed = dict(schema_version=1, scenario=None, dims={}, estimators=[],
                   snr_grid_db=[], m_train=None, t_test=10_000, master_seed=0,
                   n_clusters=1, angle_spread_deg=2.0, quad_points=DEFAULT_QUAD_POINTS,
                   pilot_layout="block", em={}, prior=None, converge={},
                   k_list=[], m_list=[], measure_wall_time=True)
    d = _take(doc, allowed, "config")
    if d["schema_version"] != 1:
        raise ConfigError(f"unsupported schema_version {d['schema_version']}")
    if d["scenario"] is None or d["m_train"] is None:
        raise ConfigError("config needs scenario and m_train")
    dims = Dims(**_take(d["dims"], dict(n_rx=1, n_tx=1, n_p=0, n_c=0, n_t=0), "dims"))
    estimators = tuple(_parse_estimator(e, i) for i, e in enumerate(d["estimators"]))
    prior = None
    if d["prior"] is not None:
        prior = PriorSpec(**_take(d["prior"], dict(k=8, dim=8, mean_scale=2.0,
                                                   cov_scale=0.5, seed=0), "prior"))
    conv_d = _take(d["converge"], dict(k_ladder=[1, 2, 4, 8, 16], ball_radius=None,
                                       n_ball=100), "converge")
    converge = ConvergeSpec(k_ladder=tuple(conv_d["k_ladder"]),
                            ball_radius=conv_d["ball_radius"], n_ball=conv_d["n_ball"])
    d["em"] = _check_em(d["em"], "em")
    return ScenarioConfig(scenario=d["scenario"], dims=dims, estimators=estimators,
                          snr_grid_db=tuple(float(s) for s in d["snr_grid_db"]),
                          m_train=int(d["m_train"]), t_test=int(d["t_test"]),
                          master_seed=int(d["master_seed"]), n_clusters=int(d["n_clusters"]),
                          angle_spread_deg=float(d["angle_spread_deg"]),
                          quad_points=int(d["quad_points"]), pilot_layout=d["pilot_layout"],
                          em=dict(d["em"]), prior=prior, converge=converge,
                          k_list=tuple(d["k_list"]), m_list=tuple(d["m_list"]),
                          measure_wall_time=bool(d["measure_wall_time"]))


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as f:
        return config_from_json(f.read())


@dataclass
class ResultRow:
    scenario: str
    estimator: str
    k: int
    m: int
    snr_db: float
    nmse: float
    wall_time_ms: float
    seed: int


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)


def compute_nmse(truth: np.ndarray, estimates: np.ndarray) -> float:
    """Mean squared error normalized by dimension and sample count."""
    truth = np.asarray(truth)
    estimates = np.asarray(estimates)
    if truth.shape != estimates.shape:
        raise DimensionError(f"shape mismatch {truth.shape} vs {estimates.shape}")
    t, n = np.atleast_2d(truth).shape
    return float(np.sum(np.abs(truth - estimates) ** 2) / (n * t))


def per_sample_sq_errors(truth: np.ndarray, estimates: np.ndarray) -> np.ndarray:
    """Per-sample squared errors / dimension (their mean is the nmse)."""
    if truth.shape != estimates.shape:
        raise DimensionError(f"shape mismatch {truth.shape} vs {estimates.shape}")
    return np.sum(np.abs(truth - estimates) ** 2, axis=1) / truth.shape[1]


def emit_csv(result: ExperimentResult, path) -> None:
    """Write rows sorted by (scenario, estimator, K, M, snr_db), 17 digits, LF."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(csv_string(result))


def csv_string(result: ExperimentResult) -> str:
    rows = sorted(result.rows, key=lambda r: (r.scenario, r.estimator, r.k, r.m, r.snr_db))
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.scenario},{r.estimator},{r.k},{r.m},"
                     f"{r.snr_db:.17g},{r.nmse:.17g},{r.wall_time_ms:.17g},{r.seed}")
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> ExperimentResult:
    lines = text.strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ConfigError("unexpected CSV header")
    rows = []
    for line in lines[1:]:
        sc, est, k, m, snr, nmse, wall, seed = line.split(",")
        rows.append(ResultRow(sc, est, int(k), int(m), float(snr), float(nmse),
                              float(wall), int(seed)))
    return ExperimentResult(rows=rows)


# -- scenario plumbing -----------------------------------------------------


def _prior_of(config: ScenarioConfig):
    p = config.prior
    return make_synthetic_prior(p.seed, p.k, p.dim, p.mean_scale, p.cov_scale)


def channel_dim(config: ScenarioConfig) -> int:
    d = config.dims
    if config.scenario == SCENARIO_SIMO:
        return d.n_rx
    if config.scenario == SCENARIO_MIMO:
        return d.n_rx * d.n_tx
    if config.scenario == SCENARIO_WIDEBAND:
        return d.n_c * d.n_t
    return config.prior.dim


def base_model(config: ScenarioConfig, sigma2: float):
    d = config.dims
    if config.scenario == SCENARIO_SIMO:
        return simo_model(d.n_rx, sigma2)
    if config.scenario == SCENARIO_MIMO:
        n_p = d.n_p if d.n_p else d.n_tx
        return mimo_model(d.n_rx, d.n_tx, n_p, sigma2)
    if config.scenario == SCENARIO_WIDEBAND:
        pattern = make_pattern(config.pilot_layout, d.n_c, d.n_t, d.n_p)
        return wideband_model(pattern, sigma2)
    return simo_model(channel_dim(config), sigma2)


def draw_channels(config: ScenarioConfig, domain: int, count: int,
                  keep_covs: bool = False) -> ChannelDataset:
    if config.scenario in (SCENARIO_SIMO, SCENARIO_MIMO):
        n_tx = config.dims.n_tx if config.scenario == SCENARIO_MIMO else 1
        return draw_3gpp_dataset(config.master_seed, count, config.n_clusters,
                                 config.dims.n_rx, n_tx,
                                 angle_spread=np.deg2rad(config.angle_spread_deg),
                                 quad_points=config.quad_points, domain=domain,
                                 keep_covs=keep_covs)
    prior = _prior_of(config)
    if config.scenario == SCENARIO_WIDEBAND and prior.gmm.dim != channel_dim(config):
        raise ConfigError("prior dim must equal n_c * n_t for the wideband scenario")
    return draw_synthetic_gmm_dataset(prior, count, seed=config.master_seed, domain=domain)


# -- estimator adapters ------------------------------------------------------


class _Adapter:
    """Uniform shape over estimators: optional per-SNR prepare, batch run."""

    uses_covs = False

    def __init__(self, spec: EstimatorSpec):
        self.spec = spec
        self.k = spec.k
        self.failed: Exception | None = None

    def prepare(self, model):
        self.model = model

    def run(self, y, h_true, covs):
        raise NotImplementedError


class _LsAdapter(_Adapter):
    def prepare(self, model):
        self.impl = baselines.LsEstimator(model)

    def run(self, y, h_true, covs):
        return self.impl.estimate_batch(y)


class _SampleCovAdapter(_Adapter):
    def fit(self, train, config):
        self.train = train

    def prepare(self, model):
        self.impl = baselines.SampleCovLmmse(self.train, model)

    def run(self, y, h_true, covs):
        return self.impl.estimate_batch(y)


class _GenieAdapter(_Adapter):
    uses_covs = True

    def run(self, y, h_true, covs):
        return baselines.genie_lmmse_batch(covs, self.model, y)


class _OmpAdapter(_Adapter):
    def fit(self, train, config):
        if config.scenario == SCENARIO_MIMO:
            self.dictionary = baselines.build_dictionary(
                baselines.DICT_KRON_DFT, (config.dims.n_rx, config.dims.n_tx), 2)
        else:
            self.dictionary = baselines.build_dictionary(
                baselines.DICT_DFT, channel_dim(config), self.spec.oversampling)

    def run(self, y, h_true, covs):
        return baselines.omp_genie_batch(self.model, self.dictionary, y, h_true,
                                         s_max=self.spec.s_max)


class _AmpAdapter(_Adapter):
    def fit(self, train, config):
        self.dictionary = baselines.build_dictionary(
            baselines.DICT_DFT, channel_dim(config), self.spec.oversampling)

    def run(self, y, h_true, covs):
        return baselines.amp_estimate_batch(self.model, self.dictionary, y,
                                            iterations=self.spec.iterations,
                                            alpha=self.spec.alpha)


class _GmmAdapter(_Adapter):
    def fit(self, train, config, fit_seed=0):
        opts = em_options(config, self.spec, fit_seed)
        if self.spec.structure == "kronecker":
            d = config.dims
            tx_data, rx_data = rows_cols_split(train, d.n_rx, d.n_tx)
            tx_gmm, _ = em_fit(tx_data, self.spec.k_tx, "full", opts)
            rx_gmm, _ = em_fit(rx_data, self.spec.k_rx, "full",
                               replace(opts, seed=opts.seed + 1))
            self.gmm = kron_combine(tx_gmm, rx_gmm, train)
        else:
            self.gmm, _ = em_fit(train, self.spec.k, self.spec.structure, opts)
        self.k = self.gmm.num_components

    def prepare(self, model):
        self.impl = precompute(self.gmm, model)

    def run(self, y, h_true, covs):
        return self.impl.estimate_batch(y)


_ADAPTERS = {"ls": _LsAdapter, "sample_cov": _SampleCovAdapter, "genie_lmmse": _GenieAdapter,
             "gmm": _GmmAdapter, "omp_genie": _OmpAdapter, "amp": _AmpAdapter}


def em_options(config: ScenarioConfig, spec: EstimatorSpec, fit_seed: int) -> EmOptions:
    merged = dict(max_iter=500, tol=1e-6, reg_eps=1e-6, zero_mean=False)
    merged.update(_check_em(config.em, "em"))
    merged.update(_check_em(spec.em, "estimator em"))
    return EmOptions(seed=fit_seed, **merged)


def _fit_seed(config: ScenarioConfig, est_index: int, cell: int = 0) -> int:
    return int(stream(config.master_seed, DOMAIN_FIT, est_index, cell).integers(2 ** 62))


def _build_adapters(config: ScenarioConfig, train: ChannelDataset):
    adapters = []
    for i, spec in enumerate(config.estimators):
        adapter = _ADAPTERS[spec.name](spec)
        try:
            if hasattr(adapter, "fit"):
                if spec.name == "gmm":
                    adapter.fit(train.samples, config, fit_seed=_fit_seed(config, i))
                else:
                    adapter.fit(train.samples, config)
        except Exception as exc:  # rows for this estimator become NaN
            print(f"estimator {spec.id} failed to fit: {exc}", file=sys.stderr)
            adapter.failed = exc
        adapters.append(adapter)
    return adapters


def _cov_slices(dataset: ChannelDataset, needed: bool):
    if not needed:
        return lambda sl: None
    if dataset.covs is not None:
        return lambda sl: dataset.covs[sl]
    if dataset.covs_rx is not None:
        def kron_slice(sl):
            ctx, crx = dataset.covs_tx[sl], dataset.covs_rx[sl]
            b = ctx.shape[0]
            n = ctx.shape[1] * crx.shape[1]
            return np.einsum("bij,bkl->bikjl", ctx, crx).reshape(b, n, n)
        return kron_slice
    raise ConfigError("genie estimator needs per-sample covariances; this "
                      "scenario does not provide them")


def _timed_run(adapter, y, h_true, cov_of, t_test, measure: bool):
    """Run in ~10 slices; wall time is the median per-estimate slice timing."""
    n_chunks = min(10, t_test)
    bounds = np.linspace(0, t_test, n_chunks + 1).astype(int)
    outs = []
    per_est_ms = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a == b:
            continue
        sl = slice(a, b)
        t0 = time.perf_counter()
        outs.append(adapter.run(y[sl], h_true[sl], cov_of(sl)))
        per_est_ms.append((time.perf_counter() - t0) * 1000.0 / (b - a))
    wall = float(np.median(per_est_ms)) if measure else 0.0
    return np.concatenate(outs, axis=0), wall


def run_snr_sweep(config: ScenarioConfig) -> ExperimentResult:
    """Fit once, then re-prepare and evaluate every estimator per SNR.

    All estimators in one SNR cell share the test channels and the noise
    realizations.  Estimator failures are recorded as NaN rows and the
    sweep continues.
    """
    train = draw_channels(config, DOMAIN_TRAIN, config.m_train)
    needs_covs = any(e.name == "genie_lmmse" for e in config.estimators)
    test = draw_channels(config, DOMAIN_TEST, config.t_test, keep_covs=needs_covs)
    adapters = _build_adapters(config, train)
    cov_of = _cov_slices(test, needs_covs)
    result = ExperimentResult()
    for snr_index, snr_db in enumerate(config.snr_grid_db):
        sigma2 = snr_db_to_sigma2(snr_db)
        model = base_model(config, sigma2)
        noise_rng = stream(config.master_seed, DOMAIN_NOISE, snr_index)
        y = observe_batch(noise_rng, model, test.samples)
        for adapter in adapters:
            row = ResultRow(config.scenario, adapter.spec.id, adapter.k,
                            config.m_train, snr_db, np.nan, 0.0, config.master_seed)
            try:
                if adapter.failed is not None:
                    raise adapter.failed
                adapter.prepare(model)
                estimates, wall = _timed_run(adapter, y, test.samples, cov_of,
                                             config.t_test, config.measure_wall_time)
                row.nmse = compute_nmse(test.samples, estimates)
                row.wall_time_ms = wall if config.measure_wall_time else 0.0
            except Exception as exc:  # record the failure, keep sweeping
                print(f"estimator {adapter.spec.id} failed at {snr_db} dB: {exc}",
                      file=sys.stderr)
                row.wall_time_ms = 0.0
            result.rows.append(row)
    return result


def run_component_sweep(config: ScenarioConfig, k_list=None, m_list=None) -> ExperimentResult:
    """Cross product of (K, M) cells at the first grid SNR, mixture estimators only.

    The training pool is drawn once at max(M); each cell fits on the first M
    samples with a cell-specific EM seed.  K > M cells are skipped (NaN row).
    """
    k_list = tuple(k_list if k_list is not None else config.k_list)
    m_list = tuple(m_list if m_list is not None else config.m_list)
    if not k_list or not m_list:
        raise ConfigError("component sweep needs k_list and m_list")
    snr_db = config.snr_grid_db[0]
    sigma2 = snr_db_to_sigma2(snr_db)
    model = base_model(config, sigma2)
    pool = draw_channels(config, DOMAIN_TRAIN, max(m_list))
    test = draw_channels(config, DOMAIN_TEST, config.t_test)
    y = observe_batch(stream(config.master_seed, DOMAIN_NOISE, 0), model, test.samples)
    gmm_specs = [(i, s) for i, s in enumerate(config.estimators) if s.name == "gmm"]
    if not gmm_specs:
        raise ConfigError("component sweep needs at least one gmm estimator")
    result = ExperimentResult()
    for est_index, spec in gmm_specs:
        for cell, (k, m) in enumerate((k, m) for k in k_list for m in m_list):
            row = ResultRow(config.scenario, spec.id, k, m, snr_db, np.nan, 0.0,
                            config.master_seed)
            if k <= m:
                adapter = _GmmAdapter(replace(spec, k=k) if spec.structure != "kronecker" else spec)
                try:
                    adapter.fit(pool.samples[:m], config,
                                fit_seed=_fit_seed(config, est_index, cell))
                    adapter.prepare(model)
                    estimates, wall = _timed_run(adapter, y, test.samples,
                                                 lambda sl: None, config.t_test,
                                                 config.measure_wall_time)
                    row.k = adapter.k
                    row.nmse = compute_nmse(test.samples, estimates)
                    row.wall_time_ms = wall
                except Exception as exc:
                    print(f"cell (K={k}, M={m}) failed: {exc}", file=sys.stderr)
            result.rows.append(row)
    return result


@dataclass
class DiscrepancyTable:
    """Distance between the fitted-mixture estimates and the exact conditional mean."""

    k_ladder: tuple
    diffs: np.ndarray           # (len(k_ladder), n_ball) per-observation norms
    ball_radius: float

    def mean(self) -> np.ndarray:
        return self.diffs.mean(axis=1)

    def max(self) -> np.ndarray:
        return self.diffs.max(axis=1)

    def sem(self) -> np.ndarray:
        return self.diffs.std(axis=1, ddof=1) / np.sqrt(self.diffs.shape[1])

    def paired_sem(self, i: int, j: int) -> float:
        d = self.diffs[i] - self.diffs[j]
        return float(d.std(ddof=1) / np.sqrt(d.shape[0]))

    def csv_string(self) -> str:
        lines = ["K,mean_discrepancy,max_discrepancy,std_err"]
        for i, k in enumerate(self.k_ladder):
            lines.append(f"{k},{self.mean()[i]:.17g},{self.max()[i]:.17g},{self.sem()[i]:.17g}")
        return "\n".join(lines) + "\n"


def run_convergence_study(config: ScenarioConfig, fit_fn=None):
    """Fit mixtures of growing size and compare against the exact conditional mean.

    Only defined for the synthetic-prior scenario with its square identity
    observation.  Returns (ExperimentResult, DiscrepancyTable); the result
    rows hold the nMSE of each fitted estimator over the ball observations.
    ``fit_fn(samples, k) -> Gmm`` overrides the default EM fit (used to
    inject ground-truth parameters in tests).
    """
    if config.scenario != SCENARIO_SYNTHETIC:
        raise ConfigError("convergence study requires the synthetic_gmm scenario")
    prior = _prior_of(config)
    sigma2 = snr_db_to_sigma2(config.snr_grid_db[0])
    model = base_model(config, sigma2)
    oracle = exact_cme_oracle(prior, model)

    train = draw_channels(config, DOMAIN_TRAIN, config.m_train)
    conv = config.converge
    ball_rng = stream(config.master_seed, DOMAIN_BALL, 0)
    pilot = draw_synthetic_gmm_dataset(prior, 512, seed=config.master_seed,
                                       domain=DOMAIN_BALL)
    pilot_y = observe_batch(ball_rng, model, pilot.samples)
    radius = conv.ball_radius
    if radius is None:
        radius = 1.25 * float(np.median(np.linalg.norm(pilot_y, axis=1)))
    inside = np.linalg.norm(pilot_y, axis=1) <= radius
    if inside.sum() < conv.n_ball:
        raise ConfigError(f"ball radius {radius:.3g} captured only {int(inside.sum())} "
                          f"of the {conv.n_ball} required observations")
    ball_y = pilot_y[inside][:conv.n_ball]
    ball_h = pilot.samples[inside][:conv.n_ball]
    exact = oracle.cme_batch(ball_y)

    result = ExperimentResult()
    diffs = np.empty((len(conv.k_ladder), conv.n_ball))
    for i, k in enumerate(conv.k_ladder):
        if fit_fn is not None:
            gmm = fit_fn(train.samples, k)
        else:
            merged = dict(max_iter=500, tol=1e-6, reg_eps=1e-6, zero_mean=False)
            merged.update(_check_em(config.em, "em"))
            gmm, _ = em_fit(train.samples, k, "full",
                            EmOptions(seed=_fit_seed(config, 0, i), **merged))
        est = precompute(gmm, model)
        fitted = est.estimate_batch(ball_y)
        diffs[i] = np.linalg.norm(exact - fitted, axis=1)
        result.rows.append(ResultRow(config.scenario, "gmm", k, config.m_train,
                                     config.snr_grid_db[0],
                                     compute_nmse(ball_h, fitted), 0.0,
                                     config.master_seed))
    return result, DiscrepancyTable(k_ladder=conv.k_ladder, diffs=diffs,
                                    ball_radius=radius)
