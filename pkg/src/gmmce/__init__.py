"""Mixture-based conditional-mean channel estimation and benchmarks."""

from .channels import (ChannelDataset, ClusterParams, SpatialCovariance,
                       SyntheticGmmPrior, draw_3gpp_dataset, draw_3gpp_sample,
                       draw_synthetic_gmm_dataset, draw_synthetic_gmm_sample,
                       laplacian_power_density, make_synthetic_prior,
                       spatial_covariance, steering_vector)
from .errors import ConfigError, DimensionError, DivergedError, NumericError
from .estimator import (ExactCmeOracle, GmmEstimator, exact_cme, exact_cme_oracle,
                        precompute)
from .gmm import (CovFactor, EmOptions, FitReport, Gmm, complex_gaussian_logpdf,
                  covariance_param_count, em_fit, gmm_logpdf, kron_combine,
                  mean_log_likelihood, responsibilities, rows_cols_split)
from .observation import (ObservationModel, PilotPattern, make_pattern, mimo_model,
                          model_from_json, model_to_json, observe, observe_batch,
                          simo_model, snr_db_to_sigma2, wideband_model)
from .baselines import (Dictionary, LsEstimator, SampleCovLmmse, amp_estimate,
                        build_dictionary, genie_lmmse, genie_lmmse_batch, ls_estimate,
                        omp_genie, sample_cov_lmmse)
from .bench import (ExperimentResult, ResultRow, ScenarioConfig, compute_nmse,
                    emit_csv, load_config, run_component_sweep, run_convergence_study,
                    run_snr_sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
