"""Command-line entry points: dataset generation, fitting, sweeps, convergence.

Every subcommand takes --config (JSON scenario description) and --out;
--seed overrides the config's master seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import bench, io
from .errors import ConfigError
from .gmm import em_fit, kron_combine, rows_cols_split
from .util import DOMAIN_TRAIN


def _load(args) -> bench.ScenarioConfig:
    config = bench.load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    return config


def _cmd_generate(args) -> None:
    config = _load(args)
    count = args.count if args.count is not None else config.m_train
    dataset = bench.draw_channels(config, DOMAIN_TRAIN, count)
    io.write_dataset(args.out, dataset.samples)
    if args.csv:
        io.export_dataset_csv(args.csv, dataset.samples)
    print(f"wrote {count} samples of dimension {dataset.dim} to {args.out}")


def _first_gmm_spec(config: bench.ScenarioConfig) -> bench.EstimatorSpec:
    for spec in config.estimators:
        if spec.name == "gmm":
            return spec
    raise ConfigError("config lists no gmm estimator to fit")


def _cmd_fit(args) -> None:
    config = _load(args)
    spec = _first_gmm_spec(config)
    if args.data:
        samples = io.read_dataset(args.data)
    else:
        samples = bench.draw_channels(config, DOMAIN_TRAIN, config.m_train).samples
    opts = bench.em_options(config, spec, bench._fit_seed(config, 0))
    if spec.structure == "kronecker":
        d = config.dims
        tx_data, rx_data = rows_cols_split(samples, d.n_rx, d.n_tx)
        tx_gmm, _ = em_fit(tx_data, spec.k_tx, "full", opts)
        rx_gmm, _ = em_fit(rx_data, spec.k_rx, "full", replace(opts, seed=opts.seed + 1))
        gmm = kron_combine(tx_gmm, rx_gmm, samples)
        report = None
    else:
        gmm, report = em_fit(samples, spec.k, spec.structure, opts)
    io.write_gmm(args.out, gmm)
    msg = f"fitted K={gmm.num_components} ({spec.structure}) mixture to {args.out}"
    if report is not None:
        msg += f" after {report.iterations} iterations (converged={report.converged})"
    print(msg)


def _cmd_sweep_snr(args) -> None:
    config = _load(args)
    result = bench.run_snr_sweep(config)
    bench.emit_csv(result, args.out)
    print(f"wrote {len(result.rows)} rows to {args.out}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v)


def _cmd_sweep_k(args) -> None:
    config = _load(args)
    k_list = _parse_int_list(args.k_list) if args.k_list else None
    m_list = _parse_int_list(args.m_list) if args.m_list else None
    result = bench.run_component_sweep(config, k_list=k_list, m_list=m_list)
    bench.emit_csv(result, args.out)
    print(f"wrote {len(result.rows)} rows to {args.out}")


def _cmd_converge(args) -> None:
    config = _load(args)
    result, table = bench.run_convergence_study(config)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write(table.csv_string())
    if args.nmse_out:
        bench.emit_csv(result, args.nmse_out)
    print(f"wrote discrepancy ladder for K={list(table.k_ladder)} to {args.out} "
          f"(ball radius {table.ball_radius:.4g})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmmce",
                                     description="mixture-based channel estimation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON scenario config")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--seed", type=int, default=None, help="override master seed")

    p = sub.add_parser("generate", help="write a channel dataset")
    common(p)
    p.add_argument("--csv", default=None, help="also export a CSV debug copy")
    p.add_argument("--count", type=int, default=None, help="override sample count")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("fit", help="fit the config's first gmm estimator")
    common(p)
    p.add_argument("--data", default=None, help="fit to this dataset file instead of drawing")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep-snr", help="nMSE over the SNR grid")
    common(p)
    p.set_defaults(func=_cmd_sweep_snr)

    p = sub.add_parser("sweep-k", help="nMSE over (K, M) cells")
    common(p)
    p.add_argument("--k-list", default=None, help="comma-separated component counts")
    p.add_argument("--m-list", default=None, help="comma-separated training sizes")
    p.set_defaults(func=_cmd_sweep_k)

    p = sub.add_parser("converge", help="discrepancy to the exact conditional mean")
    common(p)
    p.add_argument("--nmse-out", default=None, help="also write per-K nMSE rows")
    p.set_defaults(func=_cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
