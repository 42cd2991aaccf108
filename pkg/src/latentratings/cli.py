"""Command-line interface: simulate, fit, analyze, compare.

Every command writes its outputs into ``--out DIR`` and prints an effective
configuration echo. Data artifacts (reports, CSVs) are byte-stable across
reruns with the same seed; timing lives only in ``run_manifest.json``.

Exit codes: 0 success, 2 usage/data/configuration error, 3 sampler
diagnostics failed (suppressed by ``--allow-nonconverged``).
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ._version import __version__
from .analysis import pearson_corr, auc, recovery_metrics
from .baselines import majority_vote_analysis
from .data import DatasetError, RatingDataset, truncate_ratings
from .fitting import FitResult, config_digest, fit
from .hmc import SamplerConfig
from .io import (
    IngestError,
    export_long,
    ingest,
    read_truth,
    report_payload,
    round6,
    write_comparison_csv,
    write_draws_csv,
    write_json,
    write_param_draws_csv,
    write_per_call_by_state_csv,
    write_per_call_csv,
    write_report_json,
    write_truth,
)
from .model import ConfigurationError, PriorConfig
from .presets import PRESETS, PRIOR_KEYS, effective_config, parse_kv_file, sim_config_from_dict
from .simulate import simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3


def _echo_config(cfg: dict) -> None:
    for key, value in cfg.items():
        print(f"config: {key} = {value}")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        n_chains=args.chains,
        n_warmup=args.warmup,
        n_samples=args.samples,
        seed=args.seed,
        leapfrog_steps=args.leapfrog_steps,
        target_accept=args.target_accept,
    )


def _priors(args) -> PriorConfig:
    if not getattr(args, "priors", None):
        return PriorConfig()
    raw = parse_kv_file(args.priors)
    unknown = set(raw) - set(PRIOR_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown prior keys: {sorted(unknown)}")
    return PriorConfig(**{k: float(v) for k, v in raw.items()})


def _write_run_manifest(out: Path, args, extra: dict, started: float) -> None:
    manifest = {
        "command": " ".join(sys.argv),
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "duration_seconds": round(time.time() - started, 3),
        **extra,
    }
    write_json(manifest, out / "run_manifest.json")


def cmd_simulate(args) -> int:
    started = time.time()
    if args.preset:
        cfg_raw = dict(PRESETS[args.preset])
    elif args.config:
        cfg_raw = parse_kv_file(args.config)
    else:
        print("error: simulate needs --preset or --config", file=sys.stderr)
        return EXIT_USAGE
    cfg_raw = effective_config(cfg_raw, args.seed)
    _echo_config(cfg_raw)
    sim_cfg = sim_config_from_dict(cfg_raw)

    out = _out_dir(args.out)
    dataset, truth = simulate(sim_cfg)
    export_long(dataset, out / "ratings.csv")
    write_truth(truth, dataset, out / "truth.csv")
    write_json(
        {
            "config": cfg_raw,
            "true_ate": round6(truth.true_ate),
            "dataset_digest": dataset.digest(),
            "config_digest": config_digest(cfg_raw),
        },
        out / "sim_manifest.json",
    )
    _write_run_manifest(out, args, {"dataset_digest": dataset.digest()}, started)
    print(f"wrote {out / 'ratings.csv'} ({len(dataset)} calls)")
    return EXIT_OK


def _load_dataset(args) -> RatingDataset:
    dataset = ingest(args.data, args.format)
    if args.rounds_keep is not None:
        dataset = truncate_ratings(dataset, args.rounds_keep)
    return dataset


def _run_fit(dataset: RatingDataset, args) -> FitResult:
    return fit(
        dataset,
        kind=args.model,
        priors=_priors(args),
        sampler_config=_sampler_config(args),
        plugin_posterior=args.plugin_posterior,
        difficulty_as_covariate=args.difficulty_as_covariate,
        standardize=args.standardize,
    )


def cmd_fit(args) -> int:
    started = time.time()
    out = _out_dir(args.out)
    dataset = _load_dataset(args)
    _echo_config(
        {
            "model": args.model,
            "n_calls": len(dataset),
            "sampler": asdict(_sampler_config(args)),
            "priors": asdict(_priors(args)),
        }
    )
    result = _run_fit(dataset, args)
    write_report_json(result.report, out / "report.json")
    write_per_call_csv(result.report.per_call, out / "per_call.csv")
    if args.dump_draws:
        write_draws_csv(result.draws, result.param_names, out / "draws.csv")
    diag = result.diagnostics
    _write_run_manifest(
        out,
        args,
        {
            "converged": diag.converged,
            "max_split_rhat": round6(diag.max_rhat),
            "min_ess_bulk": round6(diag.min_ess),
        },
        started,
    )
    print(
        f"fit complete: max split-rhat {diag.max_rhat:.4f}, "
        f"min bulk ESS {diag.min_ess:.0f}, converged={diag.converged}"
    )
    if not diag.converged and not args.allow_nonconverged:
        print("error: diagnostics failed (use --allow-nonconverged to override)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = time.time()
    out = _out_dir(args.out)
    truth = read_truth(args.truth)
    per_call: dict[str, float] = {}
    with open(args.per_call, newline="") as fh:
        for row in csv.DictReader(fh):
            per_call[row["call_id"]] = float(row["post_mean"])
    missing = sorted(set(per_call) - set(truth))
    if missing:
        print(f"error: truth file missing call ids, e.g. {missing[:3]}", file=sys.stderr)
        return EXIT_USAGE
    ids = list(per_call)
    scores = np.array([per_call[c] for c in ids])
    labels = np.array([truth[c]["d_true"] for c in ids])
    metrics = recovery_metrics(scores, labels)
    payload = {
        "n_calls": len(ids),
        "corr_with_truth": round6(metrics.corr_with_truth),
        "auc": round6(metrics.auc),
    }
    write_json(payload, out / "recovery.json")
    _write_run_manifest(out, args, payload, started)
    print(f"corr={payload['corr_with_truth']} auc={payload['auc']}")
    return EXIT_OK


def _parse_methods(text: str) -> list[tuple[str, str, int]]:
    """Parse tokens like ext-10, base-5, mv-10 into (label, kind, rounds)."""
    methods = []
    for token in (t.strip() for t in text.split(",") if t.strip()):
        parts = token.split("-")
        if len(parts) != 2 or parts[0] not in ("ext", "base", "mv"):
            raise ConfigurationError(
                f"bad method {token!r}; expected ext-N, base-N or mv-N"
            )
        methods.append((token, parts[0], int(parts[1])))
    if not methods:
        raise ConfigurationError("empty method list")
    return methods


def cmd_compare(args) -> int:
    started = time.time()
    out = _out_dir(args.out)
    dataset = ingest(args.data, args.format)
    truth = read_truth(args.truth)
    missing = [r.call_id for r in dataset.records if r.call_id not in truth]
    if missing:
        print(f"error: truth file missing call ids, e.g. {missing[:3]}", file=sys.stderr)
        return EXIT_USAGE
    d_true = {r.call_id: truth[r.call_id]["d_true"] for r in dataset.records}
    labels = np.array([d_true[r.call_id] for r in dataset.records])

    methods = _parse_methods(args.methods)
    _echo_config(
        {
            "methods": ",".join(m[0] for m in methods),
            "n_calls": len(dataset),
            "sampler": asdict(_sampler_config(args)),
        }
    )
    rows = []
    all_converged = True
    for label, kind, rounds in methods:
        if all(r.n_ratings == rounds for r in dataset.records):
            subset = dataset
        else:
            subset = truncate_ratings(dataset, rounds)
        if kind == "mv":
            mv = majority_vote_analysis(subset, tie_break=args.tie_break)
            votes = np.array(mv.votes, dtype=float)
            row = {
                "method": label,
                "corr": pearson_corr(votes, labels.astype(float)),
                "fpr": mv.est_fpr,
                "fnr": mv.est_fnr,
                "tau": mv.tau,
                "eta": mv.est_ate,
            }
            per_call_scores = votes
        else:
            model = "extended" if kind == "ext" else "base"
            args.model = model
            result = _run_fit(subset, args)
            all_converged &= result.diagnostics.converged
            s = result.report.param_summaries
            if model == "base":
                fpr, fnr = s["fpr"].mean, s["fnr"].mean
            else:
                fpr, fnr = _mean_error_rates(result)
            metrics = recovery_metrics(result.report.per_call.mean, labels)
            row = {
                "method": label,
                "corr": metrics.corr_with_truth,
                "auc": metrics.auc,
                "fpr": fpr,
                "fnr": fnr,
                "tau": s["tau"].mean,
                "eta": result.report.ate.mean if result.report.ate else None,
                "converged": result.diagnostics.converged,
            }
            per_call_scores = result.report.per_call.mean
            _write_method_figures(out, label, result, d_true)
        row["auc"] = row.get("auc", auc(per_call_scores, labels))
        rows.append(row)
        eta_text = "n/a" if row["eta"] is None else f"{row['eta']:.4f}"
        print(f"{label}: corr={row['corr']:.4f} tau={row['tau']:.4f} eta={eta_text}")

    write_comparison_csv(rows, out / "comparison.csv")
    write_json(
        {
            "methods": [
                {k: (round6(v) if isinstance(v, float) else v) for k, v in row.items()}
                for row in rows
            ],
        },
        out / "comparison.json",
    )
    _write_run_manifest(out, args, {"methods": [m[0] for m in methods]}, started)
    if not all_converged and not args.allow_nonconverged:
        print("error: diagnostics failed (use --allow-nonconverged to override)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _mean_error_rates(result: FitResult) -> tuple[float, float]:
    """Posterior mean of the across-call average error rates (extended model)."""
    flat = result.draws.flat(constrained=True)
    p = result.dataset.n_covariates
    H = np.array([r.difficulty for r in result.dataset.records], dtype=float)
    a0 = flat[:, p + 2 : p + 3] + flat[:, p + 4 : p + 5] * H[None, :]
    a1 = flat[:, p + 3 : p + 4] + flat[:, p + 5 : p + 6] * H[None, :]
    fpr = 0.5 / (1.0 + np.exp(-a0))
    fnr = 0.5 / (1.0 + np.exp(-a1))
    return float(fpr.mean()), float(fnr.mean())


def _write_method_figures(out: Path, label: str, result: FitResult, d_true: dict) -> None:
    flat = result.draws.flat(constrained=True)
    names = result.param_names
    columns = {}
    for want in ("fpr", "fnr", "tau"):
        if want in names:
            columns[want] = flat[:, names.index(want)]
    if result.report.ate is not None:
        from .analysis import ate_draws

        columns["eta"] = ate_draws(result.draws, result.dataset)
    write_param_draws_csv(columns, out / f"fig_draws_{label}.csv")
    write_per_call_by_state_csv(result.report.per_call, d_true, out / f"fig_per_call_{label}.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentratings",
        description="Latent binary state inference from repeated noisy ratings",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic ratings dataset")
    sim.add_argument("--preset", choices=sorted(PRESETS), help="bundled scenario")
    sim.add_argument("--config", help="flat key=value config file")
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    def add_sampler_flags(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--chains", type=int, default=4)
        p.add_argument("--warmup", type=int, default=1000)
        p.add_argument("--samples", type=int, default=1000)
        p.add_argument("--leapfrog-steps", type=int, default=32)
        p.add_argument("--target-accept", type=float, default=0.8)
        p.add_argument("--priors", help="key=value prior hyperparameter file")
        p.add_argument("--plugin-posterior", action="store_true",
                       help="per-call probabilities at posterior-mean parameters")
        p.add_argument("--difficulty-as-covariate", action="store_true")
        p.add_argument("--standardize", action="store_true",
                       help="zero-mean/unit-sd covariates (recorded in manifest)")
        p.add_argument("--allow-nonconverged", action="store_true")

    fit_p = sub.add_parser("fit", help="fit the latent-state model to a dataset")
    fit_p.add_argument("--data", required=True, help="ratings CSV (long or wide)")
    fit_p.add_argument("--format", choices=("auto", "long", "wide"), default="auto")
    fit_p.add_argument("--model", choices=("base", "extended"), default="base")
    fit_p.add_argument("--rounds-keep", type=int, default=None,
                       help="keep only the first N rating rounds")
    fit_p.add_argument("--dump-draws", action="store_true")
    fit_p.add_argument("--out", required=True)
    add_sampler_flags(fit_p)
    fit_p.set_defaults(func=cmd_fit)

    ana = sub.add_parser("analyze", help="recovery metrics for a finished fit")
    ana.add_argument("--per-call", required=True, help="per_call.csv from fit")
    ana.add_argument("--truth", required=True, help="truth CSV")
    ana.add_argument("--out", required=True)
    ana.set_defaults(func=cmd_analyze)

    cmp_p = sub.add_parser("compare", help="run several methods and tabulate")
    cmp_p.add_argument("--data", required=True)
    cmp_p.add_argument("--format", choices=("auto", "long", "wide"), default="auto")
    cmp_p.add_argument("--truth", required=True)
    cmp_p.add_argument("--methods", required=True,
                       help="comma list, e.g. ext-10,base-10,ext-5,base-5,mv-10")
    cmp_p.add_argument("--tie-break", choices=("to-zero", "to-one"), default="to-zero")
    cmp_p.add_argument("--out", required=True)
    add_sampler_flags(cmp_p)
    cmp_p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, DatasetError, ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
