"""Command-line interface: ``hhinfer fit|simulate|aggregate|validate-coverage|summarize``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io
from .datasets import (HighInfoDataset, LowInfoDataset, aggregate_to_low,
                       aggregate_to_medium)
from .errors import HHInferError
from .final_size import InfectiousPeriodModel, Theta
from .inference import (DirichletSpec, HalfNormal, ImproperPositive, PointMass, PriorSpec,
                        UniformUnit, load_eta_samples)
from .mcmc import (ChainConfig, PosteriorSamples, ProposalConfig, bootstrap_sar_ci,
                   dataset_level, implied_sar, run_chain, summarize)
from .synth import (CoverageSpec, coverage_experiment, dirichlet_from_distribution,
                    generate_dataset, resolve_distribution)

log = logging.getLogger("hhinfer")

LEVEL_RANK = {"high": 2, "medium": 1, "low": 0}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration helpers

def resolve_seed(seed):
    """Explicit seed, else ``HHINFER_SEED``, else fresh entropy."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("HHINFER_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"HHINFER_SEED must be an integer, got {env!r}") from None
    return int(np.random.SeedSequence().entropy % 2**63)


def merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Flags as a dict, overridden by ``--config`` JSON keys when given."""
    values = {k: v for k, v in vars(args).items() if k not in ("func", "config", "command")}
    if not args.config:
        return values
    try:
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(loaded, dict):
        raise UsageError(f"config {args.config} must hold a JSON object")
    loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
    unknown = set(loaded) - set(values)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    overridden = [k for k in loaded
                  if values[k] != parser.get_default(k) and values[k] != loaded[k]]
    if overridden:
        log.warning("--config overrides command-line values for: %s", ", ".join(sorted(overridden)))
    values.update(loaded)
    return values


def parse_model(text) -> InfectiousPeriodModel:
    return InfectiousPeriodModel.parse(str(text))


def parse_beta_prior(text: str):
    if text in ("improper", "improper-positive", "flat"):
        return ImproperPositive()
    if text.startswith("half-normal:"):
        return HalfNormal(float(text.split(":", 1)[1]))
    raise UsageError(f"unknown beta prior {text!r} (use improper or half-normal:SCALE)")


def parse_eta_prior(text: str, bandwidth: float):
    if text == "uniform":
        return UniformUnit()
    if text.startswith("fixed:"):
        return PointMass(float(text.split(":", 1)[1]))
    if text.startswith("samples:"):
        return load_eta_samples(text.split(":", 1)[1], bandwidth)
    raise UsageError(f"unknown eta prior {text!r} (use uniform, fixed:VALUE or samples:PATH)")


def build_alpha(cfg: dict, m: int) -> tuple[DirichletSpec, int]:
    """Dirichlet from a distribution (file or bundled name) or uniform."""
    if cfg.get("distribution"):
        dist = resolve_distribution(cfg["distribution"])
        return dirichlet_from_distribution(dist, float(cfg["alpha0"])), dist.m
    mm = int(cfg["max_contacts"]) if cfg.get("max_contacts") else m
    return DirichletSpec.uniform(mm, float(cfg["alpha0"])), mm


def chain_config(cfg: dict, seed: int, eta_prior) -> ChainConfig:
    fit_eta = not isinstance(eta_prior, PointMass)
    proposal = ProposalConfig(s=float(cfg["s"]), sigma_beta=float(cfg["sigma_beta"]),
                              sigma_eta=float(cfg["sigma_eta"]), fit_eta=fit_eta,
                              adapt=bool(cfg["adapt"]))
    init_eta = eta_prior.value if not fit_eta else cfg["init_eta"]
    return ChainConfig(iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]),
                       thinning=int(cfg["thinning"]), seed=seed, proposal=proposal,
                       init_beta=cfg["init_beta"], init_eta=init_eta)


def _run_one(job):
    dataset, alpha, model, prior, config = job
    return run_chain(dataset, alpha, model, prior, config)


# ---------------------------------------------------------------------------
# fit

def fit_dataset(dataset, cfg: dict, out_dir: Path, seed: int) -> dict:
    """Fit one dataset and write its outputs; returns the summary dict."""
    model = parse_model(cfg["shape"])
    alpha, m = build_alpha(cfg, io.max_contacts_present(dataset))
    dataset = io.embed(dataset, m)
    if isinstance(dataset, LowInfoDataset):
        dataset.check_feasible()
    eta_prior = parse_eta_prior(cfg["eta_prior"], float(cfg["bandwidth"]))
    prior = PriorSpec(parse_beta_prior(cfg["beta_prior"]), eta_prior)
    base = chain_config(cfg, seed, eta_prior)
    n_chains = int(cfg["chains"])
    if n_chains < 1:
        raise UsageError("--chains must be at least 1")
    if n_chains == 1:
        seeds = [seed]
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_chains)]
    jobs = [(dataset, alpha, model, prior, replace(base, seed=s)) for s in seeds]
    if n_chains > 1 and int(cfg.get("workers") or 1) > 1:
        with ProcessPoolExecutor(int(cfg["workers"])) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    out_dir.mkdir(parents=True, exist_ok=True)
    if n_chains == 1:
        pooled = results[0].samples
        io.write_samples(pooled, out_dir / "samples.csv")
        io.write_trace(results[0], out_dir / "trace.csv")
    else:
        for k, r in enumerate(results, start=1):
            io.write_samples(r.samples, out_dir / f"samples_chain{k}.csv")
            io.write_trace(r, out_dir / f"trace_chain{k}.csv")
        pooled = PosteriorSamples.concatenate(r.samples for r in results)
        io.write_samples(pooled, out_dir / "samples.csv")

    sar = implied_sar(pooled, model, m)
    observed = None
    if isinstance(dataset, HighInfoDataset) and int(cfg["bootstrap"]) > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        observed = bootstrap_sar_ci(dataset, int(cfg["bootstrap"]), rng)
    io.write_sar(sar, observed, m, out_dir / "sar.csv")

    summary = summarize(pooled)
    summary["implied_sar"] = {k: v for k, v in sar.items() if k != "draws"}
    if observed is not None:
        summary["observed_sar"] = observed
    summary["acceptance_rates"] = _pooled_rates(results)
    summary["no_move"] = int(sum(r.no_move for r in results))
    summary["samples"] = len(pooled)
    summary["level"] = dataset_level(dataset)
    summary["m"] = m
    summary["seed"] = seed
    summary["chain_seeds"] = seeds
    summary["alpha"] = alpha.alpha.tolist()
    summary["prior"] = prior.to_dict()
    if n_chains > 1:
        summary["chains"] = [dict(summarize(r.samples), acceptance_rates=r.acceptance_rates,
                                  seed=s) for r, s in zip(results, seeds)]
    summary["config"] = {k: v for k, v in cfg.items() if k not in ("batch",)}
    summary["config"]["seed"] = seed
    summary["chain_config"] = asdict(base)
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _pooled_rates(results) -> dict[str, float]:
    proposed: dict[str, int] = {}
    accepted: dict[str, int] = {}
    for r in results:
        for k in r.proposed:
            proposed[k] = proposed.get(k, 0) + r.proposed[k]
            accepted[k] = accepted.get(k, 0) + r.accepted[k]
    return {k: accepted[k] / proposed[k] if proposed[k] else 0.0 for k in proposed}


BATCH_REQUIRED = ("study", "households", "contacts", "cases", "distribution")


def cmd_fit(cfg: dict) -> int:
    out_dir = Path(cfg["output_dir"])
    seed = resolve_seed(cfg["seed"])
    if cfg.get("batch"):
        return _fit_batch(cfg, out_dir, seed)
    if not cfg.get("data"):
        raise UsageError("fit needs --data or --batch")
    dataset = io.read_dataset(cfg["data"])
    level = cfg.get("level") or "auto"
    if level != "auto" and level != dataset_level(dataset):
        raise UsageError(f"--level {level} does not match the {dataset_level(dataset)}-information "
                         f"schema of {cfg['data']}")
    summary = fit_dataset(dataset, cfg, out_dir, seed)
    b = summary["beta"]
    print(f"beta {b['mean']:.4f} ({b['lower']:.4f}, {b['upper']:.4f}); outputs in {out_dir}")
    return 0


def _fit_batch(cfg: dict, out_dir: Path, seed: int) -> int:
    with open(cfg["batch"], newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BATCH_REQUIRED if c not in (reader.fieldnames or [])]
        if missing:
            raise UsageError(f"batch file lacks columns: {', '.join(missing)}")
        rows = list(reader)
    seen = set()
    results = []
    for i, row in enumerate(rows):
        study = row["study"].strip()
        if not study or study in seen or "/" in study:
            raise UsageError(f"batch row {i + 2}: study name {study!r} is empty, repeated or a path")
        seen.add(study)
        local = dict(cfg, distribution=row["distribution"].strip(), batch=None)
        if row.get("alpha0"):
            local["alpha0"] = float(row["alpha0"])
        dataset = LowInfoDataset(int(row["households"]), int(row["contacts"]), int(row["cases"]))
        study_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        summary = fit_dataset(dataset, local, out_dir / study, study_seed)
        b = summary["beta"]
        results.append({"study": study, "seed": study_seed, "beta_mean": b["mean"],
                        "beta_lower": b["lower"], "beta_upper": b["upper"],
                        "eta_mean": summary["eta"]["mean"]})
        print(f"{study}: beta {b['mean']:.4f} ({b['lower']:.4f}, {b['upper']:.4f})")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "batch_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, list(results[0]) if results else ["study"], lineterminator="\n")
        w.writeheader()
        w.writerows(results)
    return 0


# ---------------------------------------------------------------------------
# simulate / aggregate / summarize / validate-coverage

def cmd_simulate(cfg: dict) -> int:
    households = int(cfg["households"])
    if households < 1:
        raise UsageError(f"--households must be at least 1, got {households}")
    seed = resolve_seed(cfg["seed"])
    dist = resolve_distribution(cfg["distribution"])
    theta = Theta(float(cfg["beta"]), float(cfg["eta"]))
    theta.check()
    model = parse_model(cfg["shape"])
    data = generate_dataset(dist, theta, model, households, np.random.default_rng(seed))
    out = Path(cfg["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_dataset(data, out)
    meta = {"beta": theta.beta, "eta": theta.eta, "shape": str(model), "households": households,
            "distribution": cfg["distribution"], "seed": seed}
    with open(out.with_name(out.name + ".meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {households} households to {out} (seed {seed})")
    return 0


def cmd_aggregate(cfg: dict) -> int:
    dataset = io.read_dataset(cfg["input"])
    source = dataset_level(dataset)
    target = cfg["to"]
    if LEVEL_RANK[target] >= LEVEL_RANK[source]:
        raise UsageError(f"cannot aggregate {source}-information data to {target}: "
                         "the target must be strictly coarser")
    reduced = aggregate_to_medium(dataset) if target == "medium" else aggregate_to_low(dataset)
    out = Path(cfg["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_dataset(reduced, out)
    print(f"wrote {target}-information dataset to {out}")
    return 0


def cmd_summarize(cfg: dict) -> int:
    samples = io.read_samples(cfg["samples"])
    summary = summarize(samples)
    if cfg.get("shape") is not None:
        sar = implied_sar(samples, parse_model(cfg["shape"]))
        summary["implied_sar"] = {k: v for k, v in sar.items() if k != "draws"}
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _parse_thetas(text) -> list[Theta]:
    if isinstance(text, list):
        return [Theta(float(b), float(e)) for b, e in text]
    out = []
    for part in str(text).split(","):
        b, _, e = part.partition(":")
        if not e:
            raise UsageError(f"theta {part!r} must be written BETA:ETA")
        out.append(Theta(float(b), float(e)))
    return out


def _parse_list(text, kind=str):
    if isinstance(text, list):
        return [kind(x) for x in text]
    return [kind(x) for x in str(text).split(",") if x]


def cmd_validate_coverage(cfg: dict) -> int:
    seed = resolve_seed(cfg["seed"])
    names = _parse_list(cfg["distributions"])
    dists = {Path(n).stem: resolve_distribution(n) for n in names}
    chain = ChainConfig(iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]),
                        thinning=int(cfg["thinning"]),
                        proposal=ProposalConfig(s=float(cfg["s"]),
                                                sigma_beta=float(cfg["sigma_beta"])),
                        init_beta=cfg["init_beta"])
    spec = CoverageSpec(thetas=_parse_thetas(cfg["thetas"]), distributions=dists,
                        alpha0s=_parse_list(cfg["alpha0"], float),
                        replicates=int(cfg["replicates"]), households=int(cfg["households"]),
                        generator_model=parse_model(cfg["shape"]),
                        fit_model=parse_model(cfg["fit_shape"] or cfg["shape"]),
                        chain=chain, seed=seed, workers=int(cfg["workers"]))
    rows, fits = coverage_experiment(spec)
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_coverage(rows, out_dir / "coverage.csv")
    with open(out_dir / "fits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta_true", "eta_true", "distribution", "alpha0", "replicate",
                    "mean", "lower", "upper", "covered"])
        for f in fits:
            w.writerow([f.beta_true, f.eta_true, f.distribution, f.alpha0, f.replicate,
                        repr(f.mean), repr(f.lower), repr(f.upper), int(f.covered)])
    with open(out_dir / "coverage_config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dict(cfg, seed=seed), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in rows:
        print(f"beta={r['beta_true']} eta={r['eta_true']} {r['distribution']} "
              f"alpha0={r['alpha0']}: {r['covered']}/{r['replicates']} covered")
    return 0


# ---------------------------------------------------------------------------
# Parser

def _chain_flags(p: argparse.ArgumentParser, iterations=200_000, burn_in=20_000):
    p.add_argument("--iterations", type=int, default=iterations)
    p.add_argument("--burn-in", type=int, default=burn_in)
    p.add_argument("--thinning", type=int, default=10)
    p.add_argument("--s", type=float, default=0.2, help="probability of a theta move")
    p.add_argument("--sigma-beta", type=float, default=0.05)
    p.add_argument("--init-beta", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (falls back to HHINFER_SEED)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hhinfer",
                                     description="Household transmission inference")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit beta and eta to a dataset")
    p.add_argument("--data", help="dataset CSV or JSON")
    p.add_argument("--batch", help="CSV of studies: study,households,contacts,cases,distribution[,alpha0]")
    p.add_argument("--level", choices=["auto", "low", "medium", "high"], default="auto")
    p.add_argument("--shape", default="2", help="gamma shape a, or 'fixed'")
    p.add_argument("--distribution", help="bundled name or CSV for the Dirichlet mean")
    p.add_argument("--alpha0", type=float, default=100.0)
    p.add_argument("--max-contacts", type=int, default=None)
    p.add_argument("--beta-prior", default="improper")
    p.add_argument("--eta-prior", default="uniform")
    p.add_argument("--bandwidth", type=float, default=0.02)
    _chain_flags(p)
    p.add_argument("--sigma-eta", type=float, default=0.05)
    p.add_argument("--init-eta", type=float, default=0.5)
    p.add_argument("--adapt", action="store_true")
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--bootstrap", type=int, default=0,
                   help="bootstrap replicates for observed SAR (high-information only)")
    p.add_argument("--output-dir", default="hhinfer_out")
    p.add_argument("--config", help="JSON config; its values win over flags")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="generate a synthetic high-information dataset")
    p.add_argument("--distribution", default="uk_lfs_2023")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--shape", default="2")
    p.add_argument("--households", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", help="reduce a dataset to a coarser level")
    p.add_argument("input")
    p.add_argument("--to", choices=["medium", "low"], required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("validate-coverage", help="synthetic coverage experiment")
    p.add_argument("--thetas", default="0.5:1,1.5:0,0.5:0", help="BETA:ETA pairs")
    p.add_argument("--distributions", default="uk_lfs_2023,split")
    p.add_argument("--alpha0", default="100,1000")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--households", type=int, default=1000)
    p.add_argument("--shape", default="2")
    p.add_argument("--fit-shape", default=None)
    _chain_flags(p, iterations=300_000, burn_in=100_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", default="coverage_out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate_coverage)

    p = sub.add_parser("summarize", help="summarise a samples.csv file")
    p.add_argument("samples")
    p.add_argument("--shape", default=None, help="also report implied SAR for this model")
    p.add_argument("--output")
    p.add_argument("--config")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        cfg = merge_config(args, sub)
        cfg.pop("verbose", None)
        return args.func(cfg)
    except UsageError as exc:
        print(f"hhinfer {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (HHInferError, OSError, ValueError, KeyError) as exc:
        print(f"hhinfer {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
