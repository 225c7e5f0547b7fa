"""
Command line interface::

    bhmc fit --config run.json
    bhmc generate --n 200 --mode infinite --seed 1 --out synth/
    bhmc eval --pred out/tree.json --truth synth/truth.json --levels 3
    bhmc export-dot --tree out/tree.json
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError
from .evaluation import level_report
from .inference import SamplerConfig, run_sampler
from .io import (TreeExport, export_state, load_csv, pca_reduce, report_to_json, standardize,
                 to_dot, write_data_csv, write_report_csv, write_trace_csv)
from .model import Hyperparams, generate
from .stochastic import make_rng

logger = logging.getLogger("bhmc")

EXIT_INPUT = 2


@dataclass
class RunConfig:
    input: str
    output_dir: str = "bhmc_out"
    has_header: bool = False
    pca_dim: Optional[int] = None
    standardize: bool = False
    chains: int = 1
    truth: Optional[str] = None
    max_level: Optional[int] = None
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path = Path(".")) -> "RunConfig":
        if not isinstance(doc, dict):
            raise InputError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "input" not in doc:
            raise InputError("config needs an 'input' path")
        doc = dict(doc)
        try:
            doc["hyperparams"] = Hyperparams(**doc.get("hyperparams", {}))
            doc["sampler"] = SamplerConfig(**doc.get("sampler", {}))
            cfg = cls(**doc)
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid config: {exc}") from None
        for name in ("input", "output_dir", "truth"):
            value = getattr(cfg, name)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg, name, str(base_dir / value))
        if cfg.chains < 1:
            raise InputError("chains must be >= 1")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc, path.parent)


def prepare_data(cfg: RunConfig) -> np.ndarray:
    X = load_csv(cfg.input, cfg.has_header)
    if cfg.standardize:
        X = standardize(X)
    if cfg.pca_dim is not None:
        X = pca_reduce(X, cfg.pca_dim)
    return X


def _run_chain(X, hp, sampler_cfg, chain):
    best, trace = run_sampler(X, hp, sampler_cfg, rng=make_rng(sampler_cfg.seed, chain))
    return best, trace


def cmd_fit(cfg: RunConfig) -> int:
    X = prepare_data(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(X, cfg.hyperparams, cfg.sampler, c) for c in range(cfg.chains)]
    if cfg.chains == 1:
        results = [_run_chain(*jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=cfg.chains) as pool:
            results = list(pool.map(_run_chain, *zip(*jobs)))
    # ties go to the lowest chain index
    chain = max(range(len(results)), key=lambda i: (results[i][0].best_loglik, -i))
    best, trace = results[chain]
    export = export_state(best, best.best_loglik)
    export.save(out / "tree.json")
    write_trace_csv(trace, out / "trace.csv")
    if cfg.chains > 1:
        for i, (_, tr) in enumerate(results):
            write_trace_csv(tr, out / f"trace_chain{i}.csv")
    if cfg.truth is not None:
        truth = TreeExport.load(cfg.truth)
        max_level = cfg.max_level or (cfg.hyperparams.levels + 1)
        report = level_report(export.paths, truth.paths, max_level)
        (out / "metrics.json").write_text(report_to_json(report), encoding="utf-8")
    logger.info("best chain %d, complete-data log likelihood %.4f", chain, best.best_loglik)
    return 0


def parse_mode(mode: str) -> Optional[int]:
    """``infinite`` -> None, ``finite:K`` -> K."""
    if mode == "infinite":
        return None
    if mode.startswith("finite:"):
        try:
            k = int(mode.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return k
    raise InputError(f"mode must be 'infinite' or 'finite:K' with K >= 1, got {mode!r}")


def cmd_generate(n_obs: int, hp: Hyperparams, out_dir, dim: int = 2) -> int:
    rng = make_rng(hp.seed)
    data = generate(n_obs, hp, rng, dim=dim)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_data_csv(data.X, out / "data.csv")
    export_state(data.state).save(out / "truth.json")
    return 0


def cmd_eval(pred_path, truth_path, max_level: int, out_dir=None) -> int:
    pred = TreeExport.load(pred_path)
    truth = TreeExport.load(truth_path)
    if len(pred.paths) != len(truth.paths):
        raise InputError(f"observation counts differ: {len(pred.paths)} in {pred_path}, "
                         f"{len(truth.paths)} in {truth_path}")
    if max_level < 1:
        raise InputError("levels must be >= 1")
    report = level_report(pred.paths, truth.paths, max_level)
    text = report_to_json(report)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text, encoding="utf-8")
        write_report_csv(report, out / "metrics.csv")
    sys.stdout.write(text)
    return 0


def cmd_export_dot(tree_path, out_path=None) -> int:
    text = to_dot(TreeExport.load(tree_path))
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhmc", description="Bayesian hierarchical mixture clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="run the MCMC sampler on a CSV dataset")
    p.add_argument("--config", required=True)

    p = sub.add_parser("generate", help="sample a synthetic dataset from the model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", default="infinite", help="'infinite' or 'finite:K'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--gamma0", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--sigma2", type=float, default=1.0)

    p = sub.add_parser("eval", help="level-wise metrics of a predicted tree against a truth tree")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--out", default=None, help="directory for metrics.json and metrics.csv")

    p = sub.add_parser("export-dot", help="render a tree export as Graphviz DOT")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            return cmd_fit(RunConfig.load(args.config))
        if args.command == "generate":
            if args.n < 1:
                raise InputError("--n must be >= 1")
            try:
                hp = Hyperparams(alpha=args.alpha, gamma0=args.gamma0, gamma=args.gamma,
                                 sigma2=args.sigma2, levels=args.levels, seed=args.seed,
                                 finite_k=parse_mode(args.mode))
            except ValueError as exc:
                raise InputError(str(exc)) from None
            return cmd_generate(args.n, hp, args.out, dim=args.dim)
        if args.command == "eval":
            return cmd_eval(args.pred, args.truth, args.levels, args.out)
        if args.command == "export-dot":
            return cmd_export_dot(args.tree, args.out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 1


if __name__ == "__main__":
    sys.exit(main())
