"""``qsurrogate`` command line.

Exit codes: 0 success, 2 configuration or input error, 3 circuit synthesis
did not reach its target fidelities within the gate budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .ingest import DatasetError, QasmError
from .kernel import KernelError
from .pipeline import (
    StageError,
    run_pipeline,
    stage_generate,
    stage_gradients,
    stage_spectral,
    stage_synthesize,
    stage_train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("run"), help="output directory (default: run)")
    common.add_argument("--threads", type=int, help="worker cap for per-label stages")
    common.add_argument("--dataset", type=Path, help="load this dataset directory instead of generating")
    common.add_argument("--seed", type=int, help="dataset generator seed")
    common.add_argument("--C", type=float, dest="svm_C", help="SVM regularisation strength")
    common.add_argument("--K", type=int, help="rank kept for the surrogate")
    common.add_argument("--gs-tol", type=float, help="Gram-Schmidt dependence tolerance")
    common.add_argument("--f-target", type=float, help="target fidelity for every eigenvector")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qsurrogate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a synthetic clustered dataset")
    sub.add_parser("train", parents=[common], help="train the one-vs-rest kernel SVM")
    p = sub.add_parser("spectral", parents=[common], help="diagonalise and truncate the observables")
    p.add_argument("--model", type=Path, help="kernel model JSON (default: <out>/kernel_model.json)")
    p = sub.add_parser("synthesize", parents=[common], help="build surrogate circuits")
    p.add_argument("--bundle", type=Path, help="spectral bundle (default: <out>/spectral_bundle.json)")
    p = sub.add_parser("gradients", parents=[common], help="EQS vs random-init gradient comparison")
    p.add_argument("--eqs", type=Path, help="EQS model (default: <out>/eqs_model.json)")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    return parser


def _effective_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config is not None else RunConfig()
    d = cfg.to_dict()
    if args.threads is not None:
        d["threads"] = args.threads
    if args.dataset is not None:
        d["dataset"]["path"] = str(args.dataset)
    if args.seed is not None:
        d["dataset"]["seed"] = args.seed
    if args.svm_C is not None:
        d["svm"]["C"] = args.svm_C
    if args.K is not None:
        d["spectral"]["K"] = args.K
    if args.gs_tol is not None:
        d["spectral"]["gs_tol"] = args.gs_tol
    if args.f_target is not None:
        d["aqce"]["F_target"] = args.f_target
    return RunConfig.from_dict(d)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = _effective_config(args)
        if args.command == "show-config":
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            return EXIT_OK
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        converged = True
        if args.command == "generate":
            summary = stage_generate(cfg, out)
        elif args.command == "train":
            summary = stage_train(cfg, out)
        elif args.command == "spectral":
            summary = stage_spectral(cfg, out, model_path=args.model)
        elif args.command == "synthesize":
            summary, converged = stage_synthesize(cfg, out, bundle_path=args.bundle)
        elif args.command == "gradients":
            summary = stage_gradients(cfg, out, eqs_path=args.eqs)
        else:
            summary, converged = run_pipeline(cfg, out)
    except (ConfigError, DatasetError, QasmError, StageError, KernelError) as exc:
        print(f"qsurrogate: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, indent=2, sort_keys=True))
    if not converged:
        print("qsurrogate: circuit synthesis did not reach the target fidelities", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
