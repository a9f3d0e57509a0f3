"""Pipeline stages shared by the CLI subcommands.

Every stage reads its inputs from and writes its outputs into one output
directory, so ``pipeline`` is literally the stages run back to back::

    dataset/                      generate
    kernel_model.json             train
    spectral_bundle.json          spectral
    spectral.csv, accuracy_vs_K.csv
    eqs_model.json                synthesize
    aqce_trace_label<l>.csv, aqce_heatmap_label<l>.csv
    gradients.json                gradients
    adam_loss_label<l>.csv        (only when gradients.adam_steps > 0)
    <stage>_report.json           one per stage
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .aqce import heatmap_csv, synthesize_isometry
from .config import RunConfig
from .eqs import (
    EQSModel,
    ParameterizedEQS,
    adam_train,
    gradient_experiment,
    predict_eqs,
)
from .ingest import (
    LabeledCircuitDataset,
    generate_clustered_dataset,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .kernel import KernelModel, gram, predict_implicit, train_one_vs_rest
from .spectral import (
    SpectralDecomposition,
    cumulative_contribution,
    decompose,
    predict_low_rank,
)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """Missing or inconsistent stage inputs."""


def version_string() -> str:
    return f"qsurrogate-v{__version__}"


@dataclass
class Context:
    dataset: LabeledCircuitDataset
    states: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def train_states(self) -> np.ndarray:
        return self.states[self.train_idx]

    @property
    def test_states(self) -> np.ndarray:
        return self.states[self.test_idx]

    @property
    def y(self) -> np.ndarray:
        return self.dataset.labels


def resolve_dataset(cfg: RunConfig) -> LabeledCircuitDataset:
    d = cfg.dataset
    if d.path is not None:
        return load_dataset(d.path)
    return generate_clustered_dataset(
        d.n_qubits, d.labels, d.per_label, d.anchor_depth, d.noise_depth, d.noise_scale, d.seed
    )


def load_context(cfg: RunConfig) -> Context:
    ds = resolve_dataset(cfg)
    tr, te = stratified_split(ds.labels, cfg.split.train_fraction, cfg.split.seed)
    return Context(ds, ds.feature_states(), tr, te)


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path, what: str) -> dict:
    if not path.is_file():
        raise StageError(f"{path}: {what} not found (run the earlier stage first)")
    return json.loads(path.read_text())


def _report(cfg: RunConfig, stage: str, results: dict) -> dict:
    return {
        "stage": stage,
        "version": version_string(),
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seeds": cfg.seeds(),
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "results": results,
    }


def _accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(pred == y)) if len(y) else float("nan")


def _check_hash(ctx: Context, stored: str, path: Path) -> None:
    if stored and stored != ctx.dataset.content_hash():
        raise StageError(f"{path}: model was trained on a different dataset")


# -- stages -----------------------------------------------------------------


def stage_generate(cfg: RunConfig, out: Path) -> dict:
    ds = resolve_dataset(cfg)
    save_dataset(ds, out / "dataset")
    results = {"n_items": len(ds), "n_qubits": ds.n_qubits, "label_count": ds.label_count,
               "dataset_hash": ds.content_hash()}
    _write_json(out / "generate_report.json", _report(cfg, "generate", results))
    return results


def stage_train(cfg: RunConfig, out: Path, ctx: Context | None = None) -> dict:
    ctx = ctx or load_context(cfg)
    G = gram(ctx.train_states)
    model = train_one_vs_rest(
        G, ctx.y[ctx.train_idx], cfg.svm.C, cfg.svm.tol, label_count=ctx.dataset.label_count
    )
    model.train_ids = [ctx.dataset.ids[i] for i in ctx.train_idx]
    model.dataset_hash = ctx.dataset.content_hash()
    (out / "kernel_model.json").write_text(model.to_json() + "\n")
    pred, _ = predict_implicit(model, ctx.train_states, ctx.states)
    results = {
        "n_train": len(ctx.train_idx),
        "n_test": len(ctx.test_idx),
        "train_accuracy": _accuracy(pred[ctx.train_idx], ctx.y[ctx.train_idx]),
        "test_accuracy": _accuracy(pred[ctx.test_idx], ctx.y[ctx.test_idx]),
        "support_vectors": [int(np.sum(np.abs(a) > 0)) for a in model.alphas],
        "dataset_hash": model.dataset_hash,
    }
    _write_json(out / "train_report.json", _report(cfg, "train", results))
    return results


def _load_model(ctx: Context, path: Path) -> KernelModel:
    model = KernelModel.from_dict(_read_json(path, "kernel model"))
    _check_hash(ctx, model.dataset_hash, path)
    return model


def stage_spectral(cfg: RunConfig, out: Path, ctx: Context | None = None, model_path: Path | None = None) -> dict:
    ctx = ctx or load_context(cfg)
    model_path = model_path or out / "kernel_model.json"
    model = _load_model(ctx, model_path)
    G = gram(ctx.train_states)
    dec = decompose(ctx.train_states, G, model, cfg.spectral.gs_tol)
    bundle = dec.to_dict()
    bundle["dataset_hash"] = model.dataset_hash
    _write_json(out / "spectral_bundle.json", bundle)
    (out / "spectral.csv").write_text(dec.spectrum_csv())

    y_tr, y_te = ctx.y[ctx.train_idx], ctx.y[ctx.test_idx]
    imp_pred, _ = predict_implicit(model, ctx.train_states, ctx.states)
    Ks = sorted(set(k for k in cfg.spectral.K_sweep if k <= dec.subspace_dim) | {dec.subspace_dim})
    rows = []
    for K in Ks:
        pred, _ = predict_low_rank(dec.low_rank(K), ctx.states)
        rows.append(
            {
                "K": K,
                "train_accuracy": _accuracy(pred[ctx.train_idx], y_tr),
                "test_accuracy": _accuracy(pred[ctx.test_idx], y_te),
                "mean_cumulative_ratio": float(
                    np.mean([cumulative_contribution(o, min(K, o.rank)) for o in dec.observables])
                ),
            }
        )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["K", "train_accuracy", "test_accuracy", "mean_cumulative_ratio"])
    for r in rows:
        w.writerow([r["K"], repr(r["train_accuracy"]), repr(r["test_accuracy"]), repr(r["mean_cumulative_ratio"])])
    (out / "accuracy_vs_K.csv").write_text(buf.getvalue())

    alignment = []
    for l, obs in enumerate(dec.observables):
        fid = np.abs(ctx.test_states.conj() @ obs.eigenvectors[0]) ** 2
        same = y_te == l
        alignment.append(
            {
                "label": l,
                "same_label_fidelity": float(fid[same].mean()) if same.any() else None,
                "other_label_fidelity": float(fid[~same].mean()) if (~same).any() else None,
            }
        )
    results = {
        "subspace_dim": dec.subspace_dim,
        "implicit_train_accuracy": _accuracy(imp_pred[ctx.train_idx], y_tr),
        "implicit_test_accuracy": _accuracy(imp_pred[ctx.test_idx], y_te),
        "accuracy_vs_K": rows,
        "top_eigenvector_alignment": alignment,
    }
    _write_json(out / "spectral_report.json", _report(cfg, "spectral", results))
    return results


def _load_bundle(ctx: Context, path: Path) -> SpectralDecomposition:
    data = _read_json(path, "spectral bundle")
    _check_hash(ctx, data.get("dataset_hash", ""), path)
    return SpectralDecomposition.from_dict(data, ctx.train_states)


def stage_synthesize(
    cfg: RunConfig, out: Path, ctx: Context | None = None, bundle_path: Path | None = None
) -> tuple[dict, bool]:
    ctx = ctx or load_context(cfg)
    dec = _load_bundle(ctx, bundle_path or out / "spectral_bundle.json")
    lr = dec.low_rank(cfg.spectral.K)

    def run(obs):
        return synthesize_isometry(obs.eigenvectors, cfg.aqce)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results_per_label = list(pool.map(run, lr.observables))

    eqs = EQSModel(
        [r.circuit for r in results_per_label],
        [o.eigenvalues.copy() for o in lr.observables],
        lr.biases.copy(),
        [r.converged for r in results_per_label],
    )
    data = eqs.to_dict()
    data["dataset_hash"] = ctx.dataset.content_hash()
    _write_json(out / "eqs_model.json", data)
    for l, r in enumerate(results_per_label):
        (out / f"aqce_trace_label{l}.csv").write_text(r.trace.to_csv())
        (out / f"aqce_heatmap_label{l}.csv").write_text(heatmap_csv(r.circuit))

    y_te = ctx.y[ctx.test_idx]
    eqs_pred, _ = predict_eqs(eqs, ctx.test_states)
    lr_pred, _ = predict_low_rank(lr, ctx.test_states)
    labels = []
    for l, r in enumerate(results_per_label):
        totals = r.trace.totals()
        labels.append(
            {
                "label": l,
                "rank": lr.observables[l].rank,
                "gates": len(r.circuit),
                "fidelities": [float(f) for f in r.fidelities],
                "converged": r.converged,
                "updates": len(r.trace.records),
                "min_total_fidelity_step": float(np.diff(totals).min()) if len(totals) > 1 else 0.0,
            }
        )
    converged = all(r.converged for r in results_per_label)
    results = {
        "K": cfg.spectral.K,
        "labels": labels,
        "all_converged": converged,
        "eqs_test_accuracy": _accuracy(eqs_pred, y_te),
        "low_rank_test_accuracy": _accuracy(lr_pred, y_te),
    }
    _write_json(out / "synthesize_report.json", _report(cfg, "synthesize", results))
    return results, converged


def stage_gradients(cfg: RunConfig, out: Path, ctx: Context | None = None, eqs_path: Path | None = None) -> dict:
    ctx = ctx or load_context(cfg)
    eqs_path = eqs_path or out / "eqs_model.json"
    data = _read_json(eqs_path, "EQS model")
    _check_hash(ctx, data.get("dataset_hash", ""), eqs_path)
    eqs = EQSModel.from_dict(data)
    g = cfg.gradients
    reports = gradient_experiment(eqs, ctx.test_states, ctx.y[ctx.test_idx], seed=g.seed, n_random=g.n_random)
    grad_json = {f"label_{r.label}": r.to_dict() for r in reports}
    _write_json(out / "gradients.json", grad_json)

    training = []
    if g.adam_steps > 0:
        y_te = ctx.y[ctx.test_idx]
        for l, (circ, w, b) in enumerate(zip(eqs.circuits, eqs.eigenvalues, eqs.biases)):
            pm = ParameterizedEQS.from_circuit(circ, w, b)
            res = adam_train(
                pm, ctx.test_states, (y_te == l).astype(float), g.adam_steps,
                g.adam_lr, g.adam_beta1, g.adam_beta2, g.adam_eps, g.batch_size, g.seed,
            )
            (out / f"adam_loss_label{l}.csv").write_text(res.trace_csv())
            training.append({"label": l, "initial_loss": res.initial_loss, "final_loss": res.final_loss})
    results = {"labels": [r.to_dict() for r in reports], "adam": training}
    _write_json(out / "gradients_report.json", _report(cfg, "gradients", results))
    return results


def run_pipeline(cfg: RunConfig, out: Path) -> tuple[dict, bool]:
    out.mkdir(parents=True, exist_ok=True)
    ctx = load_context(cfg)
    results = {}
    if cfg.dataset.path is None:
        results["generate"] = stage_generate(cfg, out)
    results["train"] = stage_train(cfg, out, ctx)
    results["spectral"] = stage_spectral(cfg, out, ctx)
    results["synthesize"], converged = stage_synthesize(cfg, out, ctx)
    results["gradients"] = stage_gradients(cfg, out, ctx)
    _write_json(out / "report.json", _report(cfg, "pipeline", results))
    return results, converged
