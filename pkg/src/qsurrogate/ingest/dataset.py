"""Labeled circuit datasets: synthetic generator and directory loader.

On disk a dataset is::

    <dir>/meta.json
    <dir>/circuits/<id>.qasm
    <dir>/labels.csv          # header: id,label

The generator builds, for each label, one random anchor circuit and then
emits every item as anchor + a few near-identity noise blocks. Both kinds of
block are written in the QASM gate set so files re-parse exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qasm import GateStatement, QasmProgram, parse_qasm, print_qasm, to_feature_state


class DatasetError(ValueError):
    pass


@dataclass
class LabeledCircuitDataset:
    n_qubits: int
    label_count: int
    ids: list[str]
    programs: list[QasmProgram]
    labels: np.ndarray
    meta: dict

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=int)
        if not (len(self.ids) == len(self.programs) == len(self.labels)):
            raise DatasetError("ids, programs and labels differ in length")
        for pid, prog in zip(self.ids, self.programs):
            if prog.n_qubits != self.n_qubits:
                raise DatasetError(
                    f"item {pid} has {prog.n_qubits} qubits, dataset has {self.n_qubits}"
                )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.label_count):
            raise DatasetError(f"labels must lie in [0, {self.label_count})")

    def __len__(self) -> int:
        return len(self.ids)

    def feature_states(self) -> np.ndarray:
        return np.array([to_feature_state(p) for p in self.programs])

    def qasm_texts(self) -> list[str]:
        return [print_qasm(p) for p in self.programs]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for pid, text, lab in zip(self.ids, self.qasm_texts(), self.labels):
            h.update(f"{pid}\0{lab}\0{text}\0".encode())
        return h.hexdigest()

    def subset(self, indices) -> "LabeledCircuitDataset":
        idx = list(indices)
        return LabeledCircuitDataset(
            self.n_qubits,
            self.label_count,
            [self.ids[i] for i in idx],
            [self.programs[i] for i in idx],
            self.labels[idx],
            self.meta,
        )


def _random_block(rng: np.random.Generator, a: int, b: int) -> list[GateStatement]:
    """Generic two-qubit block: 1q layers around three CNOTs, uniform angles."""
    def layer() -> list[GateStatement]:
        return [
            GateStatement("u3", (q,), tuple(float(t) for t in rng.uniform(0, 2 * math.pi, 3)))
            for q in (a, b)
        ]

    out = layer()
    for ctrl, tgt in ((a, b), (b, a), (a, b)):
        out.append(GateStatement("cx", (ctrl, tgt)))
        out += layer()
    return out


def _noise_block(rng: np.random.Generator, a: int, b: int, scale: float) -> list[GateStatement]:
    """Near-identity two-qubit block; every angle ~ N(0, scale^2)."""
    t = [float(x) for x in rng.normal(0.0, scale, 7)]
    return [
        GateStatement("rz", (a,), (t[0],)),
        GateStatement("ry", (a,), (t[1],)),
        GateStatement("rz", (b,), (t[2],)),
        GateStatement("ry", (b,), (t[3],)),
        GateStatement("cx", (a, b)),
        GateStatement("rz", (b,), (t[4],)),
        GateStatement("cx", (a, b)),
        GateStatement("rx", (a,), (t[5],)),
        GateStatement("rx", (b,), (t[6],)),
    ]


def _random_pair(rng: np.random.Generator, n: int) -> tuple[int, int]:
    a, b = rng.choice(n, size=2, replace=False)
    return int(a), int(b)


def generate_clustered_dataset(
    n_qubits: int,
    labels: int,
    per_label: int,
    anchor_depth: int = 20,
    noise_depth: int = 4,
    noise_scale: float = 0.1,
    seed: int = 0,
) -> LabeledCircuitDataset:
    if n_qubits < 2:
        raise DatasetError("n_qubits must be at least 2")
    if labels < 1 or per_label < 1 or anchor_depth < 0 or noise_depth < 0:
        raise DatasetError("labels and per_label must be >= 1, depths >= 0")
    if noise_scale < 0:
        raise DatasetError("noise_scale must be non-negative")
    rng = np.random.default_rng(seed)
    anchors = []
    for _ in range(labels):
        stmts: list[GateStatement] = []
        for _ in range(anchor_depth):
            stmts += _random_block(rng, *_random_pair(rng, n_qubits))
        anchors.append(stmts)

    ids, programs, ys = [], [], []
    for lab in range(labels):
        for i in range(per_label):
            stmts = list(anchors[lab])
            for _ in range(noise_depth):
                stmts += _noise_block(rng, *_random_pair(rng, n_qubits), noise_scale)
            ids.append(f"l{lab}_{i:04d}")
            programs.append(QasmProgram(n_qubits, stmts))
            ys.append(lab)
    meta = {
        "n_qubits": n_qubits,
        "label_count": labels,
        "generator": {
            "kind": "clustered",
            "per_label": per_label,
            "anchor_depth": anchor_depth,
            "noise_depth": noise_depth,
            "noise_scale": noise_scale,
            "seed": seed,
        },
    }
    return LabeledCircuitDataset(n_qubits, labels, ids, programs, np.array(ys), meta)


def save_dataset(dataset: LabeledCircuitDataset, directory: str | Path) -> Path:
    root = Path(directory)
    (root / "circuits").mkdir(parents=True, exist_ok=True)
    for pid, text in zip(dataset.ids, dataset.qasm_texts()):
        (root / "circuits" / f"{pid}.qasm").write_text(text)
    with open(root / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        for pid, lab in zip(dataset.ids, dataset.labels):
            w.writerow([pid, int(lab)])
    (root / "meta.json").write_text(json.dumps(dataset.meta, indent=2, sort_keys=True) + "\n")
    return root


def load_dataset(directory: str | Path) -> LabeledCircuitDataset:
    root = Path(directory)
    if not root.is_dir():
        raise DatasetError(f"{root}: dataset directory not found")
    for name in ("meta.json", "labels.csv"):
        if not (root / name).is_file():
            raise DatasetError(f"{root / name}: missing file")
    meta = json.loads((root / "meta.json").read_text())
    ids, programs, ys = [], [], []
    with open(root / "labels.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "label"]:
            raise DatasetError(f"{root / 'labels.csv'}:1: header must be 'id,label'")
        for lineno, row in enumerate(reader, start=2):
            path = root / "circuits" / f"{row['id']}.qasm"
            if not path.is_file():
                raise DatasetError(f"{root / 'labels.csv'}:{lineno}: no circuit file {path}")
            try:
                programs.append(parse_qasm(path.read_text()))
            except ValueError as exc:
                raise DatasetError(f"{path}:{exc}") from exc
            try:
                ys.append(int(row["label"]))
            except (TypeError, ValueError) as exc:
                raise DatasetError(f"{root / 'labels.csv'}:{lineno}: bad label") from exc
            ids.append(row["id"])
    if not ids:
        raise DatasetError(f"{root}: dataset is empty")
    n_qubits = int(meta.get("n_qubits", programs[0].n_qubits))
    label_count = int(meta.get("label_count", max(ys) + 1))
    return LabeledCircuitDataset(n_qubits, label_count, ids, programs, np.array(ys), meta)


def stratified_split(
    labels: np.ndarray, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-label shuffled split; returns sorted train and test index arrays."""
    if not 0 < train_fraction < 1:
        raise DatasetError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(train_fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1) if len(idx) > 1 else len(idx)
        train += idx[:k].tolist()
        test += idx[k:].tolist()
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)
