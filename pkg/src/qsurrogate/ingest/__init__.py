from .dataset import (
    DatasetError,
    LabeledCircuitDataset,
    generate_clustered_dataset,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .qasm import (
    GateStatement,
    QasmError,
    QasmProgram,
    parse_qasm,
    print_qasm,
    to_feature_state,
)

__all__ = [
    "DatasetError",
    "GateStatement",
    "LabeledCircuitDataset",
    "QasmError",
    "QasmProgram",
    "generate_clustered_dataset",
    "load_dataset",
    "parse_qasm",
    "print_qasm",
    "save_dataset",
    "stratified_split",
    "to_feature_state",
]
