"""MPS-to-shallow-circuit compilation toolkit.

Core layers: tensor-network state algebra (`tensor`), a gate/circuit
model with KAK-based CNOT accounting (`circuits`, `kak`), an MPS circuit
simulator (`simulator`), adaptive and fixed-brickwork variational
compilers (`adapt`, `aqctensor`), exact/approximate staircase baselines
(`sequential`), XXZ spin-chain physics (`physics`), dense reference
oracles (`oracle`), and a batch CLI (`cli`).
"""

from .circuits import Circuit, Gate, cnot_metrics, load_circuit, save_circuit
from .tensor import (
    MPOOperator,
    MPSState,
    TruncationPolicy,
    canonicalize,
    compress,
    fidelity,
    inner_product,
    load_mps,
    save_mps,
)

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "Gate",
    "MPOOperator",
    "MPSState",
    "TruncationPolicy",
    "canonicalize",
    "cnot_metrics",
    "compress",
    "fidelity",
    "inner_product",
    "load_circuit",
    "load_mps",
    "save_circuit",
    "save_mps",
    "__version__",
]
