"""Per-index kernels, structural sparsity and derivative evaluation."""

from .expr import Kernel, KernelBuilder, KernelNode, Op, SlotInput
from .sparsity import SparsityPattern, detect_sparsity
from .tape import (
    KernelTape,
    eval_gradient,
    eval_hessian,
    eval_jacobian,
    eval_value,
)

__all__ = [
    # Graphs
    "Kernel",
    "KernelBuilder",
    "KernelNode",
    "Op",
    "SlotInput",
    # Sparsity
    "SparsityPattern",
    "detect_sparsity",
    # Evaluation
    "KernelTape",
    "eval_value",
    "eval_jacobian",
    "eval_hessian",
    "eval_gradient",
]
