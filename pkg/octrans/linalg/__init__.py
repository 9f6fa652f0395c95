"""Sparse symmetric linear algebra: storage, orderings and LDL^T."""

from .ldl import (
    LdlFactor,
    SymbolicFactor,
    analyze,
    factorize,
    fill_in,
    refine,
    solve,
)
from .ordering import OrderingFactory, amd_order, natural_order
from .sparse import CooAssembly, SparseSym, write_matrix_market

__all__ = [
    # Storage
    "SparseSym",
    "CooAssembly",
    "write_matrix_market",
    # Orderings
    "OrderingFactory",
    "amd_order",
    "natural_order",
    # Factorization
    "SymbolicFactor",
    "LdlFactor",
    "analyze",
    "factorize",
    "fill_in",
    "solve",
    "refine",
]
