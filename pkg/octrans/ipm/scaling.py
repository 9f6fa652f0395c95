"""Gradient-based problem scaling, fixed for a whole solve."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from octrans.backends import Backend
from octrans.core.logging import get_logger
from octrans.transcription import StructuredNlp

logger = get_logger(__name__)


@dataclass(frozen=True)
class ProblemScaling:
    """Multiplicative factors for the objective and each constraint row."""

    objective: float
    rows: np.ndarray

    @classmethod
    def identity(cls, m_con: int) -> "ProblemScaling":
        return cls(objective=1.0, rows=np.ones(m_con))


def gradient_scale(norm: float, max_gradient: float = 100.0) -> float:
    """``min(1, max_gradient / norm)``; 1 for a zero norm."""
    if norm <= 0.0 or not np.isfinite(norm):
        return 1.0
    return min(1.0, max_gradient / norm)


def scale_problem(
    nlp: StructuredNlp,
    x: Optional[np.ndarray] = None,
    backend: Optional[Backend] = None,
    max_gradient: float = 100.0,
) -> ProblemScaling:
    """Scaling factors from the gradient and Jacobian rows at ``x`` (start point)."""
    x = nlp.x_start if x is None else x
    grad = nlp.gradient(x, backend)
    objective = gradient_scale(float(np.max(np.abs(grad), initial=0.0)), max_gradient)

    rows, _ = nlp.jac_structure
    values = np.abs(nlp.jacobian(x, backend))
    row_max = np.zeros(nlp.m_con)
    np.maximum.at(row_max, rows, values)
    with np.errstate(divide="ignore"):
        row_scale = np.where(
            row_max > 0.0, np.minimum(1.0, max_gradient / row_max), 1.0
        )
    logger.debug(
        "problem_scaled",
        objective=objective,
        scaled_rows=int(np.count_nonzero(row_scale < 1.0)),
        min_row_scale=float(row_scale.min(initial=1.0)),
    )
    return ProblemScaling(objective=objective, rows=row_scale)
