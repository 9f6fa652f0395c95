"""Transcription option schemas."""

from enum import Enum
from typing import List, Tuple, Union

from pydantic import BaseModel, Field


class Scheme(str, Enum):
    """One-step discretization schemes."""

    EULER = "euler"
    TRAPEZOID = "trapezoid"


class InitPolicy(BaseModel):
    """Initial values for the decision vector.

    Scalars fill a whole slab; lists give one value per slot of the slab in
    layout order (variables, then node-major states, then node-major
    controls).
    """

    variable: Union[float, List[float]] = Field(default=0.1)
    state: Union[float, List[float]] = Field(default=0.1)
    control: Union[float, List[float]] = Field(default=0.1)

    @classmethod
    def from_triple(cls, triple: Tuple[float, float, float]) -> "InitPolicy":
        """Build a policy from a ``(variable, state, control)`` triple."""
        return cls(variable=triple[0], state=triple[1], control=triple[2])
