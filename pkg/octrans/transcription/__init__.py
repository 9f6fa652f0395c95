"""Direct transcription of optimal control problems into structured NLPs."""

from .layout import Grid, TimeBound, VariableLayout
from .lowering import KernelLowering, NodeContext
from .nlp import ConstraintGroup, GroupKind, ObjectiveGroup, StructuredNlp
from .transcriber import Transcriber, initial_point, transcribe

__all__ = [
    # Entry points
    "transcribe",
    "initial_point",
    "Transcriber",
    # NLP model
    "StructuredNlp",
    "ConstraintGroup",
    "ObjectiveGroup",
    "GroupKind",
    # Layout
    "VariableLayout",
    "Grid",
    "TimeBound",
    # Lowering
    "KernelLowering",
    "NodeContext",
]
