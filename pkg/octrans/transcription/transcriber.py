"""Direct transcription of an optimal control problem."""

from typing import List, Sequence, Tuple, Union

import numpy as np

from octrans.core.exceptions import ValidationException
from octrans.core.logging import get_logger
from octrans.dsl.ast import (
    CompRef,
    ConstraintDecl,
    ConstraintKind,
    DeclKind,
    Instant,
    OcpProblem,
    ParamRef,
    Sense,
    walk,
)
from octrans.kernels import KernelBuilder, KernelTape, Op
from octrans.models.schemas import InitPolicy, Scheme

from .layout import Grid, TimeBound, VariableLayout, variable_slot
from .lowering import KernelLowering, NodeContext
from .nlp import ConstraintGroup, GroupKind, ObjectiveGroup, StructuredNlp

logger = get_logger(__name__)

InitSpec = Union[InitPolicy, Tuple[float, float, float], None]


class Transcriber:
    """Builds the groups, bounds and start point of a :class:`StructuredNlp`."""

    def __init__(self, problem: OcpProblem, scheme: Scheme, grid_size: int):
        if grid_size < 1:
            raise ValidationException(
                "grid size must be at least 1", details={"grid_size": grid_size}
            )
        self.problem = problem
        self.scheme = Scheme(scheme)
        self.N = grid_size
        self.layout = VariableLayout.for_problem(problem, grid_size)
        self.grid = Grid(
            grid_size=grid_size,
            t0=TimeBound.from_expr(problem, problem.time.t0),
            tf=TimeBound.from_expr(problem, problem.time.tf),
        )
        self._row = 0

    def _builder(self, name: str) -> Tuple[KernelBuilder, KernelLowering]:
        builder = KernelBuilder(name)
        return builder, KernelLowering(self.problem, self.layout, builder)

    # ------------------------------------------------------------------
    # Constraint groups
    # ------------------------------------------------------------------

    def _constraint_group(
        self,
        name: str,
        kind: GroupKind,
        tape: KernelTape,
        index_range: range,
        lower: Sequence[float],
        upper: Sequence[float],
        source_line: int = 0,
    ) -> ConstraintGroup:
        group = ConstraintGroup(
            name=name,
            kind=kind,
            tape=tape,
            index_range=index_range,
            row_offset=self._row,
            lower=np.asarray(lower, dtype=np.float64),
            upper=np.asarray(upper, dtype=np.float64),
            source_line=source_line,
        )
        self._row += group.rows
        return group

    def dynamics_group(self) -> ConstraintGroup:
        """Defect rows ``X[i+1] - X[i] - h * (one-step increment)``, i = 0..N-1."""
        builder, lower = self._builder("dynamics")
        b = builder
        h = lower.step()
        here, ahead = NodeContext(0), NodeContext(1)
        outputs = []
        for eq in self.problem.dynamics:
            assert eq.component is not None
            decl, comp = self._state_ref(eq.component)
            ref = CompRef(DeclKind.STATE, decl, comp, Instant.SYMBOLIC)
            x_i = lower.lower(ref, here)
            x_next = lower.lower(ref, ahead)
            f_i = lower.lower(eq.exprs[0], here)
            if self.scheme == Scheme.EULER:
                increment = b.binary(Op.MUL, h, f_i)
            else:
                f_next = lower.lower(eq.exprs[0], ahead)
                half_h = b.binary(Op.DIV, h, b.const(2.0))
                increment = b.binary(Op.MUL, half_h, b.binary(Op.ADD, f_i, f_next))
            outputs.append(b.binary(Op.SUB, b.binary(Op.SUB, x_next, x_i), increment))
        tape = KernelTape(builder.build(outputs))
        zeros = [0.0] * len(outputs)
        return self._constraint_group(
            "dynamics", GroupKind.DYNAMICS, tape, range(0, self.N), zeros, zeros
        )

    def _state_ref(self, slot: int) -> Tuple[str, int]:
        for decl in self.problem.decls_of(DeclKind.STATE):
            if slot < decl.dim:
                return decl.name, slot
            slot -= decl.dim
        raise ValidationException(f"no state component at slot {slot}")

    def declared_group(self, number: int, decl: ConstraintDecl) -> ConstraintGroup:
        """Boundary rows at index 0, or path rows over their node range."""
        is_path = decl.kind == ConstraintKind.PATH
        name = f"{'path' if is_path else 'boundary'}_{number}"
        builder, lower = self._builder(name)
        outputs = [lower.lower(e, NodeContext(0)) for e in decl.exprs]
        tape = KernelTape(builder.build(outputs))
        index_range = self._path_range(decl) if is_path else range(0, 1)
        return self._constraint_group(
            name,
            GroupKind.PATH if is_path else GroupKind.BOUNDARY,
            tape,
            index_range,
            decl.lower,
            decl.upper,
            source_line=decl.source_line,
        )

    def _path_range(self, decl: ConstraintDecl) -> range:
        refs = [n for e in decl.exprs for n in walk(e) if isinstance(n, CompRef)]
        controls_only = bool(refs) and all(r.kind == DeclKind.CONTROL for r in refs)
        if self.scheme == Scheme.EULER and controls_only:
            return range(0, self.N)
        return range(0, self.N + 1)

    # ------------------------------------------------------------------
    # Objective groups
    # ------------------------------------------------------------------

    def objective_groups(self) -> List[ObjectiveGroup]:
        cost = self.problem.cost
        groups: List[ObjectiveGroup] = []
        if cost.mayer is not None:
            builder, lower = self._builder("mayer")
            out = lower.lower(cost.mayer, NodeContext(0))
            groups.append(
                ObjectiveGroup(
                    name="mayer",
                    tape=KernelTape(builder.build([out])),
                    index_range=range(0, 1),
                    weights=np.ones(1),
                )
            )
        if cost.lagrange is not None:
            builder, lower = self._builder("lagrange")
            integrand = lower.lower(cost.lagrange, NodeContext(0))
            out = builder.binary(Op.MUL, lower.step(), integrand)
            if self.scheme == Scheme.EULER:
                index_range = range(0, self.N)
                weights = np.ones(self.N)
            else:
                index_range = range(0, self.N + 1)
                weights = np.ones(self.N + 1)
                weights[0] = weights[-1] = 0.5
            groups.append(
                ObjectiveGroup(
                    name="lagrange",
                    tape=KernelTape(builder.build([out])),
                    index_range=index_range,
                    weights=weights,
                )
            )
        return groups

    # ------------------------------------------------------------------
    # Bounds
    # ------------------------------------------------------------------

    def bounds(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Variable bounds from box constraints, pinned slots, box row count."""
        layout = self.layout
        lvar = np.full(layout.nvar, -np.inf)
        uvar = np.full(layout.nvar, np.inf)
        box_rows = 0
        nodes = np.arange(layout.nodes)
        for decl in self.problem.constraints:
            if decl.kind == ConstraintKind.BOX_VARIABLE:
                for expr, lo, up in zip(decl.exprs, decl.lower, decl.upper):
                    assert isinstance(expr, ParamRef)
                    slots = np.array([variable_slot(self.problem, expr)])
                    _tighten(lvar, uvar, slots, lo, up)
                box_rows += decl.rows
            elif decl.kind in (ConstraintKind.BOX_STATE, ConstraintKind.BOX_CONTROL):
                for expr, lo, up in zip(decl.exprs, decl.lower, decl.upper):
                    assert isinstance(expr, CompRef)
                    comp = self.problem.slot(expr.kind, expr.decl, expr.component)
                    if expr.kind == DeclKind.STATE:
                        slots = layout.state_slot(comp, nodes)
                    else:
                        slots = layout.control_slot(comp, nodes)
                    _tighten(lvar, uvar, slots, lo, up)
                box_rows += decl.rows * layout.nodes
        bad = np.flatnonzero(lvar > uvar)
        if len(bad):
            raise ValidationException(
                f"box constraints on {layout.slot_label(int(bad[0]))} are inconsistent"
            )

        pinned = np.zeros(layout.nvar, dtype=bool)
        if self.scheme == Scheme.EULER:
            # the last control node is never read by an euler step
            for comp in range(layout.n_control):
                pinned[layout.control_slot(comp, self.N)] = True
        return lvar, uvar, pinned, box_rows

    # ------------------------------------------------------------------

    def build(self, init: InitSpec = None) -> StructuredNlp:
        problem = self.problem
        self._row = 0
        groups = [self.dynamics_group()]
        number = 0
        for decl in problem.constraints:
            if decl.kind in (ConstraintKind.BOUNDARY, ConstraintKind.PATH):
                number += 1
                groups.append(self.declared_group(number, decl))
        lvar, uvar, pinned, box_rows = self.bounds()
        nlp = StructuredNlp(
            name=problem.name,
            scheme=self.scheme,
            problem=problem,
            layout=self.layout,
            grid=self.grid,
            constraint_groups=tuple(groups),
            objective_groups=tuple(self.objective_groups()),
            lvar=lvar,
            uvar=uvar,
            x_start=np.zeros(self.layout.nvar),
            pinned=pinned,
            objective_sign=-1.0 if problem.cost.sense == Sense.MAX else 1.0,
            box_rows=box_rows,
            metadata={"scheme": self.scheme.value, "grid_size": self.N},
        )
        _check_coverage(nlp)
        nlp = nlp.with_start(initial_point(nlp, init))
        logger.info(
            "transcribed",
            problem=problem.name,
            scheme=self.scheme.value,
            grid_size=self.N,
            nvar=nlp.nvar,
            m_con=nlp.m_con,
            jac_nnz=nlp.jac_nnz,
            hess_nnz=nlp.hess_nnz,
        )
        return nlp


def _tighten(
    lvar: np.ndarray, uvar: np.ndarray, slots, lo: float, up: float
) -> None:
    lvar[slots] = np.maximum(lvar[slots], lo)
    uvar[slots] = np.minimum(uvar[slots], up)


def _check_coverage(nlp: StructuredNlp) -> None:
    """Every slot must appear in some group or carry a bound."""
    used = np.zeros(nlp.nvar, dtype=bool)
    used[nlp.jac_structure[1]] = True
    for g in nlp.objective_groups:
        used[g.slots.reshape(-1)] = True
    used |= np.isfinite(nlp.lvar) | np.isfinite(nlp.uvar) | nlp.pinned
    missing = np.flatnonzero(~used)
    if len(missing):
        label = nlp.layout.slot_label(int(missing[0]))
        raise ValidationException(
            f"decision slot {label} is not used by any constraint, cost or bound",
            details={"unused_slots": len(missing)},
        )


def _slab_values(
    value: Union[float, Sequence[float]], nodes: int, width: int, slab: str
) -> np.ndarray:
    """Expand a scalar, per-component or per-slot initial value to a slab."""
    size = nodes * width
    if np.isscalar(value):
        return np.full(size, float(value))  # type: ignore[arg-type]
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.size == size:
        return arr.copy()
    if arr.size == width and nodes > 1:
        return np.tile(arr, nodes)
    raise ValidationException(
        f"initial {slab} values have length {arr.size}; "
        f"expected {size} (per slot) or {width} (per component)",
        details={"slab": slab},
    )


def initial_point(nlp: StructuredNlp, policy: InitSpec = None) -> np.ndarray:
    """Start point filled from ``policy`` and clipped into the variable bounds.

    The default policy sets every slot to 0.1.
    """
    if policy is None:
        policy = InitPolicy()
    elif isinstance(policy, tuple):
        policy = InitPolicy.from_triple(policy)
    layout = nlp.layout
    x = np.concatenate(
        [
            _slab_values(policy.variable, 1, layout.n_variable, "variable"),
            _slab_values(policy.state, layout.nodes, layout.n_state, "state"),
            _slab_values(policy.control, layout.nodes, layout.n_control, "control"),
        ]
    )
    lower = np.where(nlp.pinned, -np.inf, nlp.lvar)
    upper = np.where(nlp.pinned, np.inf, nlp.uvar)
    return np.clip(x, lower, upper)


def transcribe(
    problem: OcpProblem,
    scheme: Union[Scheme, str] = Scheme.TRAPEZOID,
    grid_size: int = 250,
    init: InitSpec = None,
) -> StructuredNlp:
    """Discretize ``problem`` on ``grid_size`` steps with a one-step scheme."""
    return Transcriber(problem, Scheme(scheme), grid_size).build(init)
