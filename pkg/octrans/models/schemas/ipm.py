"""Interior-point solver option and report schemas."""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from .backend import BackendConfig


class SolveStatus(str, Enum):
    """Termination status of a solve."""

    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE_DETECTED = "infeasible_detected"
    EVAL_ERROR = "eval_error"
    RESTORATION_FAILED = "restoration_failed"


class IpmOptions(BaseModel):
    """Interior-point solver options."""

    tol: float = Field(default=1e-8, gt=0.0, description="Scaled KKT tolerance")
    max_iter: int = Field(default=3000, ge=1, description="Iteration cap")
    mu_init: float = Field(default=1e-1, gt=0.0, description="Initial barrier")
    tau_min: float = Field(default=0.99, gt=0.0, lt=1.0)
    kappa_eps: float = Field(default=10.0, gt=0.0)
    kappa_mu: float = Field(default=0.2, gt=0.0, lt=1.0)
    theta_mu: float = Field(default=1.5, gt=1.0)
    bound_push: float = Field(default=1e-2, gt=0.0, lt=0.5)
    lam_init_max: float = Field(
        default=1e3, gt=0.0, description="Largest accepted multiplier estimate"
    )

    # Inertia correction
    delta_w_first: float = Field(default=1e-4, gt=0.0)
    delta_w_first_growth: float = Field(default=100.0, gt=1.0)
    delta_w_growth: float = Field(default=8.0, gt=1.0)
    delta_w_shrink: float = Field(default=3.0, gt=1.0)
    delta_w_max: float = Field(default=1e40, gt=0.0)
    delta_c: float = Field(default=1e-8, ge=0.0)
    pivot_tol: float = Field(default=1e-14, gt=0.0)

    # Filter line search
    gamma_theta: float = Field(default=1e-5, gt=0.0, lt=1.0)
    gamma_phi: float = Field(default=1e-8, gt=0.0, lt=1.0)
    eta_phi: float = Field(default=1e-8, gt=0.0, lt=0.5)
    s_theta: float = Field(default=1.1, gt=1.0)
    s_phi: float = Field(default=2.3, gt=1.0)
    delta_switch: float = Field(default=1.0, gt=0.0)
    alpha_min: float = Field(default=1e-12, gt=0.0)
    mu_increase: float = Field(default=10.0, gt=1.0)
    soc_max: int = Field(default=4, ge=0, description="Second-order corrections")
    kappa_soc: float = Field(default=0.99, gt=0.0, lt=1.0)

    # Feasibility restoration
    restoration: bool = Field(default=True)
    restoration_max_iter: int = Field(default=200, ge=1)
    kappa_resto: float = Field(default=0.9, gt=0.0, lt=1.0)

    # Scaling and refinement
    scaling: bool = Field(default=True, description="Gradient-based scaling")
    scaling_max_gradient: float = Field(default=100.0, gt=0.0)
    refinement_rounds: int = Field(default=5, ge=0)
    refinement_trigger: float = Field(default=1e-8, gt=0.0)
    s_max: float = Field(default=100.0, gt=0.0)
    kappa_sigma: float = Field(default=1e10, gt=1.0)
    ordering: str = Field(default="amd", description="Fill-reducing ordering")
    dump_kkt_dir: Optional[str] = Field(
        default=None, description="Write each KKT matrix here (Matrix Market)"
    )

    backend: BackendConfig = Field(default_factory=BackendConfig)
    verbose: bool = Field(default=False)

    @field_validator("max_iter")
    @classmethod
    def validate_max_iter(cls, v: int) -> int:
        """Validate the iteration cap."""
        if v < 1:
            raise ValueError("max_iter must be at least 1")
        return v


class PhaseTimings(BaseModel):
    """Wall time spent per solver phase, in seconds."""

    derivatives: float = Field(default=0.0)
    factorization: float = Field(default=0.0)
    solves: float = Field(default=0.0)
    total: float = Field(default=0.0)


class KktResiduals(BaseModel):
    """Final optimality residuals."""

    stationarity: float = Field(..., description="Dual infeasibility")
    feasibility: float = Field(..., description="Constraint violation (max norm)")
    complementarity: float = Field(..., description="Complementarity at mu = 0")
    scaled_error: float = Field(..., description="Scaled optimality error")


class Solution(BaseModel):
    """Final solve report."""

    status: SolveStatus = Field(..., description="Termination status")
    objective: float = Field(..., description="Objective, sign-corrected")
    iterations: int = Field(..., description="Iterations performed")
    x: List[float] = Field(default_factory=list, description="Primal solution")
    multipliers: List[float] = Field(
        default_factory=list, description="Constraint multipliers"
    )
    bound_duals_lower: List[float] = Field(default_factory=list)
    bound_duals_upper: List[float] = Field(default_factory=list)
    theta: float = Field(..., description="Final constraint violation")
    residuals: KktResiduals
    timings: PhaseTimings = Field(default_factory=PhaseTimings)
    final_mu: float = Field(default=0.0)
    counters: Dict[str, int] = Field(default_factory=dict)
    message: Optional[str] = Field(default=None)

    def report(self) -> Dict[str, object]:
        """Machine-readable summary without the solution vectors."""
        return self.model_dump(
            exclude={"x", "multipliers", "bound_duals_lower", "bound_duals_upper"},
            mode="json",
        )
