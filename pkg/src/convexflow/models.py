"""Data models for convexflow."""

from __future__ import annotations

import re
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from convexflow.sphere_grid import MIN_RESOLUTION
from convexflow.speeds import MU_NAMES

DEFAULT_RESOLUTION = {1: 256, 2: 24}
DEFAULT_SHAPE = {1: "ellipsoid:2,1", 2: "ellipsoid:1.5,1.2,1.0"}

_CONSTRAINT_RE = re.compile(
    r"^(volume|quermass|mixed:[-+0-9.eE]+|external-factor:[-+0-9.eE]+|external-table:.+)$"
)


# ── initial shapes ───────────────────────────────────────────


class _ShapeBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    center: tuple[float, ...] | None = None


class BallSpec(_ShapeBase):
    kind: Literal["ball"] = "ball"
    r: float = Field(gt=0)


class EllipsoidSpec(_ShapeBase):
    kind: Literal["ellipsoid"] = "ellipsoid"
    axes: tuple[float, ...]

    @model_validator(mode="after")
    def _positive_axes(self) -> EllipsoidSpec:
        if not self.axes or any(a <= 0 for a in self.axes):
            raise ValueError("semi-axes must be positive")
        return self


class CubeSpec(_ShapeBase):
    """Unit ball of the q-norm dual to ||.||_p, scaled; support = scale * ||z||_q."""

    kind: Literal["cube"] = "cube"
    p: float = Field(ge=4)
    scale: float = Field(gt=0)


class PerturbedSpec(_ShapeBase):
    """r (1 + amplitude * Y_m): cos(m theta) on the circle, P_m(z_3) on the sphere."""

    kind: Literal["perturbed"] = "perturbed"
    r: float = Field(gt=0)
    m: int = Field(ge=0)
    amplitude: float


class SumSpec(BaseModel):
    """Minkowski sum: support functions add."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["sum"] = "sum"
    parts: tuple[ShapeSpec, ...] = Field(min_length=1)


ShapeSpec = Annotated[
    Union[BallSpec, EllipsoidSpec, CubeSpec, PerturbedSpec, SumSpec],
    Field(discriminator="kind"),
]

SumSpec.model_rebuild()


# ── flow configuration ───────────────────────────────────────


class FlowConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = 1
    k: int = 1
    alpha: float = Field(default=1.0, gt=0)
    mu: str = "power"
    constraint: str = "volume"
    shape: str = ""
    resolution: int = 0
    cfl: float = Field(default=0.2, gt=0, le=1)
    projection: bool = True
    tol_conv: float = Field(default=1e-4, gt=0)
    t_max: float = Field(default=50.0, gt=0)
    snapshot_every: int = Field(default=50, ge=1)
    max_steps: int = Field(default=2_000_000, ge=1)
    strict_monitors: bool = False
    out_dir: str = "runs"
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _dimension_defaults(cls, data: object) -> object:
        if isinstance(data, dict):
            data = dict(data)
            n = data.get("n", 1)
            if n in DEFAULT_RESOLUTION:
                if not data.get("resolution"):
                    data["resolution"] = DEFAULT_RESOLUTION[n]
                if not data.get("shape"):
                    data["shape"] = DEFAULT_SHAPE[n]
        return data

    @model_validator(mode="after")
    def _consistent(self) -> FlowConfig:
        if self.n not in MIN_RESOLUTION:
            raise ValueError("n must be 1 or 2")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k must satisfy 1 <= k <= n = {self.n}, got {self.k}")
        if self.resolution < MIN_RESOLUTION[self.n]:
            raise ValueError(f"resolution below minimum {MIN_RESOLUTION[self.n]} for n={self.n}")
        if self.mu not in MU_NAMES:
            raise ValueError(f"mu must be one of {', '.join(MU_NAMES)}")
        if not self.is_homogeneous and self.alpha != 1.0:
            raise ValueError(f"alpha only applies to mu = power, got mu = {self.mu}")
        if not _CONSTRAINT_RE.match(self.constraint):
            raise ValueError(f"constraint {self.constraint!r} is malformed")
        return self

    @property
    def is_homogeneous(self) -> bool:
        return self.mu == "power"


# ── trajectory records ───────────────────────────────────────


class DiagRecord(BaseModel):
    """Diagnostics of one snapshot."""

    t: float
    step: int
    volumes: list[float]  # V_0 .. V_{n+1}
    radii: list[float]  # r_1 .. r_{n+1}
    iso: float  # I_{n+1-k}
    iso_1: float
    phi: float
    ek_min: float
    ek_max: float
    r_min: float
    r_max: float
    rho_minus: float
    rho_plus: float
    steiner: list[float]
    inball_center: list[float]
    d_ball: float
    r_hat: float
    ek_flatness: float
    ek_l1: float
    tso_w: float
    tso_w_anchor: float | None = None  # W about an earlier record's inball
    tso_bound: float | None = None
    inball_margin: float | None = None
    stability: float  # V_1^2 - V_0 V_2
    d_steiner_ball: float
    rescaled_residual: float
    chebyshev_sum: float
    constraint_residual: float | None = None
    lambda_plus: list[float] = Field(default_factory=list)
    lambda_minus: list[float] = Field(default_factory=list)
    tol_contain: float = 0.0


class RunSummary(BaseModel):
    """One line of the run ledger."""

    timestamp: float
    label: str
    config: FlowConfig
    stop_reason: str
    converged: bool
    steps: int
    t_final: float
    r_hat: float
    constraint_residual: float | None = None
    phi_min: float
    phi_max: float
    monitor_failures: list[str] = Field(default_factory=list)
    wall_time: float

    @property
    def monitors_passed(self) -> bool:
        return not self.monitor_failures
