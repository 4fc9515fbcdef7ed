"""
Domain types shared by every service.

Scalar parameter records are pydantic models so that invariant violations surface as
ValidationError with the offending field; array-carrying operators are dataclasses.
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from optimization_config import (
    BETA_REFINE_CONFIG,
    FOCK_CONFIG,
    GRID_CONFIG,
    LAMBDA_DEFAULT,
    MC_CONFIG,
)


class ChannelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    eta: float = Field(..., ge=0.0, le=1.0, description="transmission η ∈ [0, 1]")
    xi: float = Field(..., ge=0.0, description="excess noise ξ ≥ 0 (vacuum variance 1/4 units)")


class ProtocolParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(..., gt=0.0, description="coherent amplitude α > 0")
    x_th: float = Field(0.0, ge=0.0, description="postselection threshold x_th ≥ 0")
    f_ec: float = Field(1.0, ge=1.0, description="error-correction inefficiency f ≥ 1")


class DualParams(BaseModel):
    """Free parameters of the phase-error bound: κ, γ and β = β_R + iβ_I."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa: float = Field(..., ge=0.0, description="dual weight κ ≥ 0")
    gamma: float = Field(..., ge=0.0, description="dual weight γ ≥ 0")
    beta_R: float = Field(0.0, description="real part of the target amplitude β")
    beta_I: float = Field(0.0, description="imaginary part of the target amplitude β")

    @property
    def beta_abs2(self) -> float:
        return self.beta_R ** 2 + self.beta_I ** 2


class LambdaParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    m: int = Field(LAMBDA_DEFAULT[0], ge=0, description="expansion order m ≥ 0")
    r: float = Field(LAMBDA_DEFAULT[1], ge=0.0, description="shift r ≥ 0")


class QuadratureMoments(BaseModel):
    """First and second quadrature moments, no physical constraint attached."""

    model_config = ConfigDict(frozen=True)

    mean_x: float
    mean_p: float
    mean_x2: float
    mean_p2: float


class Moments(QuadratureMoments):
    """Moments of a physical state in the variance-1/4 convention."""

    @model_validator(mode="after")
    def _check_physical(self) -> "Moments":
        # Rounding slack only; anything beyond is a genuine violation.
        slack = 1e-12 * max(1.0, abs(self.mean_x2), abs(self.mean_p2))
        var_x = self.mean_x2 - self.mean_x ** 2
        var_p = self.mean_p2 - self.mean_p ** 2
        if var_x < -slack:
            raise ValueError("mean_x2 must be ≥ mean_x²")
        if var_p < -slack:
            raise ValueError("mean_p2 must be ≥ mean_p²")
        if var_x + var_p < 0.5 - slack:
            raise ValueError("Var(x) + Var(p) must be ≥ 1/2 (uncertainty floor)")
        return self


class MomentEstimate(QuadratureMoments):
    """Sampled moments with standard errors; sampling noise may dip below the floor."""

    se_mean_x: float = 0.0
    se_mean_p: float = 0.0
    se_mean_x2: float = 0.0
    se_mean_p2: float = 0.0
    n_x: int = 0
    n_p: int = 0


class BElements(BaseModel):
    model_config = ConfigDict(frozen=True)

    c_ev: float
    c_od: float
    d_ev: float
    d_od: float
    v_ev: float
    v_od: float


class KeyRateBreakdown(BaseModel):
    """Every intermediate of the rate formula; serializes to a flat JSON object."""

    model_config = ConfigDict(frozen=True)

    p_sift: float
    e_bit: float
    f0: float
    b_const: float
    minus_term: float
    e_ph_bound: float
    rate: float = Field(..., ge=0.0)


class GridRange(BaseModel):
    """Inclusive arithmetic range start, start+step, ..., ≤ stop."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float
    stop: float
    step: float = Field(..., gt=0.0, description="grid step > 0")

    @model_validator(mode="after")
    def _check_order(self) -> "GridRange":
        if self.stop < self.start:
            raise ValueError("grid stop must be ≥ start")
        return self

    @classmethod
    def from_tuple(cls, bounds: Tuple[float, float, float]) -> "GridRange":
        start, stop, step = bounds
        return cls(start=start, stop=stop, step=step)

    def values(self) -> np.ndarray:
        # Index-based so accumulated rounding never drops the inclusive end point.
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count, dtype=np.float64)


class BetaSchedule(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_step: float = Field(BETA_REFINE_CONFIG['rel_step'], gt=0.0, description="relative β step > 0")
    shrink: float = Field(BETA_REFINE_CONFIG['shrink'], gt=0.0, lt=1.0, description="step shrink factor in (0, 1)")
    rounds: int = Field(BETA_REFINE_CONFIG['rounds'], ge=0, description="refinement rounds ≥ 0")
    window: float = Field(BETA_REFINE_CONFIG['window'], gt=0.0, le=1.0, description="relative half-width of the β interval")


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha2_grid: GridRange = Field(default_factory=lambda: GridRange.from_tuple(GRID_CONFIG['alpha2']))
    gamma_grid: GridRange = Field(default_factory=lambda: GridRange.from_tuple(GRID_CONFIG['gamma']))
    kappa_grid: GridRange = Field(default_factory=lambda: GridRange.from_tuple(GRID_CONFIG['kappa']))
    x_th_grid: GridRange = Field(default_factory=lambda: GridRange.from_tuple(GRID_CONFIG['x_th']))
    beta_refine: BetaSchedule = Field(default_factory=BetaSchedule)

    @field_validator("alpha2_grid")
    @classmethod
    def _alpha_positive(cls, value: GridRange) -> GridRange:
        if value.start <= 0.0:
            raise ValueError("α² grid must start above 0")
        return value

    @field_validator("gamma_grid", "kappa_grid", "x_th_grid")
    @classmethod
    def _non_negative(cls, value: GridRange) -> GridRange:
        if value.start < 0.0:
            raise ValueError("grid must start at a non-negative value")
        return value

    @property
    def size(self) -> int:
        return (len(self.alpha2_grid.values()) * len(self.x_th_grid.values())
                * len(self.kappa_grid.values()) * len(self.gamma_grid.values()))


class OptArg(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    x_th: float
    kappa: float
    gamma: float
    beta: float

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.alpha, self.x_th, self.kappa, self.gamma, self.beta)


class OptResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    best: KeyRateBreakdown
    arg: OptArg
    evaluations: int = Field(..., ge=0)
    refined: bool = True


class McConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_samples: int = Field(MC_CONFIG['n_samples'], ge=1, description="sample count ≥ 1")
    seed: int = Field(MC_CONFIG['seed'], ge=0, lt=2 ** 64, description="64-bit unsigned seed")
    block_size: int = Field(MC_CONFIG['block_size'], ge=1, description="draws per seeded block ≥ 1")


class McReport(BaseModel):
    p_sift_hat: float = Field(..., ge=0.0, le=1.0)
    p_sift_se: float
    e_bit_hat: float
    e_bit_se: float
    moments_plus: MomentEstimate
    moments_minus: MomentEstimate
    f0_hat: float
    f0_se: float
    beta: float
    n_samples: int
    seed: int
    block_size: int
    rng: str
    # Raw power sums [sign][quadrature][order 0..4]; lets F0 be re-estimated at any β.
    power_sums: List[List[List[float]]]


class RunConfig(BaseModel):
    """Merged command configuration (config file overlaid with CLI flags)."""

    model_config = ConfigDict(extra="forbid")

    protocol: Optional[ProtocolParams] = None
    channel: Optional[ChannelParams] = None
    dual: Optional[DualParams] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    mc: McConfig = Field(default_factory=McConfig)
    lambda_params: LambdaParams = Field(default_factory=LambdaParams)
    xi: List[float] = Field(default_factory=lambda: [0.0], description="excess-noise values ξ ≥ 0")
    loss: Optional[GridRange] = Field(None, description="channel loss 1 − η grid in [0, 1)")
    xi_grid: Optional[GridRange] = None
    n_max: int = Field(FOCK_CONFIG['n_max'], ge=2, description="Fock truncation n_max ≥ 2")
    x_th: Optional[float] = Field(None, ge=0.0, description="postselection threshold x_th ≥ 0")
    f_ec: Optional[float] = Field(None, ge=1.0, description="error-correction inefficiency f ≥ 1")
    fidelity_model: Literal["homodyne", "heterodyne", "exact"] = "homodyne"
    output: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None

    @field_validator("xi")
    @classmethod
    def _xi_non_negative(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one excess-noise value is required")
        if any(x < 0.0 for x in value):
            raise ValueError("excess noise ξ must be ≥ 0")
        return value

    @field_validator("loss")
    @classmethod
    def _loss_range(cls, value: Optional[GridRange]) -> Optional[GridRange]:
        if value is not None and (value.start < 0.0 or value.stop >= 1.0):
            raise ValueError("loss values must lie in [0, 1)")
        return value


@dataclass
class FockOperator:
    """Real symmetric operator on a truncated number basis."""

    n_max: int
    matrix: np.ndarray
    basis_tag: Literal["mode", "qubit_mode"] = "mode"

    def __post_init__(self):
        expected = (self.n_max + 1) * (2 if self.basis_tag == "qubit_mode" else 1)
        if self.matrix.shape != (expected, expected):
            raise ValueError(
                f"{self.basis_tag} operator with n_max={self.n_max} needs shape "
                f"({expected}, {expected}), got {self.matrix.shape}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class CoherentVector:
    amplitudes: np.ndarray
    truncation_weight: float


def _nested_model(annotation) -> Optional[type]:
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    for arg in get_args(annotation):
        found = _nested_model(arg)
        if found is not None:
            return found
    return None


def field_description(model_cls: type, loc: Tuple) -> Optional[str]:
    """Documented meaning of the field at a pydantic error location, if any."""
    current = model_cls
    description = None
    for part in loc:
        if not isinstance(part, str) or current is None:
            continue
        field = current.model_fields.get(part)
        if field is None:
            break
        description = field.description
        current = _nested_model(field.annotation)
    return description
