"""
Pydantic schemas for configuration, persisted manifests and reports.
"""
from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DATASET_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1


# Road Schemas
class RoadClass(str, Enum):
    """Road roughness grade, A (smooth) to E (rough)."""
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"

    @property
    def k(self) -> int:
        """Roughness exponent: A=0, B=2, C=4, D=6, E=8."""
        return 2 * list(RoadClass).index(self)

    @classmethod
    def from_k(cls, k: int) -> "RoadClass":
        """Inverse of `k`."""
        if k not in (0, 2, 4, 6, 8):
            raise ValueError(f"Roughness exponent must be one of 0, 2, 4, 6, 8, got {k}")
        return list(cls)[k // 2]


# Vehicle Schemas
class QcmParams(BaseModel):
    """Physical constants of the quarter-car model."""
    model_config = ConfigDict(frozen=True)

    C2: float = Field(4741.0, gt=0, description="Suspension damping (N s/m)")
    C3: float = Field(615.0, gt=0, description="Seat damping (N s/m)")
    K1: float = Field(40000.0, gt=0, description="Tyre stiffness (N/m)")
    K2: float = Field(149171.0, gt=0, description="Suspension stiffness (N/m)")
    K3: float = Field(98935.0, gt=0, description="Seat stiffness (N/m)")
    m1: float = Field(145.0, gt=0, description="Wheel suspension mass (kg)")
    m2: float = Field(2160.0, gt=0, description="Car body mass (kg)")
    m3: float = Field(100.0, ge=50, le=200, description="Passenger plus seat mass (kg)")


# Dataset Schemas
class GenConfig(BaseModel):
    """Parameters of a synthetic dataset."""
    model_config = ConfigDict(frozen=True)

    roads: int = Field(100, ge=1, description="Number of road profiles (L_r)")
    masses: int = Field(100, ge=1, description="Passenger masses per road (L_m)")
    train_roads: int = Field(80, ge=1, description="Roads reserved for training")
    n_steps: int = Field(6000, ge=1, description="Samples per trace (N)")
    step_width: float = Field(0.005, gt=0, description="Integrator step h (s)")
    frequencies: int = Field(100, ge=2, description="Sine components per road (M)")
    velocity: float = Field(25.0, gt=0, description="Constant vehicle velocity (m/s)")
    master_seed: int = Field(0, ge=0, description="Seed all per-road and per-sample seeds derive from")
    mass_min: int = Field(50, ge=50, le=200, description="Smallest passenger mass (kg)")
    mass_max: int = Field(200, ge=50, le=200, description="Largest passenger mass (kg)")

    @model_validator(mode='after')
    def validate_split(self):
        """Keep both splits non-empty and the mass range ordered."""
        if not 0 < self.train_roads < self.roads:
            raise ValueError(
                f'train_roads must lie strictly between 0 and roads ({self.roads}), got {self.train_roads}'
            )
        if self.mass_min > self.mass_max:
            raise ValueError('mass_min must not exceed mass_max')
        return self


class RoadRecord(BaseModel):
    """Descriptor of one generated road."""
    index: int = Field(..., ge=1, description="Road index j (1-based)")
    road_class: RoadClass = Field(..., description="Roughness class")
    seed: int = Field(..., ge=0, description="Seed of the phase draw")


class SampleRecord(BaseModel):
    """Descriptor of one stored sample."""
    road_index: int = Field(..., ge=1, description="Road index j")
    mass_index: int = Field(..., ge=1, description="Mass index i")
    m3: int = Field(..., description="Passenger plus seat mass (kg)")
    sha256: str = Field(..., description="Hash of the sample file")

    @property
    def sample_id(self) -> str:
        return f"sample_{self.road_index}_{self.mass_index}"


class DatasetManifest(BaseModel):
    """On-disk description of a dataset directory."""
    format_version: int = Field(DATASET_FORMAT_VERSION, description="Layout version")
    N: int = Field(..., ge=1)
    h: float = Field(..., gt=0)
    M: int = Field(..., ge=2)
    v: float = Field(..., gt=0)
    L_r: int = Field(..., ge=1)
    L_m: int = Field(..., ge=1)
    train_road_count: int = Field(..., ge=1)
    master_seed: int = Field(..., ge=0)
    mass_min: int = Field(50)
    mass_max: int = Field(200)
    roads: List[RoadRecord] = Field(default_factory=list)
    samples: List[SampleRecord] = Field(default_factory=list)

    @classmethod
    def from_config(cls, config: GenConfig, roads: List[RoadRecord], samples: List[SampleRecord]) -> "DatasetManifest":
        return cls(
            N=config.n_steps, h=config.step_width, M=config.frequencies, v=config.velocity,
            L_r=config.roads, L_m=config.masses, train_road_count=config.train_roads,
            master_seed=config.master_seed, mass_min=config.mass_min, mass_max=config.mass_max,
            roads=roads, samples=samples,
        )

    def to_config(self) -> GenConfig:
        return GenConfig(
            roads=self.L_r, masses=self.L_m, train_roads=self.train_road_count,
            n_steps=self.N, step_width=self.h, frequencies=self.M, velocity=self.v,
            master_seed=self.master_seed, mass_min=self.mass_min, mass_max=self.mass_max,
        )


# Network Schemas
class Architecture(BaseModel):
    """Shape constants of the convolutional estimator."""
    model_config = ConfigDict(frozen=True)

    window_length: int = Field(500, ge=2, description="Input frame length (N bar)")
    in_channels: int = Field(2, ge=1, description="Input channels (seat, body)")
    conv1_filters: int = Field(100, ge=1)
    conv1_width: int = Field(50, ge=1)
    conv2_filters: int = Field(100, ge=1)
    conv2_width: int = Field(10, ge=1)
    dense1_units: int = Field(100, ge=1)
    dense2_units: int = Field(10, ge=1)
    outputs: int = Field(2, ge=1, description="Estimated parameters")
    output_scale: Tuple[float, ...] = Field((1.0, 1.0), description="Multiplier applied after the absolute value")
    normalize_inputs: bool = Field(False, description="Standardize each window channel before the first layer")

    @model_validator(mode='after')
    def validate_shapes(self):
        """The two valid convolutions must leave at least one position."""
        if self.conv2_length < 1:
            raise ValueError(
                f'window_length {self.window_length} too short for conv widths '
                f'{self.conv1_width}/{self.conv2_width}'
            )
        if len(self.output_scale) != self.outputs or any(s <= 0 for s in self.output_scale):
            raise ValueError('output_scale needs one positive entry per output')
        return self

    @property
    def conv1_length(self) -> int:
        return self.window_length - self.conv1_width + 1

    @property
    def conv2_length(self) -> int:
        return self.conv1_length - self.conv2_width + 1

    @property
    def flat_size(self) -> int:
        return self.conv2_length * self.conv2_filters


# Training Schemas
class Objective(str, Enum):
    """Training objective."""
    LABELLED = "labelled"
    UNLABELLED = "unlabelled"


class TrainConfig(BaseModel):
    """Hyperparameters of one training run."""
    model_config = ConfigDict(frozen=True)

    objective: Objective = Field(Objective.LABELLED)
    steps: int = Field(500000, ge=0, description="Optimization steps")
    batch_size: int = Field(100, ge=1)
    learning_rate: float = Field(0.001, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    eval_every: int = Field(100000, ge=1, description="History cadence in steps")
    seed: int = Field(0, ge=0)
    noise_sigma_eval: float = Field(0.01, ge=0, description="Noise level of the noisy history curves")
    noise_sigma_train: float = Field(0.0, ge=0, description="Noise added to training data (ablation)")


class ParamStats(BaseModel):
    """Deviation statistics of one estimated parameter."""
    param: str = Field(..., description="p1 or p2")
    mu: float = Field(..., description="Mean relative deviation")
    sigma: float = Field(..., description="Standard deviation of the relative deviation")
    abs_mean: float = Field(..., description="Mean absolute error")


class EvalReport(BaseModel):
    """Evaluation of a predictor on one dataset view."""
    step: int = Field(0, ge=0)
    objective: Optional[str] = Field(None)
    split: str = Field(..., description="train or test")
    noise_sigma: float = Field(0.0, ge=0)
    sample_count: int = Field(..., ge=0)
    stats: List[ParamStats] = Field(default_factory=list)

    @field_validator('split')
    @classmethod
    def validate_split(cls, v):
        """Only the two road-disjoint views are evaluated."""
        if v not in ("train", "test"):
            raise ValueError(f'split must be train or test, got {v}')
        return v

    def stat(self, param: str) -> ParamStats:
        for item in self.stats:
            if item.param == param:
                return item
        raise KeyError(param)


class RobustnessRow(BaseModel):
    objective: str
    noise_sigma: float
    param: str
    mu: float
    sigma: float


class RobustnessReport(BaseModel):
    """Clean/noisy comparison of the labelled and unlabelled estimators."""
    noise_sigma: float = Field(..., ge=0)
    rows: List[RobustnessRow] = Field(default_factory=list)
    unlabelled_lower_noisy: Dict[str, bool] = Field(default_factory=dict)
    labelled_ratio_higher: Dict[str, bool] = Field(default_factory=dict)
    verdict: str = Field(..., description="Human-readable ordering verdict")


# Persistence Schemas
class TensorRecord(BaseModel):
    name: str
    shape: List[int]


class CheckpointManifest(BaseModel):
    """Header of a saved network plus optimizer state."""
    format_version: int = Field(CHECKPOINT_FORMAT_VERSION)
    architecture: Architecture
    objective: Optional[Objective] = None
    seed: int = Field(0, ge=0)
    step: int = Field(0, ge=0)
    learning_rate: float = Field(0.001, gt=0)
    beta1: float = Field(0.9)
    beta2: float = Field(0.999)
    epsilon: float = Field(1e-8)
    tensors: List[TensorRecord] = Field(default_factory=list)


class ArtifactRecord(BaseModel):
    path: str = Field(..., description="Path relative to the output directory")
    sha256: str
    bytes: int = Field(..., ge=0)


class RunManifest(BaseModel):
    """Everything needed to reproduce one command invocation."""
    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, object] = Field(default_factory=dict)
    seeds: Dict[str, int] = Field(default_factory=dict)
    inputs: List[str] = Field(default_factory=list)
    output_dir: str
    artifacts: List[ArtifactRecord] = Field(default_factory=list)
    started_at: datetime
    finished_at: Optional[datetime] = None
