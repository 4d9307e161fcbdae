"""Request/response models for the HTTP surface."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..motion import ReplanTick
from ..types import Obstacle, Pose, Trajectory


class PoseModel(BaseModel):
    position: list[float]
    orientation: list[float]

    def to_pose(self) -> Pose:
        return Pose(self.position, self.orientation)

    @classmethod
    def from_pose(cls, pose: Pose) -> "PoseModel":
        return cls(position=pose.position.tolist(), orientation=pose.orientation.tolist())


class ObstacleModel(BaseModel):
    center: list[float]
    radius: float
    strength: float

    def to_obstacle(self) -> Obstacle:
        return Obstacle(center=self.center, radius=self.radius, strength=self.strength)


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateDataRequest(BaseModel):
    kind: Literal["toy-jc", "pouring"]
    out: str
    seed: int = 0
    samples: Optional[int] = None
    noise_std: Optional[float] = None
    demos: Optional[int] = None
    branches: int = 3


class DatasetSummary(BaseModel):
    path: str
    kind: str
    n: int
    m: int
    demonstrations: int
    samples: int


class TrainSettings(BaseModel):
    latent_dim: int = 2
    hidden: list[int] = Field(default_factory=lambda: [200, 100])
    rbf_kernels: int = 500
    alpha: Optional[float] = None
    beta: Optional[float] = None
    epochs: int = 2000
    stage2_epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0


class TrainRequest(BaseModel):
    data: str
    out: str
    settings: TrainSettings = Field(default_factory=TrainSettings)


class TrainResponse(BaseModel):
    checkpoint: str
    final_loss: Optional[float]
    train_seconds: float
    samples: int


class EvalRequest(BaseModel):
    checkpoint: str
    data: str


class EvalResponse(BaseModel):
    samples: int
    position_rmse: float
    bbox_diagonal: float
    rmse_fraction: float
    orientation_angle_deg: float
    position_loglik: float
    orientation_loglik: float
    kl: float


class CreateSessionRequest(BaseModel):
    checkpoint: str
    grid: int = 100
    margin: float = 0.15


class SessionInfo(BaseModel):
    id: str
    checkpoint: str
    grid: int
    nodes: int
    edges: int
    build_seconds: float
    bbox_min: list[float]
    bbox_max: list[float]


class ObstacleUpdateRequest(BaseModel):
    obstacles: list[ObstacleModel] = Field(default_factory=list)


class ObstacleUpdateResponse(BaseModel):
    touched_edges: int
    touched_nodes: int


class TrajectoryModel(BaseModel):
    parameters: list[float]
    positions: list[list[float]]
    orientations: list[list[float]]

    @classmethod
    def from_trajectory(cls, trajectory: Trajectory) -> "TrajectoryModel":
        return cls(
            parameters=trajectory.parameters.tolist(),
            positions=trajectory.positions().tolist(),
            orientations=trajectory.orientations().tolist(),
        )


class PlanApiRequest(BaseModel):
    start: PoseModel
    goal: PoseModel
    obstacles: list[ObstacleModel] = Field(default_factory=list)
    samples: int = 100
    refine: bool = False
    refine_iterations: int = 25
    control_points: int = 16
    out: Optional[str] = None


class PlanResponse(BaseModel):
    trajectory: TrajectoryModel
    node_path: list[int]
    latent_path: list[list[float]]
    spline_control: list[list[float]]
    graph_cost: float
    out: Optional[str] = None


class SimulateRequest(BaseModel):
    script: str
    start: Optional[PoseModel] = None
    goal: Optional[PoseModel] = None
    samples: int = 60
    control_points: int = 16
    out_dir: Optional[str] = None


class TickSummary(BaseModel):
    tick: int
    graph_cost: float
    nodes: int

    @classmethod
    def from_tick(cls, tick: ReplanTick) -> "TickSummary":
        return cls(tick=tick.tick, graph_cost=tick.graph_cost, nodes=len(tick.node_path))


class SimulateResponse(BaseModel):
    ticks: int
    median_ms: float
    p95_ms: float
    budget_ms: float
    over_budget_ticks: int
    per_tick_ms: list[float]
    tick_summaries: list[TickSummary]
    out_dir: Optional[str] = None


class PlotRequest(BaseModel):
    mode: Literal["variance", "magnification"] = "magnification"
    out: str
    resolution: int = 100
    trajectory_paths: list[str] = Field(default_factory=list)
    obstacles: list[ObstacleModel] = Field(default_factory=list)


class PlotResponse(BaseModel):
    path: str
    bytes_written: int
