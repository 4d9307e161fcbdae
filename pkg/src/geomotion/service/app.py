"""FastAPI service wrapping the core package.

A session pins one loaded checkpoint plus its decoded geodesic graph in
memory, so repeated plan/obstacle/simulate calls amortize the one-off build
cost; that is what makes dynamic replanning cheap at request time. Dataset
generation, training and evaluation are stateless endpoints operating on
files.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..datasets import gen_pouring, gen_toy_jc
from ..evaluation import evaluate
from ..geodesic import GeodesicGraph, apply_obstacles, build_graph
from ..motion import PlanRequest, plan, replan_loop
from ..plotting import plot_latent
from ..storage import (
    load_checkpoint,
    load_dataset,
    load_script,
    load_trajectory,
    save_checkpoint,
    save_dataset,
    save_trajectory,
)
from ..vae import ManifoldModel, TrainConfig, decode, encode_batch, train
from .schemas import (
    CreateSessionRequest,
    DatasetSummary,
    EvalRequest,
    EvalResponse,
    GenerateDataRequest,
    HealthResponse,
    ObstacleUpdateRequest,
    ObstacleUpdateResponse,
    PlanApiRequest,
    PlanResponse,
    PlotRequest,
    PlotResponse,
    PoseModel,
    SessionInfo,
    SimulateRequest,
    SimulateResponse,
    TickSummary,
    TrainRequest,
    TrainResponse,
    TrajectoryModel,
)


@dataclass
class Session:
    id: str
    checkpoint: str
    model: ManifoldModel
    graph: GeodesicGraph
    build_seconds: float

    def info(self) -> SessionInfo:
        return SessionInfo(
            id=self.id,
            checkpoint=self.checkpoint,
            grid=self.graph.grid_size,
            nodes=self.graph.node_count,
            edges=self.graph.edge_count,
            build_seconds=self.build_seconds,
            bbox_min=self.graph.bbox_min.tolist(),
            bbox_max=self.graph.bbox_max.tolist(),
        )


class SessionRegistry:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def remove(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
            del self._sessions[session_id]

    def list(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())


def _default_endpoints(model: ManifoldModel) -> tuple[PoseModel, PoseModel]:
    """Fallback simulate endpoints: first and last original training samples."""
    latents = model.training_latents
    half = latents.shape[0] // 2  # second half holds the antipodal twins
    first = decode(model, latents[0])
    last = decode(model, latents[max(half - 1, 0)])
    return (
        PoseModel(position=first.position.tolist(), orientation=first.orientation.tolist()),
        PoseModel(position=last.position.tolist(), orientation=last.orientation.tolist()),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="geomotion", version=__version__)
    registry = SessionRegistry()
    app.state.sessions = registry

    @app.exception_handler(ValueError)
    async def value_error_handler(_, exc: ValueError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def missing_file_handler(_, exc: FileNotFoundError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": f"file not found: {exc.filename}"})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/api/datasets/generate", response_model=DatasetSummary)
    def generate_dataset(request: GenerateDataRequest) -> DatasetSummary:
        if request.kind == "toy-jc":
            dataset = gen_toy_jc(
                samples=request.samples or 120,
                noise_std=request.noise_std if request.noise_std is not None else 0.005,
                seed=request.seed,
                demos=request.demos or 4,
            )
        else:
            dataset = gen_pouring(
                branches=request.branches,
                samples=request.samples or 90,
                seed=request.seed,
                demos_per_branch=request.demos or 3,
                noise_std=request.noise_std if request.noise_std is not None else 0.004,
            )
        save_dataset(dataset, request.out)
        return DatasetSummary(
            path=request.out,
            kind=dataset.kind,
            n=dataset.n,
            m=dataset.m,
            demonstrations=len(dataset.demonstrations),
            samples=sum(len(d) for d in dataset.demonstrations),
        )

    @app.post("/api/train", response_model=TrainResponse)
    def train_model(request: TrainRequest) -> TrainResponse:
        dataset = load_dataset(request.data)
        s = request.settings
        config = TrainConfig(
            latent_dim=s.latent_dim,
            hidden=tuple(s.hidden),
            rbf_kernels=s.rbf_kernels,
            alpha=s.alpha,
            beta=s.beta,
            epochs=s.epochs,
            stage2_epochs=s.stage2_epochs,
            batch_size=s.batch_size,
            learning_rate=s.learning_rate,
            seed=s.seed,
        )
        model = train(dataset.demonstrations, config)
        model.meta["data_provenance"] = dataset.provenance
        save_checkpoint(model, request.out)
        return TrainResponse(
            checkpoint=request.out,
            final_loss=model.meta.get("final_loss"),
            train_seconds=model.meta.get("train_seconds", 0.0),
            samples=model.meta.get("train_samples", 0),
        )

    @app.post("/api/eval", response_model=EvalResponse)
    def eval_model(request: EvalRequest) -> EvalResponse:
        model = load_checkpoint(request.checkpoint)
        dataset = load_dataset(request.data)
        report = evaluate(model, dataset.demonstrations)
        return EvalResponse(
            samples=report.samples,
            position_rmse=report.position_rmse,
            bbox_diagonal=report.bbox_diagonal,
            rmse_fraction=report.rmse_fraction,
            orientation_angle_deg=report.orientation_angle_deg,
            position_loglik=report.position_loglik,
            orientation_loglik=report.orientation_loglik,
            kl=report.kl,
        )

    @app.post("/api/sessions", response_model=SessionInfo)
    def create_session(request: CreateSessionRequest) -> SessionInfo:
        model = load_checkpoint(request.checkpoint)
        t0 = time.perf_counter()
        graph = build_graph(model, grid_size=request.grid, margin=request.margin)
        session = Session(
            id=uuid.uuid4().hex[:12],
            checkpoint=request.checkpoint,
            model=model,
            graph=graph,
            build_seconds=time.perf_counter() - t0,
        )
        registry.add(session)
        return session.info()

    @app.get("/api/sessions", response_model=list[SessionInfo])
    def list_sessions() -> list[SessionInfo]:
        return [s.info() for s in registry.list()]

    @app.delete("/api/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        registry.remove(session_id)
        return {"deleted": session_id}

    @app.post("/api/sessions/{session_id}/obstacles", response_model=ObstacleUpdateResponse)
    def update_obstacles(session_id: str, request: ObstacleUpdateRequest) -> ObstacleUpdateResponse:
        session = registry.get(session_id)
        update = apply_obstacles(session.graph, [o.to_obstacle() for o in request.obstacles])
        return ObstacleUpdateResponse(
            touched_edges=int(update.touched_edges.size),
            touched_nodes=update.touched_nodes,
        )

    @app.post("/api/sessions/{session_id}/plan", response_model=PlanResponse)
    def plan_motion(session_id: str, request: PlanApiRequest) -> PlanResponse:
        session = registry.get(session_id)
        plan_request = PlanRequest(
            start=request.start.to_pose(),
            goal=request.goal.to_pose(),
            obstacles=tuple(o.to_obstacle() for o in request.obstacles),
            samples=request.samples,
            refine=request.refine,
            refine_iterations=request.refine_iterations,
            control_points=request.control_points,
        )
        trajectory, record = plan(session.model, session.graph, plan_request)
        if request.out:
            save_trajectory(trajectory, request.out)
        return PlanResponse(
            trajectory=TrajectoryModel.from_trajectory(trajectory),
            node_path=record.node_path,
            latent_path=record.node_coords.tolist(),
            spline_control=record.spline.control_points.tolist(),
            graph_cost=record.graph_cost,
            out=request.out,
        )

    @app.post("/api/sessions/{session_id}/simulate", response_model=SimulateResponse)
    def simulate(session_id: str, request: SimulateRequest) -> SimulateResponse:
        session = registry.get(session_id)
        script = load_script(request.script)
        start, goal = request.start, request.goal
        if start is None or goal is None:
            default_start, default_goal = _default_endpoints(session.model)
            start = start or default_start
            goal = goal or default_goal
        plan_request = PlanRequest(
            start=start.to_pose(),
            goal=goal.to_pose(),
            samples=request.samples,
            control_points=request.control_points,
        )
        ticks, timing = replan_loop(session.model, session.graph, script, plan_request)
        out_dir = None
        if request.out_dir:
            out = Path(request.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            for tick in ticks:
                save_trajectory(tick.trajectory, out / f"tick-{tick.tick:04d}.traj")
            report_lines = [
                f"ticks: {len(ticks)}",
                f"median_ms: {timing.median_ms!r}",
                f"p95_ms: {timing.p95_ms!r}",
                f"budget_ms: {timing.budget_ms!r}",
                f"over_budget_ticks: {timing.over_budget_ticks}",
            ]
            (out / "timing.txt").write_text("\n".join(report_lines) + "\n")
            out_dir = str(out)
        return SimulateResponse(
            ticks=len(ticks),
            median_ms=timing.median_ms,
            p95_ms=timing.p95_ms,
            budget_ms=timing.budget_ms,
            over_budget_ticks=timing.over_budget_ticks,
            per_tick_ms=timing.tick_ms,
            tick_summaries=[TickSummary.from_tick(t) for t in ticks],
            out_dir=out_dir,
        )

    @app.post("/api/sessions/{session_id}/plot", response_model=PlotResponse)
    def plot(session_id: str, request: PlotRequest) -> PlotResponse:
        session = registry.get(session_id)
        geodesics = []
        for traj_path in request.trajectory_paths:
            trajectory = load_trajectory(traj_path)
            ambient = np.stack([p.ambient() for p in trajectory.poses])
            latents, _ = encode_batch(session.model, ambient)
            geodesics.append(latents)
        data = plot_latent(
            session.model,
            request.out,
            mode=request.mode,
            graph=session.graph,
            geodesics=geodesics,
            obstacles=tuple(o.to_obstacle() for o in request.obstacles),
            resolution=request.resolution,
        )
        return PlotResponse(path=request.out, bytes_written=len(data))

    return app


app = create_app()
