"""File formats: datasets, checkpoints, trajectories, replan scripts.

Datasets, checkpoints and scripts are canonical JSON (sorted keys, fixed
separators, trailing newline); floats are serialized with Python's shortest
round-trip repr, so save -> load -> save is byte-identical and arrays survive
bit-exactly. Trajectories are a small CSV-style text format.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .motion import ReplanScript, ScriptEntry
from .nets import Mlp, RbfNet
from .types import UNIT_NORM_TOL, Demonstration, Obstacle, Pose, Trajectory
from .vae import ManifoldModel

DATASET_FORMAT = "geomotion-dataset"
CHECKPOINT_FORMAT = "geomotion-checkpoint"
SCRIPT_FORMAT = "geomotion-replan-script"
TRAJECTORY_HEADER = "# geomotion-trajectory v1"
FORMAT_VERSION = 1


def _dump_canonical(payload: dict, path: str | Path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=1)
    Path(path).write_text(text + "\n")


def _load_json(path: str | Path, expected_format: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if payload.get("format") != expected_format:
        raise ValueError(f"{path}: field 'format' is {payload.get('format')!r}, expected {expected_format!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: field 'version' {payload.get('version')!r} is not recognized")
    return payload


def _array(payload: dict, key: str) -> np.ndarray:
    entry = payload[key]
    return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])


def _array_json(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


# -- datasets ----------------------------------------------------------------


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    demos = []
    for demo in dataset.demonstrations:
        entry = {
            "id": demo.id,
            "timestamps": demo.timestamps.tolist(),
            "positions": [p.position.tolist() for p in demo.poses],
            "orientations": [p.orientation.tolist() for p in demo.poses],
        }
        if demo.labels is not None:
            entry["labels"] = list(demo.labels)
        demos.append(entry)
    _dump_canonical(
        {
            "format": DATASET_FORMAT,
            "version": FORMAT_VERSION,
            "kind": dataset.kind,
            "n": dataset.n,
            "m": dataset.m,
            "units": dataset.units,
            "provenance": dataset.provenance,
            "demonstrations": demos,
        },
        path,
    )


def load_dataset(path: str | Path) -> Dataset:
    payload = _load_json(path, DATASET_FORMAT)
    n, m = int(payload["n"]), int(payload["m"])
    demonstrations = []
    for demo in payload["demonstrations"]:
        demo_id = demo["id"]
        poses = []
        for i, (pos, ori) in enumerate(zip(demo["positions"], demo["orientations"])):
            pos = np.asarray(pos, dtype=np.float64)
            ori = np.asarray(ori, dtype=np.float64)
            if pos.shape != (n,) or ori.shape != (m + 1,):
                raise ValueError(f"{path}: demonstration {demo_id!r} sample {i} has wrong dimensions")
            norm = float(np.linalg.norm(ori))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(
                    f"{path}: demonstration {demo_id!r} sample {i} orientation norm {norm!r} "
                    "deviates from 1 by more than 1e-6"
                )
            if abs(norm - 1.0) > UNIT_NORM_TOL:
                ori = ori / norm
            poses.append(Pose(pos, ori))
        demonstrations.append(
            Demonstration(
                id=demo_id,
                timestamps=np.asarray(demo["timestamps"], dtype=np.float64),
                poses=tuple(poses),
                labels=tuple(demo["labels"]) if "labels" in demo else None,
            )
        )
    return Dataset(
        kind=payload["kind"],
        n=n,
        m=m,
        units=payload["units"],
        provenance=payload["provenance"],
        demonstrations=demonstrations,
    )


# -- checkpoints --------------------------------------------------------------


def _mlp_json(net: Mlp) -> dict:
    return {
        "widths": list(net.widths),
        "weights": [_array_json(w) for w in net.weights],
        "biases": [_array_json(b) for b in net.biases],
    }


def _mlp_from_json(payload: dict) -> Mlp:
    return Mlp(
        widths=[int(w) for w in payload["widths"]],
        weights=[np.array(w["data"], dtype=np.float64).reshape(w["shape"]) for w in payload["weights"]],
        biases=[np.array(b["data"], dtype=np.float64).reshape(b["shape"]) for b in payload["biases"]],
    )


def _rbf_json(net: RbfNet) -> dict:
    return {
        "centers": _array_json(net.centers),
        "gamma": float(net.gamma),
        "weights": _array_json(net.weights),
        "floor": float(net.floor),
    }


def _rbf_from_json(payload: dict) -> RbfNet:
    return RbfNet(
        centers=_array(payload, "centers"),
        gamma=float(payload["gamma"]),
        weights=_array(payload, "weights"),
        floor=float(payload["floor"]),
    )


def save_checkpoint(model: ManifoldModel, path: str | Path) -> None:
    model.require_heads()
    _dump_canonical(
        {
            "format": CHECKPOINT_FORMAT,
            "version": FORMAT_VERSION,
            "dims": {"n": model.n, "m": model.m, "d": model.d},
            "alpha": model.alpha,
            "beta": model.beta,
            "fixed_kappa": model.fixed_kappa,
            "encoder_mean": _mlp_json(model.encoder_mean),
            "encoder_logstd": _mlp_json(model.encoder_logstd),
            "decoder_mean": _mlp_json(model.decoder_mean),
            "position_precision": _rbf_json(model.position_precision),
            "concentration": _rbf_json(model.concentration),
            "training_latents": _array_json(model.training_latents),
            "meta": model.meta,
        },
        path,
    )


def load_checkpoint(path: str | Path) -> ManifoldModel:
    payload = _load_json(path, CHECKPOINT_FORMAT)
    dims = payload["dims"]
    return ManifoldModel(
        n=int(dims["n"]),
        m=int(dims["m"]),
        d=int(dims["d"]),
        encoder_mean=_mlp_from_json(payload["encoder_mean"]),
        encoder_logstd=_mlp_from_json(payload["encoder_logstd"]),
        decoder_mean=_mlp_from_json(payload["decoder_mean"]),
        position_precision=_rbf_from_json(payload["position_precision"]),
        concentration=_rbf_from_json(payload["concentration"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        fixed_kappa=float(payload["fixed_kappa"]),
        training_latents=_array(payload, "training_latents"),
        meta=payload["meta"],
    )


# -- trajectories -------------------------------------------------------------


def save_trajectory(trajectory: Trajectory, path: str | Path) -> None:
    n = trajectory.poses[0].n
    m = trajectory.poses[0].m
    lines = [TRAJECTORY_HEADER, f"# n={n} m={m}"]
    lines.append("t," + ",".join(f"p{i}" for i in range(n)) + "," + ",".join(f"q{i}" for i in range(m + 1)))
    for t, pose in zip(trajectory.parameters, trajectory.poses):
        row = [repr(float(t))] + [repr(v) for v in pose.position.tolist()] + [repr(v) for v in pose.orientation.tolist()]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectory(path: str | Path) -> Trajectory:
    lines = Path(path).read_text().strip().split("\n")
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: missing trajectory header {TRAJECTORY_HEADER!r}")
    dims = dict(part.split("=") for part in lines[1].lstrip("# ").split())
    n, m = int(dims["n"]), int(dims["m"])
    params, poses = [], []
    for line in lines[3:]:
        values = [float(v) for v in line.split(",")]
        if len(values) != 1 + n + m + 1:
            raise ValueError(f"{path}: row has {len(values)} fields, expected {2 + n + m}")
        params.append(values[0])
        poses.append(Pose(values[1 : 1 + n], values[1 + n :]))
    return Trajectory(parameters=np.array(params), poses=tuple(poses))


# -- replan scripts -----------------------------------------------------------


def _obstacle_json(obs: Obstacle) -> dict:
    return {"center": obs.center.tolist(), "radius": obs.radius, "strength": obs.strength}


def obstacle_from_json(payload: dict) -> Obstacle:
    return Obstacle(
        center=np.asarray(payload["center"], dtype=np.float64),
        radius=float(payload["radius"]),
        strength=float(payload["strength"]),
    )


def save_script(script: ReplanScript, path: str | Path) -> None:
    _dump_canonical(
        {
            "format": SCRIPT_FORMAT,
            "version": FORMAT_VERSION,
            "rate_hz": script.rate_hz,
            "total_ticks": script.total_ticks,
            "timeline": [
                {"tick": entry.tick, "obstacles": [_obstacle_json(o) for o in entry.obstacles]}
                for entry in script.entries
            ],
        },
        path,
    )


def load_script(path: str | Path) -> ReplanScript:
    payload = _load_json(path, SCRIPT_FORMAT)
    entries = [
        ScriptEntry(
            tick=int(entry["tick"]),
            obstacles=tuple(obstacle_from_json(o) for o in entry["obstacles"]),
        )
        for entry in payload["timeline"]
    ]
    return ReplanScript(entries=entries, rate_hz=float(payload["rate_hz"]), total_ticks=int(payload["total_ticks"]))
