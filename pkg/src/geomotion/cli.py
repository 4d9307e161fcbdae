"""Command-line client for the geomotion service.

Every subcommand marshals its flags into the HTTP API. By default the service
runs in-process (no server needed, file paths are local); pass --server to
talk to a running instance instead, in which case paths refer to the server's
filesystem. `geomotion serve` starts such an instance.
"""

from __future__ import annotations

import argparse
import sys

import httpx


class CliError(Exception):
    pass


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process ASGI unless a URL is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=3600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        response = self._client.request(method, path, json=payload)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except Exception:
                detail = response.text
            raise CliError(str(detail))
        return response.json()

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, payload)


def parse_pose(text: str) -> dict:
    """Parse 'x,..;qw,..' into a pose payload (position;orientation)."""
    parts = text.split(";")
    if len(parts) != 2:
        raise CliError(f"pose {text!r} must be 'x,..;qw,..' (position;orientation)")
    try:
        position = [float(v) for v in parts[0].split(",")]
        orientation = [float(v) for v in parts[1].split(",")]
    except ValueError as exc:
        raise CliError(f"pose {text!r} has a non-numeric field: {exc}") from exc
    return {"position": position, "orientation": orientation}


def parse_obstacle(text: str) -> dict:
    """Parse 'cx,..,r,eta' (center coordinates, radius, strength)."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise CliError(f"obstacle {text!r} has a non-numeric field: {exc}") from exc
    if len(values) < 3:
        raise CliError(f"obstacle {text!r} needs at least center, radius, strength")
    return {"center": values[:-2], "radius": values[-2], "strength": values[-1]}


def parse_hidden(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise CliError(f"--hidden {text!r} must be comma-separated integers") from exc


def _session(client: ServiceClient, ckpt: str, grid: int, margin: float) -> str:
    info = client.post("/api/sessions", {"checkpoint": ckpt, "grid": grid, "margin": margin})
    return info["id"]


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("geomotion.service:app", host=args.host, port=args.port, log_level="info")
    return 0


def cmd_gen_data(args) -> int:
    client = ServiceClient(args.server)
    payload = {
        "kind": args.kind,
        "out": args.out,
        "seed": args.seed,
        "samples": args.samples,
        "noise_std": args.noise,
        "demos": args.demos,
        "branches": args.branches,
    }
    summary = client.post("/api/datasets/generate", payload)
    print(
        f"wrote {summary['path']}: {summary['kind']} dataset, "
        f"{summary['demonstrations']} demonstrations, {summary['samples']} samples (R^{summary['n']} x S^{summary['m']})"
    )
    return 0


def cmd_train(args) -> int:
    client = ServiceClient(args.server)
    settings = {
        "latent_dim": args.latent_dim,
        "hidden": parse_hidden(args.hidden),
        "rbf_kernels": args.rbf_k,
        "alpha": args.alpha,
        "beta": args.beta,
        "epochs": args.epochs,
        "stage2_epochs": args.stage2_epochs,
        "batch_size": args.batch,
        "learning_rate": args.lr,
        "seed": args.seed,
    }
    result = client.post("/api/train", {"data": args.data, "out": args.out, "settings": settings})
    print(
        f"wrote {result['checkpoint']}: trained on {result['samples']} samples "
        f"in {result['train_seconds']:.1f}s, final loss {result['final_loss']:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    client = ServiceClient(args.server)
    report = client.post("/api/eval", {"checkpoint": args.ckpt, "data": args.data})
    print(f"samples: {report['samples']}")
    print(f"position_rmse_m: {report['position_rmse']:.6f}")
    print(f"position_rmse_fraction: {report['rmse_fraction'] * 100:.3f}% of bbox diagonal {report['bbox_diagonal']:.4f} m")
    print(f"orientation_angle_deg: {report['orientation_angle_deg']:.4f}")
    print(f"elbo_position_loglik: {report['position_loglik']:.4f}")
    print(f"elbo_orientation_loglik: {report['orientation_loglik']:.4f}")
    print(f"elbo_kl: {report['kl']:.4f}")
    return 0


def cmd_plan(args) -> int:
    client = ServiceClient(args.server)
    session = _session(client, args.ckpt, args.grid, args.margin)
    try:
        payload = {
            "start": parse_pose(args.start),
            "goal": parse_pose(args.goal),
            "obstacles": [parse_obstacle(o) for o in args.obstacle],
            "samples": args.samples,
            "refine": args.refine,
            "control_points": args.control_points,
            "out": args.out,
        }
        result = client.post(f"/api/sessions/{session}/plan", payload)
    finally:
        client.request("DELETE", f"/api/sessions/{session}")
    print(
        f"wrote {result['out']}: {len(result['trajectory']['parameters'])} poses, "
        f"{len(result['node_path'])} graph nodes, cost {result['graph_cost']:.4f}"
    )
    return 0


def cmd_simulate(args) -> int:
    client = ServiceClient(args.server)
    session = _session(client, args.ckpt, args.grid, args.margin)
    try:
        payload = {
            "script": args.script,
            "start": parse_pose(args.start) if args.start else None,
            "goal": parse_pose(args.goal) if args.goal else None,
            "samples": args.samples,
            "out_dir": args.out,
        }
        result = client.post(f"/api/sessions/{session}/simulate", payload)
    finally:
        client.request("DELETE", f"/api/sessions/{session}")
    print(f"ticks: {result['ticks']}")
    print(f"median_ms: {result['median_ms']:.3f}")
    print(f"p95_ms: {result['p95_ms']:.3f}")
    print(f"budget_ms: {result['budget_ms']:.3f}")
    print(f"over_budget_ticks: {result['over_budget_ticks']}")
    if result["out_dir"]:
        print(f"wrote per-tick trajectories to {result['out_dir']}")
    return 0


def cmd_plot(args) -> int:
    client = ServiceClient(args.server)
    session = _session(client, args.ckpt, args.grid, args.margin)
    try:
        payload = {
            "mode": args.mode,
            "out": args.out,
            "resolution": args.resolution,
            "trajectory_paths": args.path,
            "obstacles": [parse_obstacle(o) for o in args.obstacle],
        }
        result = client.post(f"/api/sessions/{session}/plot", payload)
    finally:
        client.request("DELETE", f"/api/sessions/{session}")
    print(f"wrote {result['path']} ({result['bytes_written']} bytes)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geomotion", description=__doc__)
    parser.add_argument("--server", default=None, help="URL of a running geomotion service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["toy-jc", "pouring"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None, help="samples per demonstration")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--demos", type=int, default=None)
    p.add_argument("--branches", type=int, default=3)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a manifold model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--latent-dim", type=int, default=2)
    p.add_argument("--hidden", default="200,100")
    p.add_argument("--rbf-k", type=int, default=500)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--stage2-epochs", type=int, default=500)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="reconstruction metrics of a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="plan a trajectory between two poses")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--margin", type=float, default=0.15)
    p.add_argument("--start", required=True, help="pose as 'x,..;qw,..'")
    p.add_argument("--goal", required=True, help="pose as 'x,..;qw,..'")
    p.add_argument("--obstacle", action="append", default=[], help="'cx,..,r,eta'; repeatable")
    p.add_argument("--refine", action="store_true")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--control-points", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run a scripted dynamic-obstacle replanning loop")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--out", required=True, help="output directory for per-tick trajectories")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--margin", type=float, default=0.15)
    p.add_argument("--start", default=None)
    p.add_argument("--goal", default=None)
    p.add_argument("--samples", type=int, default=60)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="render the latent field as SVG")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--mode", choices=["variance", "magnification"], default="magnification")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=60)
    p.add_argument("--margin", type=float, default=0.15)
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--path", action="append", default=[], help="trajectory file to overlay; repeatable")
    p.add_argument("--obstacle", action="append", default=[], help="'cx,..,r,eta'; repeatable")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
