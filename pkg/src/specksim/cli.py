"""Command-line client for the emulator service.

Every subcommand except `serve` is a thin client over the HTTP API: file
handling stays local, computation happens behind the endpoints. By default
the app is mounted in-process (no server needed); pass --server to talk to
a remote instance, in which case the scenario's point cloud is inlined into
the request so the server never has to touch the client's filesystem.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx
import yaml

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class ApiClient:
    """POST/GET against a remote server, or the in-process ASGI app."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self.server is not None:
            try:
                resp = httpx.request(method, self.server + path, json=payload,
                                     timeout=600.0)
            except httpx.HTTPError as exc:
                raise CliError(f"cannot reach {self.server}: {exc}", EXIT_RUNTIME)
        else:
            resp = asyncio.run(self._asgi_request(method, path, payload))
        if resp.status_code >= 500:
            raise CliError(f"server error: {resp.text}", EXIT_RUNTIME)
        if resp.status_code >= 400:
            raise CliError(_format_error(resp), EXIT_CONFIG)
        return resp.json()

    async def _asgi_request(self, method: str, path: str, payload: dict | None):
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://specksim") as client:
            return await client.request(method, path, json=payload)


def _format_error(resp) -> str:
    try:
        detail = resp.json().get("detail")
    except ValueError:
        return resp.text
    if isinstance(detail, list):
        parts = []
        for item in detail:
            if isinstance(item, dict):  # pydantic 422 items
                loc = ".".join(str(p) for p in item.get("loc", []))
                parts.append(f"{loc}: {item.get('msg')}")
            else:
                parts.append(str(item))
        return "; ".join(parts)
    return str(detail)


def _load_scenario_file(path: str, seed: int | None) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"scenario file not found: {p}", EXIT_CONFIG)
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise CliError(f"not valid YAML: {exc}", EXIT_CONFIG)
    if not isinstance(data, dict):
        raise CliError("scenario file must contain a mapping", EXIT_CONFIG)
    if seed is not None:
        data["seed"] = seed
    _inline_pointcloud(data, p.parent)
    return data


def _inline_pointcloud(data: dict, base_dir: Path) -> None:
    """Replace a pointcloud path with inline points so the request is
    self-contained (the server may be on another machine)."""
    section = data.get("pointcloud")
    if not isinstance(section, dict) or section.get("path") is None:
        return
    from .pointcloud import load_pointcloud

    cloud_path = Path(section["path"])
    if not cloud_path.is_absolute():
        cloud_path = base_dir / cloud_path
    if not cloud_path.exists():
        raise CliError(f"point cloud file not found: {cloud_path}", EXIT_CONFIG)
    try:
        cloud = load_pointcloud(cloud_path)
    except Exception as exc:
        raise CliError(f"cannot parse point cloud: {exc}", EXIT_CONFIG)
    section["points"] = [
        [float(x), float(y), float(z), int(r), int(g), int(b)]
        for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors)]
    section["path"] = None


def cmd_run(args) -> int:
    data = _load_scenario_file(args.scenario, args.seed)
    client = ApiClient(args.server)
    result = client.request("POST", "/runs", {"scenario": data, "seed": None})
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "trajectory.log").write_text(result["trajectory_log"])
    (outdir / "roles.log").write_text(result["role_log"])
    (outdir / "summary.json").write_text(
        json.dumps(result["metrics"], indent=2, sort_keys=True) + "\n")
    if result.get("haptics_log"):
        (outdir / "haptics.log").write_text(result["haptics_log"])
    if result.get("event_trace"):
        (outdir / "events.log").write_text(result["event_trace"])
    series = result.get("series") or {}
    if series:
        series_dir = outdir / "series"
        series_dir.mkdir(exist_ok=True)
        for name, text in sorted(series.items()):
            (series_dir / f"{name}.txt").write_text(text)
    for warning in result.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    print(json.dumps(result["metrics"], indent=2, sort_keys=True))
    print(f"logs written to {outdir}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    data = _load_scenario_file(args.scenario, None)
    client = ApiClient(args.server)
    result = client.request("POST", "/validate", {"scenario": data})
    if result["valid"]:
        print("scenario is valid")
        return EXIT_OK
    for error in result["errors"]:
        print(f"error: {error}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_downsample(args) -> int:
    from .pointcloud import (
        CountMismatch,
        EmptyCloud,
        ParseError,
        load_pointcloud,
    )

    src = Path(args.input)
    if not src.exists():
        raise CliError(f"point cloud file not found: {src}", EXIT_CONFIG)
    try:
        cloud = load_pointcloud(src)
    except (ParseError, CountMismatch, EmptyCloud) as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    rows = [[float(x), float(y), float(z), int(r), int(g), int(b)]
            for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors)]
    client = ApiClient(args.server)
    result = client.request("POST", "/downsample",
                            {"points": rows, "count": args.count})
    out = Path(args.output)
    with out.open("w") as fh:
        for x, y, z, r, g, b in result["points"]:
            fh.write(f"{x!r} {y!r} {z!r} {int(r)} {int(g)} {int(b)}\n")
    print(f"{len(result['points'])} points written to {out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    log_path = Path(args.log)
    if not log_path.exists():
        raise CliError(f"trajectory log not found: {log_path}", EXIT_CONFIG)
    data = _load_scenario_file(args.scenario, None)
    client = ApiClient(args.server)
    result = client.request("POST", "/metrics", {
        "trajectory_log": log_path.read_text(),
        "scenario": data,
    })
    print(json.dumps(result["metrics"], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("specksim.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specksim",
        description="Deterministic emulator for light-speck drone swarms")
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario and write its logs")
    p.add_argument("scenario", help="YAML scenario file")
    p.add_argument("-o", "--output", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("downsample",
                       help="farthest-point downsample a point cloud file")
    p.add_argument("input")
    p.add_argument("count", type=int)
    p.add_argument("output")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("metrics", help="recompute metrics from a trajectory log")
    p.add_argument("log")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # unexpected: runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
