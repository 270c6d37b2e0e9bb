"""Command-line client for the payload service.

Every verb talks to the HTTP API: against a remote server when --server
is given, otherwise against an in-process instance of the same app.
Exit codes: 0 success, 2 config error, 3 scenario error, 4 planner
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

_EXIT_CODES = {
    "config": 2,
    "scenario": 3,
    "map_format": 3,  # stored-artifact load failures count as scenario load
    "planner": 4,
    "sync": 4,
}

_OVERRIDE_FLAGS = (
    ("generator", str), ("seed", int), ("mission-seed", int),
    ("resolution", float), ("size", str), ("modes", str), ("bounds", str),
    ("max-height", float), ("standoff", float), ("v-max", float),
    ("drift-rate", float), ("range-noise", float), ("sim-time-limit", float),
    ("output-dir", str), ("map-in", str),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="payloadsim",
        description="Missions, replays, timing stats, and map info for the "
                    "simulated autonomy payload.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; in-process if omitted")
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="execute a mission config")
    run.add_argument("config", nargs="?", default=None,
                     help="plain-text mission config file")
    for name, kind in _OVERRIDE_FLAGS:
        run.add_argument(f"--{name}", type=kind, default=None,
                         dest=name.replace("-", "_"))

    replay = sub.add_parser("replay", help="recompute metrics from a report directory")
    replay.add_argument("report_dir")
    replay.add_argument("--check", action="store_true",
                        help="fail if recomputed metrics disagree with stored ones")

    stats = sub.add_parser("stats", help="run the timing bench")
    stats.add_argument("--duration", type=float, default=520.0)
    stats.add_argument("--seed", type=int, default=0)
    stats.add_argument("--out", default=None, help="write sync_stats.csv here")

    info = sub.add_parser("map-info", help="summarize a stored map or world file")
    info.add_argument("path")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service.app import create_app
    return TestClient(create_app(), raise_server_exceptions=False)


def _fail(resp) -> int:
    try:
        body = resp.json()
        kind = body.get("error_type", "internal")
        message = body.get("message", resp.text)
    except ValueError:
        kind, message = "internal", resp.text
    print(f"error ({kind}): {message}", file=sys.stderr)
    return _EXIT_CODES.get(kind, 1)


def _cmd_run(args, client) -> int:
    text = ""
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            print(f"error (config): config file not found: {path}",
                  file=sys.stderr)
            return 2
        text = path.read_text()
    overrides = {}
    for name, _ in _OVERRIDE_FLAGS:
        value = getattr(args, name.replace("-", "_"))
        if value is not None:
            overrides[name.replace("-", "_")] = str(value)
    resp = client.post("/mission/run",
                       json={"config_text": text, "overrides": overrides})
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print(body["report_text"], end="")
    print(f"wall time [s]    : {body['wall_time_s']:.2f}")
    if body["output_dir"]:
        print(f"report directory : {body['output_dir']}")
    return 0


def _cmd_replay(args, client) -> int:
    resp = client.post("/mission/replay", json={"output_dir": args.report_dir})
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print("metric, stored, recomputed")
    for key, value in body["recomputed"].items():
        print(f"{key}, {body['stored'].get(key, '-')}, {value}")
    if body["match"]:
        print("replay matches the stored report")
        return 0
    print(f"mismatched metrics: {', '.join(body['mismatched'])}",
          file=sys.stderr)
    return 1 if args.check else 0


def _cmd_stats(args, client) -> int:
    resp = client.post("/sync/bench",
                       json={"duration": args.duration, "seed": args.seed})
    if resp.status_code != 200:
        return _fail(resp)
    body = resp.json()
    print(body["table_text"])
    if args.out:
        from .mission import write_sync_csv
        from .service.models import SyncRowModel
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [SyncRowModel(**r).to_row() for r in body["rows"]]
        write_sync_csv(out / "sync_stats.csv", rows)
        print(f"wrote {out / 'sync_stats.csv'}")
    return 0


def _cmd_map_info(args, client) -> int:
    resp = client.post("/map/info", json={"path": args.path})
    if resp.status_code != 200:
        return _fail(resp)
    for key, value in resp.json().items():
        if value is not None:
            print(f"{key}: {value}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.verb == "serve":
        import uvicorn

        from .service.app import create_app
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    with _client(args.server) as client:
        if args.verb == "run":
            return _cmd_run(args, client)
        if args.verb == "replay":
            return _cmd_replay(args, client)
        if args.verb == "stats":
            return _cmd_stats(args, client)
        return _cmd_map_info(args, client)


if __name__ == "__main__":
    sys.exit(main())
