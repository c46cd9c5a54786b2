"""Command-line client for the mission pipeline.

Every command except `new` and `serve` talks to the mission HTTP API: a
remote server when --server is given, otherwise an in-process instance
of the same service, so the CLI and the operator console always exercise
the identical surface.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import RadSurveyError
from .mission import STAGES, create_mission, render_report_text


def _client(args):
    if getattr(args, "server", None):
        import httpx

        return httpx.Client(base_url=args.server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette's bundled client warns about its own httpx pin
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(args.mission_dir), raise_server_exceptions=False)


def _fail(resp) -> None:
    try:
        body = resp.json()
        msg = f"{body.get('code', 'error')}: {body.get('message', resp.text)}"
    except Exception:
        msg = resp.text
    print(f"error ({resp.status_code}) {msg}", file=sys.stderr)
    sys.exit(1)


def cmd_new(args):
    config = json.loads(open(args.config).read()) if args.config else None
    create_mission(args.mission_dir, args.scenario, config_override=config, seed=args.seed)
    print(f"mission created in {args.mission_dir}")


def cmd_state(args):
    with _client(args) as client:
        resp = client.get("/state")
        if resp.status_code != 200:
            _fail(resp)
        print(json.dumps(resp.json(), indent=2))


def _advance(client, stage, force=False):
    state = client.get("/state").json()
    resp = client.post(f"/advance/{stage}", json={"version": state["version"], "force": force})
    return resp


def cmd_run(args):
    with _client(args) as client:
        resp = _advance(client, args.stage, force=args.force)
        if resp.status_code != 200:
            _fail(resp)
        print(f"{args.stage} complete (version {resp.json()['version']})")


def cmd_run_all(args):
    with _client(args) as client:
        state = client.get("/state").json()
        start = STAGES.index(state["stage"]) + 1
        for stage in STAGES[start:]:
            resp = _advance(client, stage, force=args.force)
            if resp.status_code != 200:
                _fail(resp)
            print(f"{stage} complete")
        print("mission complete")


def cmd_report(args):
    with _client(args) as client:
        resp = client.get("/artifact/Localized")
        if resp.status_code != 200:
            _fail(resp)
        report = resp.json()
        if args.json:
            print(json.dumps(report, indent=2))
        else:
            print(render_report_text(report), end="")


def cmd_serve(args):
    import uvicorn

    from .service.app import create_app

    host, _, port = args.bind.partition(":")
    uvicorn.run(create_app(args.mission_dir), host=host or "127.0.0.1", port=int(port or 8080))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radsurveyor", description="multi-robot radiation survey pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, server=True):
        p.add_argument("--mission-dir", required=True, help="mission directory")
        if server:
            p.add_argument("--server", help="remote service URL (default: run in-process)")

    p = sub.add_parser("new", help="initialize a mission directory from a scenario")
    common(p, server=False)
    p.add_argument("--scenario", required=True, help="bundled scenario name or JSON path")
    p.add_argument("--config", help="JSON file with config overrides")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(fn=cmd_new)

    p = sub.add_parser("state", help="print the mission state")
    common(p)
    p.set_defaults(fn=cmd_state)

    p = sub.add_parser("run", help="run one pipeline stage")
    common(p)
    p.add_argument("stage", choices=STAGES[1:])
    p.add_argument("--force", action="store_true", help="ignore stale-configuration checks")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("run-all", help="run every remaining stage")
    common(p)
    p.add_argument("--force", action="store_true", help="rerun all stages from scratch")
    p.set_defaults(fn=cmd_run_all)

    p = sub.add_parser("report", help="print the localization report")
    common(p)
    p.add_argument("--json", action="store_true", help="raw JSON instead of the table")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="serve the mission HTTP API")
    common(p, server=False)
    p.add_argument("--bind", default="127.0.0.1:8080", help="host:port to bind")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except RadSurveyError as e:
        print(f"error ({e.code}): {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
