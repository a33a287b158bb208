"""Command-line client for the experiment service.

Each run subcommand builds a config (TOML file plus flag overrides), submits
it to the service — in-process by default, or a remote server via --server —
and reports the run record.  Exit codes: 0 success, 1 configuration problem,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import httpx

from .config import RunConfig, load_config
from .errors import ConfigError
from .service import create_app

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

RUN_KINDS = ("simulate", "sync", "sweep", "dform", "verify", "constants")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; we reserve 2 for numerics."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _interp_spec(text: str) -> tuple[str, int]:
    kind, sep, count = text.partition(":")
    if not sep or kind not in ("modal", "volume", "nodal"):
        raise argparse.ArgumentTypeError(
            f"expected KIND:N with KIND in modal|volume|nodal, got {text!r}"
        )
    try:
        n = int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"interpolant count {count!r} is not an integer")
    if n < 1:
        raise argparse.ArgumentTypeError("interpolant count must be positive")
    return kind, n


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dformlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    for kind in RUN_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", metavar="PATH", help="TOML config file")
        p.add_argument("--out", metavar="DIR", default="runs",
                       help="workspace for run artifacts (default: runs)")
        p.add_argument("--seed", type=int, metavar="N", help="override experiment.seed")
        p.add_argument("--resolution", type=int, metavar="N",
                       help="override solver.resolution")
        p.add_argument("--mu", type=float, metavar="X", help="override experiment.mu")
        p.add_argument("--interp", type=_interp_spec, metavar="KIND:N",
                       help="override the interpolant, e.g. modal:12")
        p.add_argument("--server", metavar="URL",
                       help="submit to a running server instead of in-process")
        p.add_argument("--name", default="", help="label for the run record")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--out", metavar="DIR", default="runs",
                       help="workspace for run artifacts (default: runs)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _build_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    data = config.model_dump()
    data["experiment"]["kind"] = args.command
    if args.seed is not None:
        data["experiment"]["seed"] = args.seed
    if args.resolution is not None:
        data["solver"]["resolution"] = args.resolution
    if args.mu is not None:
        data["experiment"]["mu"] = args.mu
    if args.interp is not None:
        data["interpolant"]["kind"], data["interpolant"]["n"] = args.interp
    return RunConfig.model_validate(data)


def _print_record(record: dict, out_note: str) -> None:
    print(f"{record['id']} {record['status']} ({record['kind']})")
    summary = {k: v for k, v in record["summary"].items() if k not in ("kind", "files")}
    for key in sorted(summary):
        print(f"  {key}: {json.dumps(summary[key])}")
    if record["files"]:
        print(f"files ({out_note}): " + ", ".join(record["files"]))


def _config_error_message(detail) -> str:
    if isinstance(detail, dict) and "message" in detail:
        return detail["message"]
    return json.dumps(detail)


def _submit(args: argparse.Namespace, config: RunConfig) -> int:
    payload = {"config": config.model_dump(mode="json"), "name": args.name}
    if args.server:
        client = httpx.Client(base_url=args.server, timeout=None)
        out_note = f"on {args.server}"
    else:
        from fastapi.testclient import TestClient

        client = TestClient(create_app(workspace=args.out))
        out_note = f"under {args.out}"
    with client:
        response = client.post("/runs", json=payload)
    if response.status_code == 422:
        detail = response.json().get("detail")
        print(f"config error: {_config_error_message(detail)}", file=sys.stderr)
        return EXIT_CONFIG
    if response.status_code >= 400:
        print(f"server error ({response.status_code}): {response.text}", file=sys.stderr)
        return EXIT_NUMERICAL if response.status_code >= 500 else EXIT_CONFIG
    record = response.json()
    _print_record(record, out_note)
    if record["status"] == "failed":
        print(f"numerical failure: {record['detail']}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(create_app(workspace=args.out), host=args.host, port=args.port)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "serve":
        return _serve(args)
    try:
        config = _build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _submit(args, config)
    except httpx.HTTPError as exc:
        print(f"cannot reach server: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
