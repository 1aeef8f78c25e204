"""Thin command-line client for the simulation service.

Subcommands build a JSON request from a flat YAML config plus flag
overrides, post it to the service, and write the returned CSV/JSON payloads
locally.  Without --server the bundled FastAPI app is driven in-process;
with --server URL any running instance (see `mcvd-sync serve`) is used.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .experiment import atomic_write_text


def _load_mapping(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SystemExit(f"config file {path} must contain a flat mapping")
    return data


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    # in-process fallback: drive the bundled app over the same HTTP surface
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(args, path: str, payload: dict) -> dict:
    with _client(args.server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise SystemExit(f"{path} failed ({resp.status_code}): {detail}")
    return resp.json()


def _request_payload(args) -> dict:
    payload = _load_mapping(args.config)
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.backend is not None:
        payload["backend"] = args.backend
    if args.full_scale:
        payload["full_scale"] = True
    return payload


def _write_summary(out: str, summary: dict, extra_outputs: list[str]) -> str:
    summary = dict(summary)
    summary["outputs"] = extra_outputs
    path = str(Path(out).with_suffix(Path(out).suffix + ".summary.json"))
    atomic_write_text(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def cmd_curves(args) -> int:
    payload = _load_mapping(args.config)
    body = _post(args, "/curves", payload)
    atomic_write_text(args.out, body["csv"])
    spath = _write_summary(args.out, body["summary"], [args.out])
    print(f"wrote {args.out} and {spath}")
    return 0


def cmd_run(args) -> int:
    payload = _request_payload(args)
    payload["run_index"] = args.run_index
    body = _post(args, "/run", payload)
    report = {
        "proposed": body["proposed"],
        "baseline": body["baseline"],
        "summary": body["summary"],
    }
    atomic_write_text(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(
        f"wrote {args.out} (ser proposed={body['proposed']['ser']:.6g}, "
        f"baseline={body['baseline']['ser']:.6g})"
    )
    return 0


def cmd_sweep(args) -> int:
    payload = _request_payload(args)
    body = _post(args, "/sweep", payload)
    atomic_write_text(args.out, body["csv"])
    spath = _write_summary(args.out, body["summary"], [args.out])
    print(f"wrote {args.out} ({len(body['rows'])} sweep rows) and {spath}")
    return 0


def cmd_eye(args) -> int:
    payload = _request_payload(args)
    payload["run_index"] = args.run_index
    if args.span is not None:
        payload["span"] = args.span
    body = _post(args, "/eye", payload)
    stem = Path(args.out)
    prop_path = str(stem.with_name(stem.stem + "_proposed" + (stem.suffix or ".csv")))
    fixed_path = str(stem.with_name(stem.stem + "_fixed" + (stem.suffix or ".csv")))
    atomic_write_text(prop_path, body["csv_proposed"])
    atomic_write_text(fixed_path, body["csv_fixed"])
    spath = _write_summary(args.out, body["summary"], [prop_path, fixed_path])
    print(
        f"wrote {prop_path}, {fixed_path} and {spath} "
        f"(eye height {body['eye_height_proposed']:.4g} vs {body['eye_height_fixed']:.4g})"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("mcvd_sync.service:app", host=args.host, port=args.port)
    return 0


def _add_common(sub: argparse.ArgumentParser, with_out: bool = True) -> None:
    sub.add_argument("--config", help="flat YAML config file")
    if with_out:
        sub.add_argument("--out", required=True, help="output path")
    sub.add_argument("--server", help="service URL; default runs in-process")
    sub.add_argument("--seed", type=int, help="override the config seed")
    sub.add_argument("--backend", choices=["analytic_sample", "particle"], help="arrival backend")
    sub.add_argument(
        "--full-scale",
        action="store_true",
        help="full-scale averaging: 100 runs x 100000 symbols",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcvd-sync", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("curves", help="export hitting-rate curves as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_curves)

    p = subs.add_parser("run", help="one end-to-end replica, JSON report")
    _add_common(p)
    p.add_argument("--run-index", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("sweep", help="parameter sweep, CSV results")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("eye", help="eye-diagram traces under both alignments")
    _add_common(p)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--span", type=float, help="trace span in seconds")
    p.set_defaults(func=cmd_eye)

    p = subs.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
