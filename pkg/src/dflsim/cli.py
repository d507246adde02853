"""Command-line client for the simulation service.

The CLI never runs experiments itself: it ships configs to the HTTP API and
writes the returned results to disk. By default the service app is mounted
in-process (no separate server needed); ``--server`` points the same commands
at a remote instance, and ``serve`` starts one.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import httpx
import numpy as np

from . import __version__, data, results
from .service.app import create_app

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RUN = 3


class ServiceClient:
    """Thin HTTP client; in-process ASGI transport unless a server is given."""

    def __init__(self, server: str | None = None):
        self._server = server
        self._app = None if server else create_app()

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        if self._server:
            response = httpx.post(self._server.rstrip("/") + path, json=payload, timeout=600.0)
            return response.status_code, response.json()

        async def _call():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, base_url="http://dflsim.local") as client:
                return await client.post(path, json=payload, timeout=600.0)

        response = asyncio.run(_call())
        return response.status_code, response.json()


def _read_config(path: str) -> str | None:
    p = Path(path)
    if not p.is_file():
        print(f"error: config file not found: {p}", file=sys.stderr)
        return None
    return p.read_text()


def cmd_validate(args) -> int:
    text = _read_config(args.config)
    if text is None:
        return EXIT_CONFIG
    client = ServiceClient(args.server)
    _, body = client.post("/config/validate", {"text": text})
    if not body["valid"]:
        for line in body["errors"]:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"config ok: {body['runs_planned']} run(s) planned")
    return EXIT_OK


def _print_summary(runs: list[dict]) -> None:
    header = f"{'topology':<8} {'aggregation':<12} {'attack':<8} {'fraction':>8} {'benign_f1':>10} {'status':<6}"
    print(header)
    print("-" * len(header))
    for run in runs:
        f1 = run["summary"]["mean_benign_f1"] if run.get("summary") else float("nan")
        print(
            f"{run['topology']:<8} {run['aggregation']:<12} {run['attack']:<8} "
            f"{run['malicious_fraction']:>8.3g} {f1:>10.4f} {run['status']:<6}"
        )


def cmd_run(args) -> int:
    text = _read_config(args.config)
    if text is None:
        return EXIT_CONFIG
    client = ServiceClient(args.server)

    _, validation = client.post("/config/validate", {"text": text})
    if not validation["valid"]:
        for line in validation["errors"]:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG

    status, plan_body = client.post("/campaigns/plan", {"text": text, "seed": args.seed})
    if status != 200:
        print(f"config error: {plan_body.get('detail', plan_body)}", file=sys.stderr)
        return EXIT_CONFIG
    plans = plan_body["runs"]

    bundle = results.new_bundle(validation["resolved"])
    out_dir = Path(args.out)
    failed = 0

    def record(run_result: dict) -> None:
        nonlocal failed
        results.add_run(bundle, run_result)
        bundle["runs"].sort(key=lambda r: r["run_index"])
        # Rewrite after every run so a crash preserves completed work.
        results.write_outputs(bundle, out_dir, fmt=args.format)
        if run_result["status"] == "error":
            failed += 1
            print(
                f"run {run_result['run_index']} failed: {run_result['error']}",
                file=sys.stderr,
            )

    workers = max(1, args.parallel)
    if workers > 1 and not args.fail_fast:
        # Runs are independent; results land in the bundle in run order
        # regardless of completion order.
        lock = threading.Lock()

        def execute(plan):
            _, run_result = client.post("/runs/execute", {"run": plan})
            with lock:
                record(run_result)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(execute, plans))
    else:
        for plan in plans:
            _, run_result = client.post("/runs/execute", {"run": plan})
            record(run_result)
            if failed and args.fail_fast:
                break

    if args.charts:
        results.write_charts(bundle, out_dir)
    _print_summary(bundle["runs"])
    print(f"wrote {out_dir / ('results.' + args.format)}")
    return EXIT_RUN if failed else EXIT_OK


def _normalized_unit_range(features: np.ndarray) -> np.ndarray:
    low, high = features.min(), features.max()
    if high <= low:
        return np.zeros_like(features)
    return (features - low) / (high - low)


def _fetch_blobs(client: ServiceClient, args) -> data.Dataset:
    _, body = client.post(
        "/datasets/blobs",
        {
            "classes": args.classes,
            "per_class": args.per_class,
            "feature_dim": args.feature_dim,
            "spread": args.spread,
            "seed": args.seed,
        },
    )
    features = _normalized_unit_range(np.asarray(body["features"], dtype=np.float64))
    return data.Dataset(features, np.asarray(body["labels"]), body["classes"])


def cmd_gen_data(args) -> int:
    client = ServiceClient(args.server)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _fetch_blobs(client, args)
    images = out_dir / "blobs-images.idx"
    labels = out_dir / "blobs-labels.idx"
    data.save_idx(dataset, images, labels)
    print(f"wrote {images} and {labels} ({len(dataset)} examples)")
    if args.kind == "blobs":
        return EXIT_OK

    # idx-roundtrip: re-read what we wrote and check the quantization bound.
    reloaded = data.load_idx(images, labels)
    max_err = float(np.max(np.abs(reloaded.features - dataset.features)))
    labels_ok = bool(np.array_equal(reloaded.labels, dataset.labels))
    ok = labels_ok and max_err <= 0.5 / 255.0 + 1e-12
    print(f"roundtrip max feature error {max_err:.6g}, labels {'match' if labels_ok else 'differ'}")
    if not ok:
        print("idx roundtrip FAILED", file=sys.stderr)
        return EXIT_FAILURE
    print("idx roundtrip ok")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dflsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dflsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    validate = sub.add_parser("validate", help="check a config file")
    validate.add_argument("--config", required=True)
    validate.add_argument("--server", default=None, help="remote service URL")
    validate.set_defaults(func=cmd_validate)

    run = sub.add_parser("run", help="execute an experiment campaign")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--charts", action="store_true", help="emit SVG charts")
    run.add_argument("--seed", type=int, default=None, help="override the global seed")
    run.add_argument("--fail-fast", action="store_true", help="stop at the first failed run")
    run.add_argument("--server", default=None, help="remote service URL")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen-data", help="generate synthetic datasets")
    gen.add_argument("--kind", choices=("blobs", "idx-roundtrip"), required=True)
    gen.add_argument("--out", default="datasets")
    gen.add_argument("--classes", type=int, default=3)
    gen.add_argument("--per-class", type=int, default=100)
    gen.add_argument("--feature-dim", type=int, default=8)
    gen.add_argument("--spread", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--server", default=None, help="remote service URL")
    gen.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as e:
        print(f"error: service request failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
