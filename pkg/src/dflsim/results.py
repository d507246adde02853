"""Result bundles and their persistence: JSON, CSV, and SVG line charts.

A bundle is a plain dict (the JSON schema) so the service, the CLI, and the
tests all share one representation. CSV rounds numbers to 6 significant
digits; JSON keeps full precision. Timestamps are confined to a single
metadata field so deterministic re-runs stay byte-comparable.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

from . import __version__

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "topology",
    "aggregation",
    "attack",
    "fraction",
    "round",
    "client_id",
    "role",
    "loss",
    "accuracy",
    "macro_f1",
    "mean_benign_f1",
)


def new_bundle(config: dict, timestamp: bool = True) -> dict:
    """Empty results bundle carrying the resolved config for provenance."""
    created = datetime.now(timezone.utc).isoformat() if timestamp else None
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "dflsim", "version": __version__},
        "meta": {"created_at": created},
        "config": config,
        "runs": [],
    }


def add_run(bundle: dict, run: dict) -> None:
    """Append one run result (the service's run-result payload)."""
    bundle["runs"].append(run)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def to_csv(bundle: dict) -> str:
    """Render the bundle as CSV: per-round client rows plus one summary row
    per run. Provenance lives in leading comment lines."""
    lines = [
        f"# dflsim-version: {bundle['tool']['version']}",
        f"# schema-version: {bundle['schema_version']}",
        f"# created-at: {bundle['meta'].get('created_at') or ''}",
        f"# config: {json.dumps(bundle['config'], separators=(',', ':'), sort_keys=True)}",
        ",".join(CSV_COLUMNS),
    ]
    for run in bundle["runs"]:
        prefix = [
            run["topology"],
            run["aggregation"],
            run["attack"],
            _fmt(float(run["malicious_fraction"])),
        ]
        for record in run.get("records", []):
            for client in record["clients"]:
                lines.append(
                    ",".join(
                        prefix
                        + [
                            str(record["round"]),
                            str(client["id"]),
                            client["role"],
                            _fmt(client["loss"]),
                            _fmt(client["accuracy"]),
                            _fmt(client["macro_f1"]),
                            _fmt(record["mean_benign_f1"]),
                        ]
                    )
                )
        summary = run.get("summary") or {}
        ok = run.get("status") == "ok"
        lines.append(
            ",".join(
                prefix
                + [
                    _fmt(summary.get("final_round")),
                    "",
                    "summary" if ok else "failed",
                    "",
                    "",
                    "",
                    _fmt(summary.get("mean_benign_f1")),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def to_json(bundle: dict) -> str:
    return json.dumps(bundle, indent=2) + "\n"


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_outputs(bundle: dict, out_dir, fmt: str = "csv") -> Path:
    """Write the bundle to ``out_dir`` in the requested format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out / "results.csv"
        path.write_text(to_csv(bundle))
    elif fmt == "json":
        path = out / "results.json"
        path.write_text(to_json(bundle))
    else:
        raise ValueError(f"unknown output format '{fmt}'")
    return path


# ---------------------------------------------------------------------------
# SVG line charts: final mean benign F1 vs malicious fraction, one series per
# attack, one file per (topology, aggregation) pair.

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 170, 50, 60


def _chart_points(runs: list[dict]) -> dict[str, list[tuple[float, float]]]:
    series: dict[str, list[tuple[float, float]]] = {}
    for run in runs:
        if run.get("status") != "ok" or not run.get("summary"):
            continue
        point = (float(run["malicious_fraction"]), float(run["summary"]["mean_benign_f1"]))
        series.setdefault(run["attack"], []).append(point)
    for points in series.values():
        points.sort()
    return series


def _svg_chart(topo: str, agg: str, series: dict[str, list[tuple[float, float]]], provenance: str) -> str:
    xs = [x for pts in series.values() for x, _ in pts]
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_min, x_max = x_min - 0.05, x_max + 0.05
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def px(x: float) -> float:
        return _LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return _TOP + (1.0 - y) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f"<metadata>{escape(provenance)}</metadata>",
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2}" y="24" text-anchor="middle" font-size="15" font-family="sans-serif">'
        f"Benign F1 vs malicious fraction ({escape(topo)}, {escape(agg)})</text>",
        f'<line x1="{_LEFT}" y1="{py(0)}" x2="{_LEFT + plot_w}" y2="{py(0)}" stroke="black"/>',
        f'<line x1="{_LEFT}" y1="{py(0)}" x2="{_LEFT}" y2="{py(1)}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(tick)
        parts.append(f'<line x1="{_LEFT - 4}" y1="{y}" x2="{_LEFT}" y2="{y}" stroke="black"/>')
        parts.append(
            f'<text x="{_LEFT - 8}" y="{y + 4}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{tick:g}</text>'
        )
    for x in sorted(set(xs)):
        parts.append(
            f'<line x1="{px(x)}" y1="{py(0)}" x2="{px(x)}" y2="{py(0) + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px(x)}" y="{py(0) + 18}" text-anchor="middle" font-size="11" '
            f'font-family="sans-serif">{x:g}</text>'
        )
    parts.append(
        f'<text x="{_LEFT + plot_w / 2}" y="{_HEIGHT - 16}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">malicious fraction</text>'
    )
    for i, (attack, points) in enumerate(sorted(series.items())):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
        parts.append(
            f'<polyline class="series" data-attack="{escape(attack)}" points="{coords}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in points:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = _TOP + 16 * i
        lx = _LEFT + plot_w + 14
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{lx + 24}" y="{ly + 4}" font-size="12" font-family="sans-serif">'
            f"{escape(attack)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_charts(bundle: dict, out_dir) -> list[Path]:
    """One SVG per (topology, aggregation) pair; skipped when a pair has no
    completed runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list[dict]] = {}
    for run in bundle["runs"]:
        groups.setdefault((run["topology"], run["aggregation"]), []).append(run)
    provenance = json.dumps(
        {"tool": bundle["tool"], "config": bundle["config"]}, separators=(",", ":"), sort_keys=True
    )
    written = []
    for (topo, agg), runs in sorted(groups.items()):
        series = _chart_points(runs)
        if not series:
            continue
        path = out / f"chart_{topo}_{agg}.svg"
        path.write_text(_svg_chart(topo, agg, series, provenance))
        written.append(path)
    return written
