"""Deterministic SVG convergence plots."""

from __future__ import annotations

import json

import numpy as np


def _label(method: str, level: float) -> str:
    name, _, rest = method.partition(" ")
    base = "Mirror Descent" if name == "mirror_descent" else f"zoSPA {level:g}% noise"
    return f"{base} {rest}".strip()


def plot_aggregate(agg, path, title: str = "", x_axis: str = "iteration", provenance=None) -> None:
    """Mean gap against iterations (or oracle calls), log-y, one curve per method and noise level.

    ``agg`` holds rows ``(method, noise_pct, iteration, oracle_calls, mean, min, max, seeds)``.
    The SVG carries no timestamp and a fixed id salt, so equal inputs give equal files.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = {}
    for method, level, it, calls, mean, lo, hi, _ in agg:
        curves.setdefault((method, float(level)), []).append((it if x_axis == "iteration" else calls, mean, lo, hi))
    with matplotlib.rc_context({"svg.hashsalt": "zospa", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for (method, level), pts in sorted(curves.items(), key=lambda kv: (kv[0][0].startswith("mirror"), kv[0][1], kv[0][0])):
            pts = np.array(sorted(pts))
            pos = pts[:, 1] > 0
            style = "--" if method.startswith("mirror_descent") else "-"
            ax.plot(pts[pos, 0], pts[pos, 1], style, label=_label(method, level))
            if np.any(pts[:, 2] != pts[:, 3]):
                lo = np.where(pts[:, 2] > 0, pts[:, 2], np.nan)
                ax.fill_between(pts[:, 0], lo, pts[:, 3], alpha=0.15)
        ax.set_yscale("log")
        ax.set_xlabel("iterations" if x_axis == "iteration" else "oracle calls")
        ax.set_ylabel("saddle gap")
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    if provenance is not None:
        _inject_comment(path, json.dumps(provenance, sort_keys=True))


def _inject_comment(path, text: str) -> None:
    with open(path, encoding="utf-8") as fh:
        svg = fh.read()
    text = text.replace("--", "- -")
    at = svg.find("<svg")
    svg = svg[:at] + f"<!-- provenance: {text} -->\n" + svg[at:]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)


def plot_traces(trace_path, out_path=None, x_axis: str = "iteration", title: str = "") -> str:
    """Aggregate a traces CSV and plot it next to the input (or at ``out_path``)."""
    from .cli_runner import aggregate, read_traces

    rows = read_traces(trace_path)
    out_path = out_path or str(trace_path).rsplit(".", 1)[0] + ".svg"
    plot_aggregate(aggregate(rows), out_path, title=title, x_axis=x_axis,
                   provenance={"source": str(trace_path).replace("\\", "/").split("/")[-1]})
    return out_path
