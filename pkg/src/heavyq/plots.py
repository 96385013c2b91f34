"""Figure rendering for the CLI report paths.

Each renderer takes the same row dicts that back a report's CSV output and
writes a PNG next to it.  Rendering is opt-in (``--plot``); the CSV stays the
canonical, byte-stable artifact, so figures favour readability over styling
and strip writer metadata from the PNG.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

_SAVE_OPTS = {"dpi": 120, "metadata": {"Software": None}}


def _png_path(csv_path: str) -> str:
    root = csv_path[:-4] if csv_path.lower().endswith(".csv") else csv_path
    return root + ".png"


def plot_curve(rows: list[dict], csv_path: str) -> str:
    """Machine-count curves per QoS class over the sweep grid."""
    path = _png_path(csv_path)
    fig, ax = plt.subplots()
    sweep = rows[0]["sweep"] if rows else "rho"
    for cls in dict.fromkeys(r["class"] for r in rows):
        pts = [r for r in rows if r["class"] == cls]
        xs = [r["value"] for r in pts]
        ax.plot(xs, [r["n_hi"] for r in pts], marker="o", label=cls)
        if cls == "mwt":
            ax.plot(xs, [r["n_lo"] for r in pts], linestyle="--", label="mwt (lower)")
    ax.set_xlabel(sweep)
    ax.set_ylabel("machines")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path


def plot_validate(rows: list[dict], csv_path: str) -> str:
    """Predicted levels vs simulated estimates with 95% error bars."""
    path = _png_path(csv_path)
    fig, ax = plt.subplots()
    for tag in dict.fromkeys(r["bound"] for r in rows):
        pts = [r for r in rows if r["bound"] == tag]
        xs = [r["rho"] for r in pts]
        label = f"simulated ({tag})" if tag else "simulated"
        ax.errorbar(
            xs,
            [r["simulated"] for r in pts],
            yerr=[r["ci_halfwidth"] for r in pts],
            marker="o",
            capsize=3,
            label=label,
        )
        ax.plot(xs, [r["predicted"] for r in pts], linestyle="--", label="predicted")
    ax.set_xlabel("rho")
    ax.set_ylabel("probability")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path


def plot_ratio(rows: list[dict], csv_path: str) -> str:
    """Bound-tightness ratio r1 against k, one line per alpha."""
    path = _png_path(csv_path)
    fig, ax = plt.subplots()
    for alpha in dict.fromkeys(r["alpha"] for r in rows):
        pts = [r for r in rows if r["alpha"] == alpha]
        ax.plot([r["k"] for r in pts], [r["r1"] for r in pts], marker="o", label=f"alpha={alpha:g}")
    ax.set_xlabel("k")
    ax.set_ylabel("r1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path
