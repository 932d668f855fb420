"""Figures: loss curve, SR/SPL bars and per-episode trajectory renders."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .world import CELL_SIZE, cell_center  # noqa: E402

plt.rcParams["svg.hashsalt"] = "cosearch"
_META = {"svg": {"Date": None}, "png": {"Software": None}}


def _save(fig, path):
    fmt = str(path).rsplit(".", 1)[-1].lower()
    fig.savefig(path, metadata=_META.get(fmt), format=fmt)
    plt.close(fig)


def plot_loss(history, path):
    epochs = [h[0] for h in history]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(epochs, [h[1] for h in history], lw=1.2, label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("binary cross-entropy")
    ax2 = ax.twinx()
    ax2.plot(epochs, [h[2] for h in history], lw=0.8, color="tab:orange", label="batch accuracy")
    ax2.set_ylim(0, 1.02)
    ax2.set_ylabel("batch accuracy")
    fig.tight_layout()
    _save(fig, path)


def plot_summary(summary, path):
    names = [r["policy"] for r in summary]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([i - 0.2 for i in x], [r["sr"] for r in summary], width=0.4, label="SR")
    ax.bar([i + 0.2 for i in x], [r["spl"] for r in summary], width=0.4, label="SPL")
    ax.set_xticks(list(x), names)
    ax.set_ylim(0, 1.05)
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def render_world(world, path, cells=(), detections=(), title=None):
    """Grid, furniture, objects, robot path and detection events."""
    W, H = world.width * CELL_SIZE, world.height * CELL_SIZE
    fig, ax = plt.subplots(figsize=(5, 5 * H / W))
    for c, r in sorted(world.walls):
        ax.add_patch(Rectangle((c * CELL_SIZE, r * CELL_SIZE), CELL_SIZE, CELL_SIZE, color="0.25", lw=0))
    for s in world.stationary:
        for c, r in s.footprint:
            ax.add_patch(Rectangle((c * CELL_SIZE, r * CELL_SIZE), CELL_SIZE, CELL_SIZE,
                                   color="tan" if s.receptacle else "0.7", lw=0))
        ax.annotate(s.name, s.position, fontsize=5, ha="center", va="center")
    for m in world.movable:
        colour = "red" if m.name == world.target else "tab:blue"
        ax.plot(*m.position, "o", ms=3, color=colour)
        ax.annotate(m.name, m.position, fontsize=4, xytext=(2, 2), textcoords="offset points", color=colour)
    if cells:
        pts = [cell_center(c) for c in cells]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "-", lw=0.8, color="green")
        ax.plot(*pts[0], "s", ms=4, color="green")
        ax.plot(*pts[-1], "*", ms=6, color="green")
    for t, pos in detections:
        ax.plot(*pos, "x", ms=3, color="purple")
    ax.set_xlim(0, W)
    ax.set_ylim(0, H)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=7)
    fig.tight_layout()
    _save(fig, path)
