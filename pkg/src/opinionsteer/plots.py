"""SVG line plots of trajectories."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .dynamics import Trajectory  # noqa: E402


def write_trajectory_svg(traj: Trajectory, path: str,
                         show_targets: bool = False,
                         max_points: int = 4000) -> None:
    """Plot every opinion series; optionally overlay target levels.

    The grid is subsampled to at most ``max_points`` so the SVG stays small.
    """
    n = traj.states.shape[1]
    stride = max(1, len(traj.times) // max_points)
    t = traj.times[::stride]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i in range(n):
        ax.plot(t, traj.states[::stride, i], lw=1.0, label=f"x_{i + 1}")
    if show_targets:
        for level in sorted(set(traj.x_target.tolist())):
            ax.axhline(level, color="gray", lw=0.6, ls="--")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("opinion")
    ax.legend(ncol=4, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
