"""Figure rendering for the report path.

Every simulate/sweep/stability run that writes delimited output also renders a
matplotlib figure next to it, and emits a small standalone script that
regenerates the figure from the CSV alone (no library import needed).
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_trajectory(traj, title: str, png_path: str) -> None:
    n = traj.q.shape[1]
    m = traj.u.shape[1]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0, 0]
    if n >= 2:
        ax.plot(traj.q[:, 0], traj.q[:, 1], lw=0.8)
        ax.set_xlabel("q1")
        ax.set_ylabel("q2")
    else:
        ax.plot(traj.t, traj.q[:, 0], lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("q1")
    ax.set_title("configuration path")

    ax = axes[0, 1]
    for i in range(n):
        ax.plot(traj.t, traj.q[:, i], lw=0.8, label=f"q{i+1}")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("coordinates")

    ax = axes[1, 0]
    for a in range(m):
        ax.plot(traj.t, traj.u[:, a], lw=0.8, label=f"u{a+1}")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("control inputs")

    ax = axes[1, 1]
    ax.plot(traj.t, traj.E, lw=0.8, label="E")
    ax.plot(traj.t, traj.E_Lf, lw=0.8, label="E_Lf")
    ax2 = ax.twinx()
    ax2.plot(traj.t, -traj.phi, lw=0.8, color="tab:red", label="margin")
    ax2.set_ylabel("boundary margin", color="tab:red")
    ax.set_xlabel("t")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("energies / margin")

    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)


def render_sweep(rows, x_key: str, png_path: str, y_keys=("min_margin", "status_code")) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs = [float(r[x_key]) for r in rows]
    for key in y_keys:
        if all(key in r for r in rows):
            ax.plot(xs, [float(r[key]) for r in rows], "o-", label=key)
    ax.set_xlabel(x_key)
    ax.legend(loc="best", fontsize=8)
    ax.set_title("sweep summary")
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)


def render_spectrum(eigenvalues, title: str, png_path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ev = np.asarray(eigenvalues)
    ax.axhline(0.0, color="0.8", lw=0.8)
    ax.axvline(0.0, color="0.8", lw=0.8)
    ax.plot(ev.real, ev.imag, "x", ms=9, mew=2)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)


_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Regenerate the run figure from {csv_name} (standalone; stdlib + matplotlib)."""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv_name!r})))
t = [float(r["t"]) for r in rows]
ncoord = {n}
nctrl = {m}
fig, axes = plt.subplots(2, 2, figsize=(10, 7))
q = [[float(r[f"q{{i+1}}"]) for r in rows] for i in range(ncoord)]
if ncoord >= 2:
    axes[0, 0].plot(q[0], q[1], lw=0.8)
    axes[0, 0].set_xlabel("q1"); axes[0, 0].set_ylabel("q2")
else:
    axes[0, 0].plot(t, q[0], lw=0.8)
axes[0, 0].set_title("configuration path")
for i in range(ncoord):
    axes[0, 1].plot(t, q[i], lw=0.8, label=f"q{{i+1}}")
axes[0, 1].legend(fontsize=8); axes[0, 1].set_title("coordinates")
for a in range(nctrl):
    axes[1, 0].plot(t, [float(r[f"u{{a+1}}"]) for r in rows], lw=0.8, label=f"u{{a+1}}")
axes[1, 0].legend(fontsize=8); axes[1, 0].set_title("control inputs")
axes[1, 1].plot(t, [float(r["E"]) for r in rows], lw=0.8, label="E")
axes[1, 1].plot(t, [float(r["E_Lf"]) for r in rows], lw=0.8, label="E_Lf")
axes[1, 1].plot(t, [-float(r["phi"]) for r in rows], lw=0.8, label="margin")
axes[1, 1].legend(fontsize=8); axes[1, 1].set_title("energies / margin")
fig.tight_layout()
fig.savefig({png_name!r}, dpi=130)
print("wrote", {png_name!r})
'''


def emit_plot_script(csv_path: str, script_path: str, n: int, m: int) -> None:
    csv_name = os.path.basename(csv_path)
    png_name = os.path.splitext(csv_name)[0] + "_replot.png"
    with open(script_path, "w") as fh:
        fh.write(_PLOT_SCRIPT.format(csv_name=csv_name, png_name=png_name, n=n, m=m))
