"""Deterministic figures for run reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def curvature_trace(records: list, path, target: float | None = None) -> None:
    """Total curvature (in units of pi) per exhaustion step."""
    n = [rec["n"] for rec in records]
    k = [rec["total_curvature"] / math.pi for rec in records]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(n, k, "o-", color="tab:blue", label="measured")
    if target is not None:
        ax.axhline(target / math.pi, color="0.4", ls="--", lw=1, label="target")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("cap n")
    ax.set_ylabel(r"$\int K\ /\ \pi$")
    ax.legend(frameon=False)
    _save(fig, path)


def convergence(records: list, probe_diffs: list, path) -> None:
    """Newton residual and probe-set differences per step."""
    steps = [rec["step"] for rec in records]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(steps, [max(rec["newton_residual"], 1e-300) for rec in records], "s-", label="Newton residual")
    if probe_diffs:
        ax.semilogy(steps[1:len(probe_diffs) + 1], probe_diffs, "o-", label="probe difference")
    ax.set_xlabel("step")
    ax.legend(frameon=False)
    _save(fig, path)
