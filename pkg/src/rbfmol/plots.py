"""SVG rendering of already-written run outputs.

Nothing here computes; every figure is drawn from the CSV files that
:mod:`rbfmol.experiments` emitted. One figure per kind: eigenvalue scatter,
cumulative time against accepted step count, and max error against time.
Several runs are overlaid with one legend entry each.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["emit_plots", "find_run_dirs", "plot_errors", "plot_spectra", "plot_steps"]

log = logging.getLogger(__name__)


def _load(path: Path):
    data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
    return data if data.size else None


def _finish(fig, ax, out, empty: bool, n_series: int):
    if empty:
        ax.text(0.5, 0.5, "no data", transform=ax.transAxes, ha="center", va="center")
    elif n_series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out


def plot_spectra(csv_paths, labels, out):
    """Eigenvalues in the complex plane, one marker per eigenvalue."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    n = 0
    for p, lab in zip(csv_paths, labels):
        d = _load(p)
        if d is None:
            continue
        ax.scatter(d["re"], d["im"], s=6, label=lab)
        n += 1
    ax.axvline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    return _finish(fig, ax, out, n == 0, n)


def plot_steps(csv_paths, labels, out):
    """Current time against the number of accepted steps."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    n = 0
    for p, lab in zip(csv_paths, labels):
        d = _load(p)
        if d is None:
            continue
        ax.plot(d["step_index"], d["t"], label=lab)
        n += 1
    ax.set_xlabel("accepted steps")
    ax.set_ylabel("t")
    return _finish(fig, ax, out, n == 0, n)


def plot_errors(csv_paths, labels, out):
    """Max error over the evaluation cloud against time (log scale)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    n = 0
    for p, lab in zip(csv_paths, labels):
        d = _load(p)
        if d is None:
            continue
        ax.semilogy(d["t"], d["linf_err"], marker="o", ms=3, label=lab)
        n += 1
    ax.set_xlabel("t")
    ax.set_ylabel("max error")
    return _finish(fig, ax, out, n == 0, n)


def find_run_dirs(root) -> list:
    """Run directories (those holding ``report.json``) under ``root``, sorted."""
    root = Path(root)
    return sorted({p.parent for p in root.rglob("report.json")})


def emit_plots(run_dirs, out_dir) -> list:
    """Write ``spectra.svg``, ``steps.svg`` and ``errors.svg`` into ``out_dir``.

    Rendering problems are logged and skipped. Returns the written paths.
    """
    run_dirs = [Path(d) for d in run_dirs]
    out_dir = Path(out_dir)
    written = []
    for name, fname, fn in (("spectra", "spectrum.csv", plot_spectra),
                            ("steps", "steps.csv", plot_steps),
                            ("errors", "errors.csv", plot_errors)):
        found = [d / fname for d in run_dirs if (d / fname).exists()]
        labels = [p.parent.name for p in found]
        try:
            written.append(fn(found, labels, out_dir / f"{name}.svg"))
        except Exception as exc:  # a broken figure should not sink the run
            log.warning("could not render %s: %s", name, exc)
    return written
