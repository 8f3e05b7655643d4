"""Report JSON, trajectory CSV and SVG path plots."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .framework import sensing_topology
from .henneberg import validate_signed_henneberg
from .rigidity import classify
from .scenario import ScenarioFile
from .simulation import (
    Trajectory,
    ambiguity_metrics,
    centroid_drift,
    energy_increase,
    tail_decay_slope,
)


class OutputError(OSError):
    pass


def analysis_report(sf: ScenarioFile) -> dict:
    """Classification at the reference (or given) positions plus the Henneberg certificate."""
    fw = sf.framework
    where = "positions"
    if sf.reference is not None:
        fw = fw.with_positions(sf.reference)
        where = "reference"
    g = fw.graph
    return {
        "name": sf.name,
        "version": sf.version,
        "framework": fw.to_spec(),
        "constraint_counts": {"edges": g.m_d, "angles": g.m_a,
                              "signed_angles": g.m_s, "signed_volumes": g.m_v},
        "sensing_topology": [[i + 1, j + 1] for i, j in sensing_topology(g)],
        "classified_at": where,
        "classification": [classify(fw, k).to_dict() for k in sf.kinds],
        "henneberg": validate_signed_henneberg(fw).to_dict(),
    }


def simulation_report(sf: ScenarioFile, traj: Trajectory) -> dict:
    metrics = ambiguity_metrics(traj, sf.targets, sf.reference)
    return {
        "controller": traj.controller.value,
        "status": traj.status.value,
        "samples": len(traj),
        "final_time": float(traj.times[-1]),
        "initial_error_norm": float(traj.error_norms[0]),
        "final_error_norm": float(traj.error_norms[-1]),
        "max_energy_increase": energy_increase(traj),
        "tail_log_error_slope": tail_decay_slope(traj),
        "centroid_drift": centroid_drift(traj),
        "integrator": {"method": "rk4", "step": sf.integrator.step, "horizon": sf.integrator.horizon},
        "stop_tolerance": sf.stop_tolerance,
        "targets": sf.targets.to_dict(),
        "initial_positions": traj.positions[0].tolist(),
        "final_positions": traj.positions[-1].tolist(),
        "ambiguity": metrics.to_dict(),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(report: dict, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_jsonable(report), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from None
    return path


def write_csv(traj: Trajectory, path) -> Path:
    """One row per agent per sample: ``t,agent,x,y[,z],err_norm`` (agents 1-based)."""
    path = Path(path)
    d = traj.positions.shape[2]
    header = ["t", "agent", "x", "y", "z"][: 2 + d] + ["err_norm"]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, P, _, en in traj.samples:
                for a, x in enumerate(P):
                    w.writerow([repr(float(t)), a + 1, *(repr(float(c)) for c in x), repr(float(en))])
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from None
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def _plot(traj: Trajectory, axes: tuple[int, int], path: Path, title: str) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = "xyz"
    X = traj.positions
    with matplotlib.rc_context({"svg.hashsalt": "formation", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        for a in range(X.shape[1]):
            xs, ys = X[:, a, axes[0]], X[:, a, axes[1]]
            (line,) = ax.plot(xs, ys, lw=1.2)
            line.set_gid(f"trajectory-{a + 1}")
            c = line.get_color()
            ax.plot(xs[:1], ys[:1], "o", ms=4, color=c, gid=f"start-{a + 1}")
            ax.plot(xs[-1:], ys[-1:], "s", ms=8, mfc="none", mec=c, mew=1.5, gid=f"end-{a + 1}")
            ax.annotate(str(a + 1), (xs[-1], ys[-1]), textcoords="offset points", xytext=(6, 6), fontsize=8)
        ax.set_xlabel(names[axes[0]])
        ax.set_ylabel(names[axes[1]])
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title(title, fontsize=9)
        ax.grid(alpha=0.3)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OutputError(f"{path}: {exc.strerror or exc}") from None
        finally:
            plt.close(fig)
    return path


def write_svg(traj: Trajectory, path, title: str = "") -> list[Path]:
    """Agent paths with round start markers and square end markers.

    3D runs produce ``<stem>_xy.svg`` and ``<stem>_xz.svg``.
    """
    path = Path(path)
    if traj.positions.shape[2] == 2:
        return [_plot(traj, (0, 1), path, title)]
    stem = path.with_suffix("")
    return [_plot(traj, (0, 1), Path(f"{stem}_xy.svg"), title + " (xy)"),
            _plot(traj, (0, 2), Path(f"{stem}_xz.svg"), title + " (xz)")]


def output_paths(sf: ScenarioFile, out_dir=None) -> dict:
    base = Path(out_dir) if out_dir is not None else Path(".")
    paths = {
        "report": sf.outputs.get("report", f"{sf.name}_report.json"),
        "csv": sf.outputs.get("csv", f"{sf.name}_trajectory.csv"),
        "svg": sf.outputs.get("svg", f"{sf.name}_paths.svg"),
    }
    return {k: base / v if out_dir is not None and not os.path.isabs(v) else Path(v)
            for k, v in paths.items()}


def emit_outputs(report: dict, trajectory: Trajectory | None, paths: dict, title: str = "") -> list[Path]:
    """Write the report, and for simulations also the CSV and SVG files."""
    written = [write_json(report, paths["report"])]
    if trajectory is not None:
        written.append(write_csv(trajectory, paths["csv"]))
        written.extend(write_svg(trajectory, paths["svg"], title))
    return written
