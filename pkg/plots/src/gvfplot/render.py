"""Figure renderers over the gvf CLI's output files.

Five figure kinds: ``stream2d`` (field arrows + path + singular points),
``traj3d`` (a 3D trajectory), ``errors`` (error norms against time),
``torus`` (a 2-angle trajectory mapped onto a torus surface), ``frames``
(oriented frames of a rotation trajectory at chosen times).

Rendering is read-only over its inputs and writes no timestamps, so the
same input bytes give the same image bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    SchemaError,
    load_components,
    load_field,
    load_path,
    load_singular,
    load_trajectory,
    read_table,
)

__all__ = ["KINDS", "PlotJob", "render"]

KINDS = ("stream2d", "traj3d", "errors", "torus", "frames")

# colors keyed by the classifier's labels (strings are the cross-package contract)
LABEL_COLORS = {
    "Source": "tab:red",
    "Sink": "tab:green",
    "Saddle": "tab:blue",
    "Degenerate": "tab:gray",
}

FRAME_TIMES_DEFAULT = (0.0, 1.4, 4.1, 6.9, 9.6)


@dataclass(frozen=True)
class PlotJob:
    """One figure request: a kind, its input files, and style options."""

    kind: str
    inputs: tuple[str, ...]
    out: str
    stride: int = 1
    times: tuple[float, ...] = ()
    dpi: int = 110
    title: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("no input files given")
        if self.stride < 1:
            raise SchemaError("stride must be >= 1")


def _classify(paths: tuple[str, ...]) -> dict:
    """Sort input files into roles by their own schema, not their names."""
    roles: dict[str, object] = {}

    def put(role, value, path):
        if role in roles:
            raise SchemaError(f"{path}: a {role} input was already given")
        roles[role] = value

    for path in paths:
        if path.endswith(".json"):
            put("singular", load_singular(path), path)
            continue
        header, _ = read_table(path)
        if "t" in header and "abs_phi_0" in header:
            put("components", load_components(path), path)
        elif "t" in header and "x_0" in header:
            put("trajectory", load_trajectory(path), path)
        elif "chi_0" in header:
            put("field", load_field(path), path)
        elif "x_0" in header:
            put("path", load_path(path), path)
        else:
            raise SchemaError(f"{path}: header matches no documented schema")
    return roles


def _need(roles: dict, role: str, kind: str):
    if role not in roles:
        raise SchemaError(f"figure kind {kind!r} needs a {role} input file")
    return roles[role]


def _finish(fig, job: PlotJob) -> None:
    kwargs = {"dpi": job.dpi}
    if job.out.endswith(".svg"):
        kwargs["metadata"] = {"Date": None}  # keep reruns byte-identical
    fig.savefig(job.out, **kwargs)
    plt.close(fig)


def _wrap(a: np.ndarray) -> np.ndarray:
    """Wrap angles to [-pi, pi) (duplicated here: no core import by design)."""
    return np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


def _stream2d(job: PlotJob, roles: dict) -> dict:
    fld = _need(roles, "field", job.kind)
    X, chi = fld["X"], fld["chi"]
    if X.shape[1] != 2:
        raise SchemaError(f"stream2d needs a 2D field file, got {X.shape[1]} coordinates")
    s = slice(None, None, job.stride)
    fig, ax = plt.subplots(figsize=(6.4, 6.0))
    mag = np.linalg.norm(chi, axis=-1)
    unit = chi / np.maximum(mag, 1e-300)[:, None]
    ax.quiver(
        X[s, 0], X[s, 1], unit[s, 0], unit[s, 1], mag[s],
        cmap="viridis", angles="xy", width=0.0022, alpha=0.75,
    )

    n_path = 0
    if "path" in roles:
        P = roles["path"]
        if P.shape[1] != 2:
            raise SchemaError("path samples are not 2D")
        order = np.argsort(np.arctan2(P[:, 1] - P[:, 1].mean(), P[:, 0] - P[:, 0].mean()))
        ax.plot(P[order, 0], P[order, 1], color="black", lw=1.6, label="desired path")
        n_path = len(P)

    n_marked = 0
    if "singular" in roles:
        seen = set()
        for sp in roles["singular"]:
            color = LABEL_COLORS.get(sp["label"], "tab:purple")
            ax.plot(
                sp["x"][0], sp["x"][1], "o", ms=9, mec="black", mfc=color,
                label=None if sp["label"] in seen else sp["label"],
            )
            seen.add(sp["label"])
            n_marked += 1

    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.set_title(job.title or "field directions")
    if n_path or n_marked:
        ax.legend(loc="upper right", fontsize=8)
    _finish(fig, job)
    return {"n_arrows": int(len(X[s])), "n_path_points": n_path, "n_singular_marked": n_marked}


def _traj3d(job: PlotJob, roles: dict) -> dict:
    traj = _need(roles, "trajectory", job.kind)
    X = traj["X"]
    if X.shape[1] != 3:
        raise SchemaError(f"traj3d needs a 3D trajectory, got {X.shape[1]} coordinates")
    s = slice(None, None, job.stride)
    fig = plt.figure(figsize=(6.4, 5.6))
    ax = fig.add_subplot(projection="3d")
    ax.plot(X[s, 0], X[s, 1], X[s, 2], color="tab:blue", lw=1.2, label="trajectory")
    if "path" in roles:
        P = roles["path"]
        if P.shape[1] != 3:
            raise SchemaError("path samples are not 3D")
        ax.plot(P[:, 0], P[:, 1], P[:, 2], color="black", lw=1.0, label="desired path")
    ax.plot([X[0, 0]], [X[0, 1]], [X[0, 2]], "o", color="tab:green", label="start")
    ax.plot([X[-1, 0]], [X[-1, 1]], [X[-1, 2]], "s", color="tab:red", label="end")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.set_title(job.title or "trajectory")
    ax.legend(fontsize=8)
    _finish(fig, job)
    return {"n_points": int(len(X[s]))}


def _errors(job: PlotJob, roles: dict) -> dict:
    traj = _need(roles, "trajectory", job.kind)
    fig, ax = plt.subplots(figsize=(6.8, 4.2))
    floor = 1e-300
    ax.semilogy(traj["t"], np.maximum(traj["e_norm"], floor), lw=1.6, label="|e|")
    n_curves = 1
    if "components" in roles:
        comp = roles["components"]
        for i in range(comp["abs_phi"].shape[1]):
            ax.semilogy(
                comp["t"], np.maximum(comp["abs_phi"][:, i], floor),
                lw=1.0, ls="--", label=f"|phi_{i}|",
            )
            n_curves += 1
    ax.set_xlabel("t")
    ax.set_ylabel("error norm")
    ax.set_title(job.title or "path-following error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, job)
    return {"n_curves": n_curves, "t_final": float(traj["t"][-1])}


def _torus(job: PlotJob, roles: dict) -> dict:
    traj = _need(roles, "trajectory", job.kind)
    X = traj["X"]
    if X.shape[1] != 2:
        raise SchemaError(f"torus needs a 2-angle trajectory, got {X.shape[1]} coordinates")
    R, r = 2.0, 0.75

    def embed(t1, t2):
        return (
            (R + r * np.cos(t2)) * np.cos(t1),
            (R + r * np.cos(t2)) * np.sin(t1),
            r * np.sin(t2),
        )

    fig = plt.figure(figsize=(6.4, 5.6))
    ax = fig.add_subplot(projection="3d")
    g1, g2 = np.meshgrid(
        np.linspace(-np.pi, np.pi, 60), np.linspace(-np.pi, np.pi, 30)
    )
    ax.plot_surface(*embed(g1, g2), color="lightgray", alpha=0.25, linewidth=0)

    s = slice(None, None, job.stride)
    # the covering-space trajectory projects through the periodic embedding
    ax.plot(*embed(X[s, 0], X[s, 1]), color="tab:blue", lw=1.6, label="trajectory")
    ax.plot(*[[v] for v in embed(X[0, 0], X[0, 1])], "o", color="tab:green", label="start")
    ax.plot(*[[v] for v in embed(X[-1, 0], X[-1, 1])], "s", color="tab:red", label="end")
    ax.set_box_aspect((1, 1, 0.45))
    ax.set_axis_off()
    ax.set_title(job.title or "trajectory on the torus")
    ax.legend(fontsize=8)
    _finish(fig, job)
    final = _wrap(X[-1]).tolist()
    return {"n_points": int(len(X[s])), "final_angles_wrapped": final}


_CUBE_VERTS = 0.5 * np.array(
    [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
)
_CUBE_EDGES = [
    (a, b)
    for a in range(8)
    for b in range(a + 1, 8)
    if np.sum(np.abs(_CUBE_VERTS[a] - _CUBE_VERTS[b]) > 1e-12) == 1
]


def _frames(job: PlotJob, roles: dict) -> dict:
    traj = _need(roles, "trajectory", job.kind)
    X, t = traj["X"], traj["t"]
    if X.shape[1] != 9:
        raise SchemaError(f"frames needs a 9-component rotation trajectory, got {X.shape[1]}")
    times = tuple(job.times) if job.times else FRAME_TIMES_DEFAULT

    fig = plt.figure(figsize=(2.2 * len(times) + 1.2, 3.4))
    ax = fig.add_subplot(projection="3d")
    used = []
    for i, tau in enumerate(times):
        idx = int(np.argmin(np.abs(t - tau)))
        used.append(float(t[idx]))
        # states are column-stacked rotations: x[3j + i] = A[i, j]
        A = X[idx].reshape(3, 3, order="F")
        offset = np.array([2.2 * i, 0.0, 0.0])
        V = _CUBE_VERTS @ A.T + offset
        for a, b in _CUBE_EDGES:
            ax.plot(*np.stack([V[a], V[b]], axis=-1), color="dimgray", lw=0.9)
        for axis, color in enumerate(("tab:red", "tab:green", "tab:blue")):
            tip = offset + 0.9 * A[:, axis]
            ax.plot(*np.stack([offset, tip], axis=-1), color=color, lw=2.0)
        ax.text(offset[0], offset[1], -1.25, f"t={tau:g}", ha="center", fontsize=8)

    ax.set_box_aspect((len(times), 1, 1))
    ax.set_axis_off()
    ax.set_title(job.title or "frame snapshots")
    _finish(fig, job)
    return {"n_frames": len(times), "times_requested": list(times), "times_used": used}


_RENDERERS = {
    "stream2d": _stream2d,
    "traj3d": _traj3d,
    "errors": _errors,
    "torus": _torus,
    "frames": _frames,
}


def render(job: PlotJob) -> dict:
    """Render one figure, returning a small summary of what was drawn."""
    roles = _classify(job.inputs)
    summary = _RENDERERS[job.kind](job, roles)
    summary["kind"] = job.kind
    summary["out"] = job.out
    return summary
