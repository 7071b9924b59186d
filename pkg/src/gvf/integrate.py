"""Batched RK4 flow of the guiding field with manifold retraction.

Every trajectory gets a verdict:

- PathConverging: surface error norm stayed below tol_path for a full
  dwell window.
- SingularConverging: field magnitude stayed below tol_singular for a
  full dwell window while the error norm stayed above tol_path.
- Diverged: the state left the escape radius.
- NumericFailure: non-finite values or a failed retraction.
- Inconclusive: the horizon ran out first.

A per-step Lyapunov audit tracks the largest relative increase of
V = sum gain_i phi_i^2 ever observed; the exact flow never increases V,
so the audit bounds the integration error in energy terms.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .field import SurfaceStack, field_components, lyapunov, validate_dimensions
from .manifold import ConstraintSystem, RankDeficient, RetractionDiverged

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "BatchResult",
    "VERDICT_PATH",
    "VERDICT_SINGULAR",
    "VERDICT_INCONCLUSIVE",
    "VERDICT_DIVERGED",
    "VERDICT_NUMERIC",
    "step",
    "integrate",
    "batch",
    "audit_distance",
    "write_trajectory_csv",
    "write_meta_json",
]

VERDICT_PATH = "PathConverging"
VERDICT_SINGULAR = "SingularConverging"
VERDICT_INCONCLUSIVE = "Inconclusive"
VERDICT_DIVERGED = "Diverged"
VERDICT_NUMERIC = "NumericFailure"

_CODES = {
    1: VERDICT_PATH,
    2: VERDICT_SINGULAR,
    3: VERDICT_INCONCLUSIVE,
    4: VERDICT_DIVERGED,
    5: VERDICT_NUMERIC,
}


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 200.0
    tol_path: float = 1e-3
    tol_singular: float = 1e-6
    dwell_time: float = 1.0
    escape_radius: float = 1e6
    retract_every: int = 1
    record_stride: int = 10

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError(f"dt and t_max must be positive, got {self.dt}, {self.t_max}")
        if self.retract_every < 1 or self.record_stride < 1:
            raise ValueError("retract_every and record_stride must be >= 1")


@dataclass
class Trajectory:
    """One integrated run with its retained samples and verdict."""

    times: np.ndarray       # (T,)
    states: np.ndarray      # (T, m)
    e_norms: np.ndarray     # (T,)
    lyapunov: np.ndarray    # (T,)
    chi_norms: np.ndarray   # (T,)
    residuals: np.ndarray   # (T,)
    verdict: str
    t_final: float
    x_final: np.ndarray
    n_steps: int
    audit_max_growth: float
    config: IntegratorConfig


@dataclass
class BatchResult:
    """Verdict-level summary for a batch of seeds (no retained samples)."""

    verdicts: list[str]
    t_final: np.ndarray           # (N,)
    x_final: np.ndarray           # (N, m)
    e_norm_final: np.ndarray      # (N,)
    chi_norm_final: np.ndarray    # (N,)
    audit_max_growth: np.ndarray  # (N,)
    n_steps: np.ndarray           # (N,)
    config: IntegratorConfig

    def count(self, verdict: str) -> int:
        return sum(1 for v in self.verdicts if v == verdict)


def _safe_retract(constraints: ConstraintSystem, x: np.ndarray):
    """Retract a batch, isolating failures per row instead of raising."""
    if constraints.k == 0:
        return x, np.ones(x.shape[:-1], dtype=bool)
    try:
        return constraints.retract(x), np.ones(x.shape[:-1], dtype=bool)
    except (RankDeficient, RetractionDiverged, np.linalg.LinAlgError):
        out = np.array(x, copy=True)
        ok = np.zeros(x.shape[0], dtype=bool)
        for i in range(x.shape[0]):
            try:
                out[i] = constraints.retract(x[i])
                ok[i] = True
            except (RankDeficient, RetractionDiverged, np.linalg.LinAlgError):
                ok[i] = False
        return out, ok


def step(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x: np.ndarray,
    dt: float,
    retract: bool = True,
) -> np.ndarray:
    """One RK4 step with per-stage retraction, shape-preserving."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    k1 = field_components(constraints, surfaces, xb).chi
    x2, _ = _safe_retract(constraints, xb + 0.5 * dt * k1)
    k2 = field_components(constraints, surfaces, x2).chi
    x3, _ = _safe_retract(constraints, xb + 0.5 * dt * k2)
    k3 = field_components(constraints, surfaces, x3).chi
    x4, _ = _safe_retract(constraints, xb + dt * k3)
    k4 = field_components(constraints, surfaces, x4).chi
    out = xb + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if retract:
        out, _ = _safe_retract(constraints, out)
    return out[0] if single else out


def _run(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x0s: np.ndarray,
    cfg: IntegratorConfig,
    record: bool,
):
    """Shared engine: advances every seed until verdict or horizon.

    Returns a dict of per-seed outputs plus, when record is set, the
    retained sample arrays.
    """
    validate_dimensions(constraints, surfaces)
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    N, m = x0s.shape
    if m != constraints.ambient_dim:
        raise ValueError(f"seed dimension {m} != ambient dimension {constraints.ambient_dim}")

    dt = cfg.dt
    steps_total = int(round(cfg.t_max / dt))
    dwell_slack = 1e-9

    x = constraints.retract(x0s) if constraints.k else np.array(x0s, copy=True)
    codes = np.zeros(N, dtype=np.int8)
    t_fin = np.full(N, cfg.t_max)
    x_fin = np.array(x, copy=True)
    e_fin = np.full(N, np.nan)
    chi_fin = np.full(N, np.nan)
    steps_fin = np.full(N, steps_total, dtype=np.int64)
    path_dwell = np.zeros(N)
    sing_dwell = np.zeros(N)
    audit_max = np.full(N, -np.inf)
    V_prev = np.full(N, np.nan)

    stride = cfg.record_stride
    if record:
        cap = steps_total // stride + 3
        R_t = np.zeros((N, cap))
        R_x = np.zeros((N, cap, m))
        R_e = np.zeros((N, cap))
        R_V = np.zeros((N, cap))
        R_c = np.zeros((N, cap))
        R_r = np.zeros((N, cap))
        R_n = np.zeros(N, dtype=np.int64)

        def rec(idx, t, xs, es, Vs, cs, rs):
            if idx.size == 0:
                return
            n = R_n[idx]
            fresh = (n == 0) | (R_t[idx, np.maximum(n - 1, 0)] != t)
            if not np.all(fresh):
                idx, n = idx[fresh], n[fresh]
                xs, es, Vs, cs, rs = (a[fresh] for a in (xs, es, Vs, cs, rs))
                if idx.size == 0:
                    return
            R_t[idx, n] = t
            R_x[idx, n] = xs
            R_e[idx, n] = es
            R_V[idx, n] = Vs
            R_c[idx, n] = cs
            R_r[idx, n] = rs
            R_n[idx] += 1
    else:
        def rec(idx, t, xs, es, Vs, cs, rs):  # noqa: ARG001
            return

    active = np.arange(N)
    step_i = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while active.size and step_i < steps_total:
            t = step_i * dt
            xa = x[active]
            parts = field_components(constraints, surfaces, xa)
            chi = parts.chi
            e_norm = np.linalg.norm(parts.errors, axis=-1)
            chi_norm = np.linalg.norm(chi, axis=-1)
            V = lyapunov(surfaces, parts.errors)
            if step_i == 0:
                V_prev[active] = V
            if step_i % stride == 0:
                rec(active, t, xa, e_norm, V, chi_norm, constraints.residual(xa))

            on_path = e_norm <= cfg.tol_path
            near_sing = (chi_norm <= cfg.tol_singular) & ~on_path
            path_dwell[active] = np.where(on_path, path_dwell[active] + dt, 0.0)
            sing_dwell[active] = np.where(near_sing, sing_dwell[active] + dt, 0.0)
            hit_path = path_dwell[active] >= cfg.dwell_time - dwell_slack
            hit_sing = sing_dwell[active] >= cfg.dwell_time - dwell_slack
            done = hit_path | hit_sing
            if np.any(done):
                idx = active[done]
                codes[idx] = np.where(hit_path[done], 1, 2)
                t_fin[idx] = t
                x_fin[idx] = xa[done]
                e_fin[idx] = e_norm[done]
                chi_fin[idx] = chi_norm[done]
                steps_fin[idx] = step_i
                rec(idx, t, xa[done], e_norm[done], V[done],
                    chi_norm[done], constraints.residual(xa[done]))
                keep = ~done
                active = active[keep]
                if active.size == 0:
                    break
                xa, chi = xa[keep], chi[keep]
                e_norm, chi_norm, V = e_norm[keep], chi_norm[keep], V[keep]

            # RK4 with per-stage retraction (stage 1 reuses the on-manifold state)
            k1 = chi
            x2, ok2 = _safe_retract(constraints, xa + 0.5 * dt * k1)
            k2 = field_components(constraints, surfaces, x2).chi
            x3, ok3 = _safe_retract(constraints, xa + 0.5 * dt * k2)
            k3 = field_components(constraints, surfaces, x3).chi
            x4, ok4 = _safe_retract(constraints, xa + dt * k3)
            k4 = field_components(constraints, surfaces, x4).chi
            x_new = xa + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ok = ok2 & ok3 & ok4
            if constraints.k and (step_i + 1) % cfg.retract_every == 0:
                x_new, okf = _safe_retract(constraints, x_new)
                ok &= okf
            ok &= np.all(np.isfinite(x_new), axis=-1)

            if not np.all(ok):
                idx = active[~ok]
                codes[idx] = 5
                t_fin[idx] = t
                x_fin[idx] = xa[~ok]          # last finite state
                e_fin[idx] = e_norm[~ok]
                chi_fin[idx] = chi_norm[~ok]
                steps_fin[idx] = step_i
                rec(idx, t, xa[~ok], e_norm[~ok], V[~ok],
                    chi_norm[~ok], constraints.residual(xa[~ok]))
                active = active[ok]
                if active.size == 0:
                    break
                xa, x_new, V = xa[ok], x_new[ok], V[ok]

            errs_new = surfaces.errors(x_new)
            e_new = np.linalg.norm(errs_new, axis=-1)
            V_new = lyapunov(surfaces, errs_new)
            r_new = np.linalg.norm(x_new, axis=-1)
            div = r_new > cfg.escape_radius
            if np.any(div):
                idx = active[div]
                codes[idx] = 4
                t_fin[idx] = t + dt
                x_fin[idx] = x_new[div]
                e_fin[idx] = e_new[div]
                chi_fin[idx] = np.nan
                steps_fin[idx] = step_i + 1
                rec(idx, t + dt, x_new[div], e_new[div], V_new[div],
                    np.full(int(np.sum(div)), np.nan),
                    constraints.residual(x_new[div]))
                keep = ~div
                active = active[keep]
                if active.size == 0:
                    break
                x_new, e_new, V_new = x_new[keep], e_new[keep], V_new[keep]

            growth = (V_new - V_prev[active]) / (1.0 + V_prev[active])
            audit_max[active] = np.maximum(audit_max[active], growth)
            V_prev[active] = V_new
            x[active] = x_new
            step_i += 1

        # horizon exhausted: whatever is still active stays Inconclusive
        if active.size:
            t = step_i * dt
            xa = x[active]
            parts = field_components(constraints, surfaces, xa)
            e_norm = np.linalg.norm(parts.errors, axis=-1)
            chi_norm = np.linalg.norm(parts.chi, axis=-1)
            codes[active] = 3
            t_fin[active] = t
            x_fin[active] = xa
            e_fin[active] = e_norm
            chi_fin[active] = chi_norm
            steps_fin[active] = step_i
            rec(active, t, xa, e_norm, lyapunov(surfaces, parts.errors),
                chi_norm, constraints.residual(xa))

    audit_max[~np.isfinite(audit_max)] = 0.0
    out = {
        "codes": codes,
        "t_final": t_fin,
        "x_final": x_fin,
        "e_norm_final": e_fin,
        "chi_norm_final": chi_fin,
        "audit_max_growth": audit_max,
        "n_steps": steps_fin,
    }
    if record:
        out["records"] = (R_t, R_x, R_e, R_V, R_c, R_r, R_n)
    return out


def integrate(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x0: np.ndarray,
    cfg: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate a single seed, retaining samples every record_stride steps."""
    cfg = cfg or IntegratorConfig()
    res = _run(constraints, surfaces, np.asarray(x0, dtype=float), cfg, record=True)
    R_t, R_x, R_e, R_V, R_c, R_r, R_n = res["records"]
    n = int(R_n[0])
    return Trajectory(
        times=R_t[0, :n].copy(),
        states=R_x[0, :n].copy(),
        e_norms=R_e[0, :n].copy(),
        lyapunov=R_V[0, :n].copy(),
        chi_norms=R_c[0, :n].copy(),
        residuals=R_r[0, :n].copy(),
        verdict=_CODES[int(res["codes"][0])],
        t_final=float(res["t_final"][0]),
        x_final=res["x_final"][0].copy(),
        n_steps=int(res["n_steps"][0]),
        audit_max_growth=float(res["audit_max_growth"][0]),
        config=cfg,
    )


def _thread_count() -> int:
    raw = os.environ.get("GVF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def batch(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x0s: np.ndarray,
    cfg: IntegratorConfig | None = None,
) -> BatchResult:
    """Integrate many seeds at once; verdicts only, no retained samples.

    Seeds are advanced in lockstep as one vectorized batch; GVF_THREADS
    (default 1) splits them into contiguous chunks run on a thread pool,
    reassembled in seed order so results are independent of thread count.
    """
    cfg = cfg or IntegratorConfig()
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    threads = min(_thread_count(), x0s.shape[0])
    if threads <= 1:
        chunks = [_run(constraints, surfaces, x0s, cfg, record=False)]
    else:
        bounds = np.array_split(np.arange(x0s.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_run, constraints, surfaces, x0s[b], cfg, False)
                for b in bounds if b.size
            ]
            chunks = [f.result() for f in futs]

    def cat(key):
        return np.concatenate([c[key] for c in chunks], axis=0)

    return BatchResult(
        verdicts=[_CODES[int(c)] for c in cat("codes")],
        t_final=cat("t_final"),
        x_final=cat("x_final"),
        e_norm_final=cat("e_norm_final"),
        chi_norm_final=cat("chi_norm_final"),
        audit_max_growth=cat("audit_max_growth"),
        n_steps=cat("n_steps"),
        config=cfg,
    )


def audit_distance(states: np.ndarray, path_samples: np.ndarray) -> np.ndarray:
    """Distance from each state to the nearest path sample, shape (T,).

    Sample-based, so it over-estimates the true distance by at most the
    sampling resolution of path_samples.
    """
    from scipy.spatial import cKDTree

    states = np.atleast_2d(np.asarray(states, dtype=float))
    tree = cKDTree(np.asarray(path_samples, dtype=float))
    d, _ = tree.query(states)
    return d


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """Retained samples as CSV: t,x_0..x_{m-1},e_norm,V,chi_norm,residual."""
    m = traj.states.shape[1]
    cols = ["t"] + [f"x_{j}" for j in range(m)] + ["e_norm", "V", "chi_norm", "residual"]
    lines = [",".join(cols)]
    for i in range(traj.times.shape[0]):
        row = [_fmt(traj.times[i])]
        row += [_fmt(v) for v in traj.states[i]]
        row += [_fmt(traj.e_norms[i]), _fmt(traj.lyapunov[i]),
                _fmt(traj.chi_norms[i]), _fmt(traj.residuals[i])]
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def jsonable(obj):
    """Recursively convert numpy containers for json.dumps."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_meta_json(
    path: str,
    scenario_name: str,
    traj: Trajectory,
    x0: np.ndarray,
    extra: dict | None = None,
) -> None:
    """Sidecar metadata for a trajectory CSV."""
    meta = {
        "scenario": scenario_name,
        "config": asdict(traj.config),
        "verdict": traj.verdict,
        "x0": np.asarray(x0, dtype=float),
        "x_final": traj.x_final,
        "t_final": traj.t_final,
        "n_steps": traj.n_steps,
        "n_samples": int(traj.times.shape[0]),
        "e_norm_final": float(traj.e_norms[-1]) if traj.times.size else None,
        "audit_max_growth": traj.audit_max_growth,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(jsonable(meta), indent=2, sort_keys=True) + "\n")
