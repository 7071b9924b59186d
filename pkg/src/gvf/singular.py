"""Locating, refining, and classifying zeros of the guiding field.

Workflow: a coarse grid scan flags local minima of ||chi|| (in ambient
space for unconstrained scenarios, in a chart for constrained ones),
nearby cells merge into clusters, one seed per cluster is polished by a
damped Newton iteration on the tangential field components, and the
polished points are classified by the eigenvalues of the tangential
Jacobian.  An assumption audit checks the two premises the convergence
story rests on: singular points keep clear of the path, and the surface
error cannot collapse far away from the path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.linalg import null_space
from scipy import ndimage

from .field import SurfaceStack, field_components, field_value
from .manifold import ConstraintSystem

__all__ = [
    "GridSpec",
    "SingularScan",
    "SingularPoint",
    "NewtonDiverged",
    "LABEL_SOURCE",
    "LABEL_SINK",
    "LABEL_SADDLE",
    "LABEL_DEGENERATE",
    "scan",
    "refine",
    "classify",
    "tangent_basis",
    "find_singular_points",
    "check_assumptions",
]

LABEL_SOURCE = "Source"
LABEL_SINK = "Sink"
LABEL_SADDLE = "Saddle"
LABEL_DEGENERATE = "Degenerate"

SEED_TOL_FACTOR = 1e-2     # seeds must sit below this times the median grid ||chi||
CLUSTER_RADIUS = 2         # Chebyshev distance (in cells) merged into one cluster
REFINE_TOL = 1e-10
EIGEN_ZERO_BAND = 1e-6
CLASSIFY_FD_STEP = 1e-5
CLASSIFY_FD_CHECK = 1e-4


class NewtonDiverged(RuntimeError):
    """Seed polishing failed; the seed is reported unrefined."""


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned evaluation grid: (lo, hi, n) per axis, inclusive ends."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self) -> None:
        for lo, hi, n in self.axes:
            if n < 2 or hi <= lo:
                raise ValueError(f"bad grid axis ({lo}, {hi}, {n})")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for _, _, n in self.axes)

    def linspaces(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in self.axes]

    def points(self) -> np.ndarray:
        """All grid nodes, shape (prod(shape), ndim), C order."""
        mesh = np.meshgrid(*self.linspaces(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class SingularScan:
    seeds: np.ndarray            # (s, m) ambient seed points, one per cluster
    seed_norms: np.ndarray       # (s,) ||chi|| at the seeds
    clusters: list[np.ndarray]   # per cluster, the ambient points of its flagged cells
    norms: np.ndarray            # full ||chi|| grid, shape grid.shape
    grid: GridSpec
    seed_tol: float


@dataclass
class SingularPoint:
    x: np.ndarray
    chi_norm: float
    eigen_real_parts: np.ndarray   # descending, length = tangent dimension
    label: str
    dist_to_path: float
    refined: bool
    label_check: str = ""          # classification at the coarser FD step

    def as_report_dict(self) -> dict:
        return {
            "x": self.x,
            "chi_norm": self.chi_norm,
            "eigen_real_parts": self.eigen_real_parts,
            "label": self.label,
            "dist_to_path": self.dist_to_path,
            "refined": self.refined,
        }


def scan(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    grid: GridSpec,
    to_ambient=None,
) -> SingularScan:
    """Grid scan for candidate field zeros.

    to_ambient maps chart grid points to ambient coordinates for
    constrained scenarios; identity when omitted.  Cells are flagged
    when they are (weak) local minima of ||chi|| over their full
    neighbor ring and fall below SEED_TOL_FACTOR times the median grid
    magnitude; flagged cells within CLUSTER_RADIUS cells of each other
    merge, and the smallest-magnitude cell of each cluster becomes the
    seed.
    """
    pts = grid.points()
    amb = np.asarray(to_ambient(pts), dtype=float) if to_ambient is not None else pts
    with np.errstate(over="ignore", invalid="ignore"):
        chi = field_value(constraints, surfaces, amb)
        norms = np.linalg.norm(chi, axis=-1).reshape(grid.shape)
    finite = np.isfinite(norms)
    med = float(np.median(norms[finite])) if np.any(finite) else 0.0
    seed_tol = SEED_TOL_FACTOR * med

    neighborhood_min = ndimage.minimum_filter(
        np.where(finite, norms, np.inf), size=3, mode="nearest"
    )
    mask = finite & (norms <= neighborhood_min) & (norms <= seed_tol)

    seeds, seed_norms, clusters = [], [], []
    if np.any(mask):
        # dilating by one cell bridges minima up to CLUSTER_RADIUS cells apart
        structure = np.ones((3,) * grid.ndim, dtype=bool)
        grown = ndimage.binary_dilation(
            mask, structure=structure, iterations=CLUSTER_RADIUS - 1
        )
        labels, n_lab = ndimage.label(grown, structure=structure)
        amb_grid = amb.reshape(grid.shape + (amb.shape[-1],))
        for lab in range(1, n_lab + 1):
            cells = mask & (labels == lab)
            if not np.any(cells):
                continue
            cluster_pts = amb_grid[cells]
            vals = norms[cells]
            best = int(np.argmin(vals))
            seeds.append(cluster_pts[best])
            seed_norms.append(float(vals[best]))
            clusters.append(cluster_pts)
    return SingularScan(
        seeds=np.array(seeds).reshape(-1, amb.shape[-1]),
        seed_norms=np.array(seed_norms),
        clusters=clusters,
        norms=norms,
        grid=grid,
        seed_tol=seed_tol,
    )


def tangent_basis(constraints: ConstraintSystem, x: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker J(x) as columns, shape (m, m - k)."""
    m = constraints.ambient_dim
    if constraints.k == 0:
        return np.eye(m)
    J = np.atleast_2d(constraints.jacobian(x))
    T = null_space(J)
    if T.shape != (m, m - constraints.k):
        raise ValueError(
            f"tangent space dimension {T.shape[1]} != {m - constraints.k}, "
            "constraints degenerate here"
        )
    return T


def refine(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x0: np.ndarray,
    tol: float = REFINE_TOL,
    max_iter: int = 60,
) -> np.ndarray:
    """Polish a seed to a field zero on the manifold by damped Newton.

    Solves r(x) = 0 with r stacking the tangential field components
    (basis frozen per outer iteration) over the constraint residuals.
    Raises NewtonDiverged when the backtracking stalls or the iteration
    budget runs out.
    """
    x = np.array(np.asarray(x0, dtype=float), copy=True)
    m = constraints.ambient_dim

    for _ in range(max_iter):
        T = tangent_basis(constraints, x)

        def resid(y: np.ndarray) -> np.ndarray:
            top = T.T @ field_value(constraints, surfaces, y)
            if constraints.k:
                return np.concatenate([top, constraints.values(y) - constraints.target])
            return top

        r = resid(x)
        if not np.all(np.isfinite(r)):
            raise NewtonDiverged(f"non-finite residual near {x}")
        if np.max(np.abs(r)) <= tol:
            return x

        h = 1e-7 * max(1.0, float(np.max(np.abs(x))))
        Jr = np.empty((m, m))
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            Jr[:, j] = (resid(x + e) - resid(x - e)) / (2.0 * h)
        try:
            delta = np.linalg.solve(Jr, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"singular Newton system near {x}") from exc

        base = float(np.linalg.norm(r))
        alpha = 1.0
        while alpha >= 1e-6:
            trial = x + alpha * delta
            rt = resid(trial)
            if np.all(np.isfinite(rt)) and np.linalg.norm(rt) < (1.0 - 1e-4 * alpha) * base:
                x = trial
                break
            alpha *= 0.5
        else:
            raise NewtonDiverged(f"backtracking stalled near {x}")
    raise NewtonDiverged(f"no convergence in {max_iter} iterations from {x0}")


def _label_from_reals(reals: np.ndarray, band: float) -> str:
    if np.any(np.abs(reals) <= band):
        return LABEL_DEGENERATE
    pos, neg = np.any(reals > band), np.any(reals < -band)
    if pos and neg:
        return LABEL_SADDLE
    return LABEL_SOURCE if pos else LABEL_SINK


def _tangential_jacobian(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x: np.ndarray,
    T: np.ndarray,
    h: float,
) -> np.ndarray:
    """T^T (d chi / d tangent directions) by central differences on the manifold."""
    d = T.shape[1]
    A = np.empty((d, d))
    for j in range(d):
        xp = constraints.retract(x + h * T[:, j])
        xm = constraints.retract(x - h * T[:, j])
        dchi = (
            field_value(constraints, surfaces, xp)
            - field_value(constraints, surfaces, xm)
        ) / (2.0 * h)
        A[:, j] = T.T @ dchi
    return A


def classify(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x: np.ndarray,
    fd_step: float = CLASSIFY_FD_STEP,
    check_step: float = CLASSIFY_FD_CHECK,
) -> tuple[np.ndarray, str, str]:
    """Eigenvalue classification of a field zero.

    Returns (real parts descending, label at fd_step, label at
    check_step).  Labels: Source / Sink / Saddle by the signs of the
    real parts of the tangential Jacobian spectrum, Degenerate when any
    real part sits inside the zero band.
    """
    x = np.asarray(x, dtype=float)
    T = tangent_basis(constraints, x)
    A = _tangential_jacobian(constraints, surfaces, x, T, fd_step)
    reals = np.sort(np.linalg.eigvals(A).real)[::-1]
    label = _label_from_reals(reals, EIGEN_ZERO_BAND)
    A2 = _tangential_jacobian(constraints, surfaces, x, T, check_step)
    reals2 = np.sort(np.linalg.eigvals(A2).real)[::-1]
    label2 = _label_from_reals(reals2, EIGEN_ZERO_BAND)
    return reals, label, label2


def _dedupe(points: list[np.ndarray], tol: float = 1e-6) -> list[int]:
    """Indices of representatives, first occurrence wins."""
    keep: list[int] = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p - points[j]) > tol for j in keep):
            keep.append(i)
    return keep


def find_singular_points(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    grid: GridSpec,
    to_ambient=None,
    path_samples: np.ndarray | None = None,
) -> tuple[list[SingularPoint], SingularScan]:
    """Scan, refine, classify, and deduplicate field zeros on the grid."""
    sc = scan(constraints, surfaces, grid, to_ambient)
    raw: list[tuple[np.ndarray, bool]] = []
    for s in sc.seeds:
        try:
            raw.append((refine(constraints, surfaces, s), True))
        except NewtonDiverged:
            raw.append((np.asarray(s, dtype=float), False))

    refined_pts = [p for p, _ in raw]
    keep = _dedupe(refined_pts) if refined_pts else []
    tree = None
    if path_samples is not None and len(path_samples):
        from scipy.spatial import cKDTree

        tree = cKDTree(np.asarray(path_samples, dtype=float))

    out: list[SingularPoint] = []
    for i in keep:
        p, ok = raw[i]
        with np.errstate(over="ignore", invalid="ignore"):
            cn = float(np.linalg.norm(field_value(constraints, surfaces, p)))
        try:
            reals, label, label2 = classify(constraints, surfaces, p)
        except Exception:
            reals = np.full(constraints.ambient_dim - constraints.k, np.nan)
            label = label2 = LABEL_DEGENERATE
        dist = float(tree.query(p)[0]) if tree is not None else float("nan")
        out.append(
            SingularPoint(
                x=p, chi_norm=cn, eigen_real_parts=reals, label=label,
                dist_to_path=dist, refined=ok, label_check=label2,
            )
        )
    out.sort(key=lambda sp: tuple(np.round(sp.x, 9)))
    return out, sc


def check_assumptions(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    singular_points: list[SingularPoint],
    sample_points: np.ndarray,
    path_samples: np.ndarray,
    path_tol: float = 1e-3,
    floor_tol: float = 1e-4,
    clearances: tuple[float, ...] = (0.5, 0.75, 1.0),
) -> list[dict]:
    """Audit the convergence premises; returns a list of findings.

    Premise 1: every field zero keeps distance > path_tol from the path.
    Premise 2: at every sampled clearance from the path the surface
    error norm stays above floor_tol (otherwise level sets of the error
    sneak arbitrarily close to zero far from the path and error size
    stops certifying closeness).
    """
    findings: list[dict] = []
    for sp in singular_points:
        if np.isfinite(sp.dist_to_path) and sp.dist_to_path <= path_tol:
            findings.append(
                {
                    "assumption": "singular_clearance",
                    "detail": "field zero within path_tol of the path",
                    "x": sp.x,
                    "dist_to_path": sp.dist_to_path,
                    "tol": path_tol,
                }
            )

    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    finite = np.all(np.isfinite(pts), axis=-1)
    pts = pts[finite]
    if len(path_samples) and len(pts):
        tree = cKDTree(np.asarray(path_samples, dtype=float))
        dist, _ = tree.query(pts)
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.linalg.norm(surfaces.errors(pts), axis=-1)
        good = np.isfinite(e)
        for kappa in clearances:
            far = good & (dist >= kappa)
            if not np.any(far):
                continue
            floor = float(np.min(e[far]))
            if floor < floor_tol:
                worst = pts[far][int(np.argmin(e[far]))]
                findings.append(
                    {
                        "assumption": "error_floor",
                        "detail": "surface error collapses far from the path",
                        "clearance": kappa,
                        "min_e_norm": floor,
                        "tol": floor_tol,
                        "x": worst,
                    }
                )
                break
    return findings
