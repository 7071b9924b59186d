"""Built-in scenarios: manifold + surfaces + scan boxes + path samplers.

Each scenario bundles everything the CLI and the test batteries need to
exercise one geometry end to end.  User scenarios with polynomial data
load from JSON via :func:`from_json`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .field import SurfaceStack, validate_dimensions
from .integrate import IntegratorConfig
from .manifold import ConstraintSystem
from .poly import Polynomial
from .singular import GridSpec

__all__ = [
    "Scenario",
    "SCENARIOS",
    "scenario_names",
    "get_scenario",
    "scenario_config",
    "from_json",
    "rot_x",
    "rot_y",
    "rot_z",
    "rotation_to_state",
    "state_to_rotation",
    "random_rotations",
    "wrap_angle",
]

LINE_EXTENT = 260.0
LINE_SAMPLES = 1 << 16
LOOP_SAMPLES = 4096


@dataclass(frozen=True)
class Scenario:
    """One ready-to-run geometry."""

    name: str
    constraints: ConstraintSystem
    surfaces: SurfaceStack
    scan_grid: GridSpec
    chart_to_ambient: object = None          # chart points -> ambient, for k > 0 scans
    path_sampler: object = None              # (n or None) -> (N, m) points on the path
    random_points: object = None             # (rng, n) -> (n, m) on-manifold samples
    probe_candidates: object = None          # (R) -> (c, m) targeted boundary seeds
    starts: tuple = ()
    config_overrides: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self) -> None:
        validate_dimensions(self.constraints, self.surfaces)

    @property
    def ambient_dim(self) -> int:
        return self.constraints.ambient_dim

    @property
    def tangent_dim(self) -> int:
        return self.constraints.ambient_dim - self.constraints.k

    @property
    def hypothesis_note(self) -> str | None:
        if self.tangent_dim < 3:
            return (
                "[2D] workspace dimension minus constraints is below 3; "
                "far-field escape analysis does not apply"
            )
        return None

    def path_points(self, n: int | None = None) -> np.ndarray:
        if self.path_sampler is None:
            raise ValueError(f"scenario {self.name} has no path sampler")
        return np.asarray(self.path_sampler(n), dtype=float)


def scenario_config(scenario: Scenario, base: IntegratorConfig | None = None, **overrides):
    """Merge scenario defaults and explicit overrides into a config."""
    cfg = base or IntegratorConfig()
    merged = dict(scenario.config_overrides)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return replace(cfg, **merged) if merged else cfg


# ---------------------------------------------------------------------------
# rotation helpers (states are column-stacked 3x3 matrices: x[3j + i] = A[i, j])

def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_to_state(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return A.reshape(A.shape[:-2] + (9,), order="F") if A.ndim == 2 else \
        np.concatenate([A[..., :, 0], A[..., :, 1], A[..., :, 2]], axis=-1)


def state_to_rotation(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 0:3], x[..., 3:6], x[..., 6:9]], axis=-1)


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish uniform rotations from QR of Gaussian matrices, (n, 9) states."""
    G = rng.standard_normal((n, 3, 3))
    Q, R = np.linalg.qr(G)
    sign = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    sign[sign == 0] = 1.0
    Q = Q * sign[:, None, :]
    det = np.linalg.det(Q)
    Q[det < 0, :, 2] *= -1.0
    return rotation_to_state(Q)


def wrap_angle(a: np.ndarray) -> np.ndarray:
    """Wrap to [-pi, pi)."""
    return np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


def so3_membership(x: np.ndarray, tol: float = 1e-3) -> str | None:
    """Which zero set of the rotation targets a column-stacked state sits on.

    The two targets are the rotations whose third column is (0, 0, +-1).
    Returns "upright" for +1, "flipped" for -1, None if the state is not within
    ``tol`` of either set (measured by the off-axis part of the third column).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 9:
        raise ValueError("expected a 9-component rotation state")
    if float(np.hypot(x[..., 6], x[..., 7])) > tol:
        return None
    return "upright" if x[..., 8] > 0 else "flipped"


# ---------------------------------------------------------------------------
# scenario builders

def _poly2(terms) -> Polynomial:
    return Polynomial(tuple((float(c), tuple(e)) for c, e in terms))


def _box_sampler(lo: float, hi: float, dim: int):
    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(lo, hi, size=(n, dim))

    return sample


def _circle_like(name, phi, sampler, gains, scan, starts=(), notes=""):
    m = phi.nvars
    C = ConstraintSystem.unconstrained(m)
    S = SurfaceStack((phi,), (phi.gradient,), gains=np.atleast_1d(gains))
    return Scenario(
        name=name, constraints=C, surfaces=S, scan_grid=scan,
        path_sampler=sampler, random_points=_box_sampler(-3.0, 3.0, m),
        starts=starts, notes=notes,
    )


def _build_circle2d() -> Scenario:
    phi = _poly2([(1, (2, 0)), (1, (0, 2)), (-1, (0, 0))])

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    return _circle_like(
        "circle2d", phi, sampler, 1.0,
        GridSpec(((-3.0, 3.0, 61), (-3.0, 3.0, 61))),
        starts=((2.0, 0.5),),
        notes="unit circle in the plane, one quadratic surface",
    )


def _build_line2d() -> Scenario:
    phi = _poly2([(1, (0, 1))])

    def sampler(n=None):
        x = np.linspace(-LINE_EXTENT, LINE_EXTENT, n or LINE_SAMPLES)
        return np.stack([x, np.zeros_like(x)], axis=-1)

    return _circle_like(
        "line2d", phi, sampler, 1.0,
        GridSpec(((-3.0, 3.0, 61), (-3.0, 3.0, 61))),
        starts=((0.0, 1.5),),
        notes="horizontal axis in the plane, linear surface, no field zeros",
    )


def _build_ellipse2d() -> Scenario:
    phi = _poly2([(0.25, (2, 0)), (1, (0, 2)), (-1, (0, 0))])

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        return np.stack([2.0 * np.cos(t), np.sin(t)], axis=-1)

    return _circle_like(
        "ellipse2d", phi, sampler, 1.0,
        GridSpec(((-3.5, 3.5, 71), (-3.0, 3.0, 61))),
        starts=((3.0, 0.1),),
        notes="axis-ratio-2 ellipse; the center is an isolated field zero",
    )


CASSINI_A = 2.0
CASSINI_B = 2.1


def _build_cassini2d() -> Scenario:
    a2 = CASSINI_A**2
    const = CASSINI_A**4 - CASSINI_B**4
    phi = _poly2(
        [
            (1, (4, 0)), (2, (2, 2)), (1, (0, 4)),
            (-2.0 * a2, (2, 0)), (2.0 * a2, (0, 2)), (const, (0, 0)),
        ]
    )

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        # (r^2)^2 - 2 a^2 r^2 cos(2t) + (a^4 - b^4) = 0, quadratic in r^2
        c2 = np.cos(2.0 * t)
        r2 = a2 * c2 + np.sqrt(a2 * a2 * c2 * c2 - const)
        r = np.sqrt(r2)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    return _circle_like(
        "cassini2d", phi, sampler, 0.1,
        GridSpec(((-3.4, 3.4, 69), (-3.0, 3.0, 61))),
        starts=((2.5, 1.5),),
        notes="quartic oval with pinched waist; three isolated field zeros on the x axis",
    )


def _line3_sampler(n=None):
    x = np.linspace(-LINE_EXTENT, LINE_EXTENT, n or LINE_SAMPLES)
    z = np.zeros_like(x)
    return np.stack([x, z, z], axis=-1)


def _build_line3d_good() -> Scenario:
    p1 = _poly2([(1, (0, 1, 0))])
    p2 = _poly2([(1, (0, 0, 1))])
    C = ConstraintSystem.unconstrained(3)
    S = SurfaceStack((p1, p2), (p1.gradient, p2.gradient), gains=[1.0, 1.0])
    return Scenario(
        name="line3d_good", constraints=C, surfaces=S,
        scan_grid=GridSpec(((-2.0, 20.0, 45), (-2.0, 2.0, 17), (-2.0, 2.0, 17))),
        path_sampler=_line3_sampler, random_points=_box_sampler(-3.0, 3.0, 3),
        starts=((0.0, 1.0, 0.5),),
        notes="x axis in space cut by two coordinate planes; error norm equals distance",
    )


def _bad_surface_value(x: np.ndarray) -> np.ndarray:
    return x[..., 1] * np.exp(-x[..., 0])


def _bad_surface_grad(x: np.ndarray) -> np.ndarray:
    ex = np.exp(-x[..., 0])
    g = np.zeros_like(np.asarray(x, dtype=float))
    g[..., 0] = -x[..., 1] * ex
    g[..., 1] = ex
    return g


def _build_line3d_bad() -> Scenario:
    p2 = _poly2([(1, (0, 0, 1))])
    C = ConstraintSystem.unconstrained(3)
    S = SurfaceStack(
        (_bad_surface_value, p2), (_bad_surface_grad, p2.gradient), gains=[1.0, 1.0]
    )
    return Scenario(
        name="line3d_bad", constraints=C, surfaces=S,
        scan_grid=GridSpec(((-2.0, 20.0, 45), (-2.0, 2.0, 17), (-2.0, 2.0, 17))),
        path_sampler=_line3_sampler, random_points=_box_sampler(-3.0, 3.0, 3),
        starts=((0.0, 1.0, 0.5),),
        notes="same x axis but the first surface decays exponentially along it; "
        "small error stops implying closeness",
    )


def _build_tilted_circle3d() -> Scenario:
    p1 = _poly2(
        [(1, (2, 0, 0)), (0.5, (0, 2, 0)), (1, (0, 1, 1)), (0.5, (0, 0, 2)), (-1, (0, 0, 0))]
    )
    p2 = _poly2([(1, (0, 1, 0)), (-1, (0, 0, 1))])
    C = ConstraintSystem.unconstrained(3)
    S = SurfaceStack((p1, p2), (p1.gradient, p2.gradient), gains=[1.0, 1.0])

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        s = np.sin(t) / np.sqrt(2.0)
        return np.stack([np.cos(t), s, s], axis=-1)

    def candidates(R: float) -> np.ndarray:
        u = R / np.sqrt(2.0)
        return np.array([[0.0, u, -u], [0.0, -u, u]])

    return Scenario(
        name="tilted_circle3d", constraints=C, surfaces=S,
        scan_grid=GridSpec(((-2.0, 2.0, 41), (-2.0, 2.0, 41), (-2.0, 2.0, 41))),
        path_sampler=sampler, random_points=_box_sampler(-3.0, 3.0, 3),
        probe_candidates=candidates,
        starts=((1.5, 0.5, -0.5),),
        notes="circle on a tilted cylinder-plane intersection; the anti-diagonal "
        "line through the origin flows straight into the field zero",
    )


def _build_sphere_circle() -> Scenario:
    f1 = _poly2([(1, (2, 0, 0)), (1, (0, 2, 0)), (1, (0, 0, 2))])
    phi = _poly2([(1, (0, 0, 1))])
    C = ConstraintSystem(3, (f1,), (f1.gradient,), target=np.array([1.0]))
    S = SurfaceStack((phi,), (phi.gradient,), gains=[1.0])

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        return np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)

    def chart(pts: np.ndarray) -> np.ndarray:
        th, ps = pts[..., 0], pts[..., 1]
        st = np.sin(th)
        return np.stack([st * np.cos(ps), st * np.sin(ps), np.cos(th)], axis=-1)

    def rand(rng: np.random.Generator, n: int) -> np.ndarray:
        g = rng.standard_normal((n, 3))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def candidates(R: float) -> np.ndarray:
        return np.array([[0.0, 0.0, R], [0.0, 0.0, -R]])

    return Scenario(
        name="sphere_circle", constraints=C, surfaces=S,
        scan_grid=GridSpec(((0.0, np.pi, 61), (0.0, 2.0 * np.pi, 121))),
        chart_to_ambient=chart, path_sampler=sampler, random_points=rand,
        probe_candidates=candidates,
        starts=((0.0, 0.6, 0.8),),
        notes="equator of the unit sphere under one height surface; both poles "
        "are isolated field zeros",
    )


def _bump_profile(u: np.ndarray) -> np.ndarray:
    """e^{1/(1-u)} outside u > 1, hard zero otherwise (u = squared radius)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    outside = u > 1.0
    if np.any(outside):
        with np.errstate(over="ignore", divide="ignore"):
            val = np.exp(1.0 / (1.0 - u[outside]))
        out[outside] = np.where(np.isfinite(val), val, 0.0)
    return out


def _bump_value(x: np.ndarray) -> np.ndarray:
    u = x[..., 0] ** 2 + x[..., 1] ** 2
    return 4.0 - u * _bump_profile(u)


def _bump_grad(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = x[..., 0] ** 2 + x[..., 1] ** 2
    g = np.zeros_like(x)
    outside = u > 1.0
    if np.any(outside):
        uo = u[outside]
        with np.errstate(over="ignore", divide="ignore"):
            b = np.exp(1.0 / (1.0 - uo))
            slope = b * (1.0 + uo / (1.0 - uo) ** 2)
        slope = np.where(np.isfinite(slope), slope, 0.0)
        g[outside] = -2.0 * slope[..., None] * x[outside]
    return g


def _bump_path_radius() -> float:
    lo, hi = 1.5, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _bump_value(np.array([mid, 0.0])) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


BUMP_PATH_RADIUS = _bump_path_radius()


def _build_bump_disk() -> Scenario:
    C = ConstraintSystem.unconstrained(2)
    S = SurfaceStack((_bump_value,), (_bump_grad,), gains=[1.0])

    def sampler(n=None):
        t = np.linspace(0.0, 2.0 * np.pi, n or LOOP_SAMPLES, endpoint=False)
        return BUMP_PATH_RADIUS * np.stack([np.cos(t), np.sin(t)], axis=-1)

    return Scenario(
        name="bump_disk", constraints=C, surfaces=S,
        scan_grid=GridSpec(((-3.0, 3.0, 121), (-3.0, 3.0, 121))),
        path_sampler=sampler, random_points=_box_sampler(-3.0, 3.0, 2),
        starts=((2.5, 0.0),),
        notes="surface flat at 4 on the unit disk, so the whole disk is one "
        "filled region of field zeros around a circular path",
    )


def _build_torus_arm_lift() -> Scenario:
    phi = _poly2([(1, (1, 0)), (1, (0, 1)), (-np.pi / 2.0, (0, 0))])

    def sampler(n=None):
        t = np.linspace(-LINE_EXTENT, LINE_EXTENT, n or LINE_SAMPLES)
        return np.stack([t, np.pi / 2.0 - t], axis=-1)

    return _circle_like(
        "torus_arm_lift", phi, sampler, 1.0,
        GridSpec(((-np.pi, np.pi, 61), (-np.pi, np.pi, 61))),
        starts=((0.0, 0.0), (0.3 * np.pi, 0.0), (1.5 * np.pi, 0.5 * np.pi)),
        notes="two joint angles on the covering plane; the target line wraps "
        "onto a closed curve on the torus and the field never vanishes",
    )


def _so3_values(x: np.ndarray) -> np.ndarray:
    c1, c2, c3 = x[..., 0:3], x[..., 3:6], x[..., 6:9]
    dot = lambda a, b: np.einsum("...i,...i->...", a, b)  # noqa: E731
    return np.stack(
        [
            dot(c1, c2), dot(c1, c3), dot(c2, c3),
            dot(c1, c1) - 1.0, dot(c2, c2) - 1.0, dot(c3, c3) - 1.0,
        ],
        axis=-1,
    )


def _so3_jacobian(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    c1, c2, c3 = x[..., 0:3], x[..., 3:6], x[..., 6:9]
    J = np.zeros(x.shape[:-1] + (6, 9))
    J[..., 0, 0:3], J[..., 0, 3:6] = c2, c1
    J[..., 1, 0:3], J[..., 1, 6:9] = c3, c1
    J[..., 2, 3:6], J[..., 2, 6:9] = c3, c2
    J[..., 3, 0:3] = 2.0 * c1
    J[..., 4, 3:6] = 2.0 * c2
    J[..., 5, 6:9] = 2.0 * c3
    return J


def _so3_surface_values(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float)[..., 6:8]


def _so3_surface_grads(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros(x.shape[:-1] + (2, 9))
    g[..., 0, 6] = 1.0
    g[..., 1, 7] = 1.0
    return g


def _euler_zyz_to_state(pts: np.ndarray) -> np.ndarray:
    a, b, c = pts[..., 0], pts[..., 1], pts[..., 2]
    ca, sa, cb, sb, cc, sc = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(c), np.sin(c)
    A = np.empty(pts.shape[:-1] + (3, 3))
    A[..., 0, 0] = ca * cb * cc - sa * sc
    A[..., 0, 1] = -ca * cb * sc - sa * cc
    A[..., 0, 2] = ca * sb
    A[..., 1, 0] = sa * cb * cc + ca * sc
    A[..., 1, 1] = -sa * cb * sc + ca * cc
    A[..., 1, 2] = sa * sb
    A[..., 2, 0] = -sb * cc
    A[..., 2, 1] = sb * sc
    A[..., 2, 2] = cb
    return np.concatenate([A[..., :, 0], A[..., :, 1], A[..., :, 2]], axis=-1)


def _build_so3_path() -> Scenario:
    fns = tuple(
        (lambda x, j=j: _so3_values(x)[..., j]) for j in range(6)
    )
    grads = tuple(
        (lambda x, j=j: _so3_jacobian(x)[..., j, :]) for j in range(6)
    )
    C = ConstraintSystem(
        9, fns, grads, target=np.zeros(6),
        values_fused=_so3_values, jacobian_fused=_so3_jacobian,
    )
    s1 = lambda x: np.asarray(x, dtype=float)[..., 6]  # noqa: E731
    s2 = lambda x: np.asarray(x, dtype=float)[..., 7]  # noqa: E731
    g1 = lambda x: _so3_surface_grads(x)[..., 0, :]  # noqa: E731
    g2 = lambda x: _so3_surface_grads(x)[..., 1, :]  # noqa: E731
    S = SurfaceStack(
        (s1, s2), (g1, g2), gains=[1.0, 1.0],
        values_fused=_so3_surface_values, gradients_fused=_so3_surface_grads,
    )

    def sampler(n=None):
        half = (n or LOOP_SAMPLES) // 2
        t = np.linspace(0.0, 2.0 * np.pi, half, endpoint=False)
        c, s = np.cos(t), np.sin(t)
        z = np.zeros_like(t)
        one = np.ones_like(t)
        # rotations about the vertical axis: third column (0, 0, 1)
        up = np.stack([c, s, z, -s, c, z, z, z, one], axis=-1)
        # the same family flipped by a half-turn about the first axis
        down = np.stack([c, -s, z, -s, -c, z, z, z, -one], axis=-1)
        return np.concatenate([up, down], axis=0)

    def rand(rng: np.random.Generator, n: int) -> np.ndarray:
        return random_rotations(rng, n)

    return Scenario(
        name="so3_path", constraints=C, surfaces=S,
        scan_grid=GridSpec(
            ((0.0, 2.0 * np.pi, 17), (0.0, np.pi, 9), (0.0, 2.0 * np.pi, 17))
        ),
        chart_to_ambient=_euler_zyz_to_state,
        path_sampler=sampler, random_points=rand,
        starts=(tuple(rotation_to_state(rot_x(np.pi / 4.0) @ rot_y(-np.pi / 4.0))),),
        config_overrides={"dt": 5e-3},
        notes="rotation matrices as 9 column-stacked coordinates under the six "
        "orthonormality constraints; the path pins the third column vertical",
    )


def _builders():
    return {
        "circle2d": _build_circle2d,
        "line2d": _build_line2d,
        "ellipse2d": _build_ellipse2d,
        "cassini2d": _build_cassini2d,
        "line3d_good": _build_line3d_good,
        "line3d_bad": _build_line3d_bad,
        "tilted_circle3d": _build_tilted_circle3d,
        "sphere_circle": _build_sphere_circle,
        "bump_disk": _build_bump_disk,
        "torus_arm_lift": _build_torus_arm_lift,
        "so3_path": _build_so3_path,
    }


SCENARIOS: dict[str, Scenario] = {name: make() for name, make in _builders().items()}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}, available: {', '.join(SCENARIOS)}"
        ) from None


# ---------------------------------------------------------------------------
# user scenarios from JSON

def _poly_from_spec(spec, m: int, what: str) -> Polynomial:
    if not isinstance(spec, dict) or "terms" not in spec:
        raise ValueError(f"{what}: expected an object with a 'terms' list")
    terms = []
    for i, entry in enumerate(spec["terms"]):
        try:
            coeff, exps = entry
            exps = tuple(int(e) for e in exps)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{what}: bad term #{i}: {entry!r}") from exc
        if len(exps) != m or any(e < 0 for e in exps):
            raise ValueError(f"{what}: term #{i} exponents {exps} do not fit dim {m}")
        terms.append((float(coeff), exps))
    return Polynomial(tuple(terms))


def from_json(source) -> Scenario:
    """Build a Scenario from a JSON file path, JSON string, or dict.

    Schema: name, ambient_dim, surfaces (list of {"terms": [[coeff,
    [exponents]], ...]} or the string "bump"), gains, scan_box (list of
    [lo, hi, n] per axis), and optionally constraints (same polynomial
    objects), regular_value, starts.
    """
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text) as fh:
                data = json.load(fh)

    try:
        name = str(data["name"])
        m = int(data["ambient_dim"])
        surf_specs = data["surfaces"]
        gains = [float(g) for g in data["gains"]]
        box = data["scan_box"]
    except KeyError as exc:
        raise ValueError(f"scenario JSON missing required key {exc}") from None

    cons_specs = data.get("constraints", [])
    target = [float(v) for v in data.get("regular_value", [0.0] * len(cons_specs))]
    if len(target) != len(cons_specs):
        raise ValueError(
            f"regular_value has {len(target)} entries for {len(cons_specs)} constraints"
        )

    cfuncs, cgrads = [], []
    for j, spec in enumerate(cons_specs):
        p = _poly_from_spec(spec, m, f"constraint #{j}")
        cfuncs.append(p)
        cgrads.append(p.gradient)
    C = (
        ConstraintSystem(m, tuple(cfuncs), tuple(cgrads), target=np.array(target))
        if cfuncs
        else ConstraintSystem.unconstrained(m)
    )

    sfuncs, sgrads = [], []
    for i, spec in enumerate(surf_specs):
        if spec == "bump":
            if m != 2:
                raise ValueError("the 'bump' surface needs ambient_dim 2")
            sfuncs.append(_bump_value)
            sgrads.append(_bump_grad)
        else:
            p = _poly_from_spec(spec, m, f"surface #{i}")
            sfuncs.append(p)
            sgrads.append(p.gradient)
    S = SurfaceStack(tuple(sfuncs), tuple(sgrads), gains=gains)

    axes = []
    for ax in box:
        lo, hi, n = ax
        axes.append((float(lo), float(hi), int(n)))
    grid = GridSpec(tuple(axes))
    if grid.ndim != m:
        raise ValueError(f"scan_box has {grid.ndim} axes, expected ambient_dim {m}")

    starts = tuple(tuple(float(v) for v in s) for s in data.get("starts", []))
    lo = min(ax[0] for ax in axes)
    hi = max(ax[1] for ax in axes)
    return Scenario(
        name=name, constraints=C, surfaces=S, scan_grid=grid,
        random_points=_box_sampler(lo, hi, m), starts=starts,
        notes=str(data.get("notes", "user scenario")),
    )
