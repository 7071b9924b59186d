import json

import numpy as np
import pytest
from scipy.optimize import brentq

from gvf.field import field_components, field_value
from gvf.integrate import IntegratorConfig
from gvf.scenarios import (
    BUMP_PATH_RADIUS,
    CASSINI_A,
    CASSINI_B,
    SCENARIOS,
    from_json,
    get_scenario,
    random_rotations,
    rot_x,
    rot_y,
    rot_z,
    rotation_to_state,
    scenario_config,
    scenario_names,
    so3_membership,
    state_to_rotation,
    wrap_angle,
)

EXPECTED_NAMES = [
    "circle2d",
    "line2d",
    "ellipse2d",
    "cassini2d",
    "line3d_good",
    "line3d_bad",
    "tilted_circle3d",
    "sphere_circle",
    "bump_disk",
    "torus_arm_lift",
    "so3_path",
]


def test_registry_contents():
    assert scenario_names() == EXPECTED_NAMES
    assert set(SCENARIOS) == set(EXPECTED_NAMES)
    with pytest.raises(KeyError):
        get_scenario("nope")


@pytest.mark.parametrize("name", EXPECTED_NAMES)
def test_path_samples_really_sit_on_the_path(name):
    s = get_scenario(name)
    if s.path_sampler is None:
        pytest.skip("no path sampler")
    P = s.path_points(512)
    assert P.shape == (512, s.ambient_dim)
    bits = field_components(s.constraints, s.surfaces, P)
    assert np.abs(bits.errors).max() <= 1e-9
    assert np.abs(s.constraints.residual(P)).max() <= 1e-10


def test_every_scenario_has_usable_starts():
    for name in EXPECTED_NAMES:
        s = get_scenario(name)
        assert len(s.starts) >= 1
        for x0 in s.starts:
            assert len(x0) == s.ambient_dim
            assert np.isfinite(x0).all()


def test_cassini_axis_crossings():
    P = get_scenario("cassini2d").path_points()
    rx = float(np.sqrt(CASSINI_A**2 + CASSINI_B**2))
    ry = float(np.sqrt(CASSINI_B**2 - CASSINI_A**2))
    assert rx == pytest.approx(2.9)
    for tgt in ([rx, 0.0], [-rx, 0.0], [0.0, ry], [0.0, -ry]):
        assert np.linalg.norm(P - np.array(tgt), axis=1).min() < 2e-3


def test_rotation_state_is_column_stacked():
    A = rot_z(0.3) @ rot_y(1.1) @ rot_x(-0.4)
    x = rotation_to_state(A)
    assert x.shape == (9,)
    for i in range(3):
        for j in range(3):
            assert x[3 * j + i] == A[i, j]
    np.testing.assert_array_equal(state_to_rotation(x), A)


def test_random_rotations_are_proper():
    R = state_to_rotation(random_rotations(np.random.default_rng(4), 64))
    eye = np.broadcast_to(np.eye(3), R.shape)
    np.testing.assert_allclose(np.swapaxes(R, -1, -2) @ R, eye, atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-12)


def test_so3_start_matches_its_construction():
    s = get_scenario("so3_path")
    A = state_to_rotation(np.array(s.starts[0]))
    np.testing.assert_allclose(A, rot_x(np.pi / 4) @ rot_y(-np.pi / 4), atol=1e-12)
    assert A[0, 2] == pytest.approx(-np.sqrt(0.5))
    assert A[1, 2] == pytest.approx(-0.5)


def test_so3_membership_labels():
    assert so3_membership(rotation_to_state(np.eye(3))) == "upright"
    assert so3_membership(rotation_to_state(rot_x(np.pi))) == "flipped"
    tilted = rotation_to_state(rot_x(np.pi / 4) @ rot_y(-np.pi / 4))
    assert so3_membership(tilted) is None
    assert so3_membership(tilted, tol=1.0) == "upright"
    with pytest.raises(ValueError):
        so3_membership(np.zeros(4))


def test_bump_radius_against_scalar_root():
    # the field vanishes where 4 = u * exp(1 / (1 - u)) with u the squared radius
    u_star = brentq(lambda u: 4.0 - u * np.exp(1.0 / (1.0 - u)), 1.5, 30.0, xtol=1e-14)
    assert BUMP_PATH_RADIUS == pytest.approx(np.sqrt(u_star), abs=1e-12)
    s = get_scenario("bump_disk")
    r = np.linalg.norm(s.path_points(64), axis=1)
    np.testing.assert_allclose(r, BUMP_PATH_RADIUS, atol=1e-12)


def test_tilted_field_along_symmetry_line():
    s = get_scenario("tilted_circle3d")
    for u in (0.5, -0.3, 1.0 / np.sqrt(2.0)):
        chi = field_value(s.constraints, s.surfaces, np.array([0.0, u, -u]))
        np.testing.assert_allclose(chi, [0.0, -2.0 * u, 2.0 * u], atol=1e-12)


def test_wrap_angle_range():
    a = wrap_angle(np.array([0.0, np.pi, -np.pi, 3 * np.pi + 0.1, -7.5]))
    np.testing.assert_allclose(
        a, [0.0, -np.pi, -np.pi, -np.pi + 0.1, -7.5 + 2 * np.pi], atol=1e-12
    )
    assert (a >= -np.pi).all() and (a < np.pi).all()


def test_hypothesis_note_tracks_tangent_dimension():
    assert get_scenario("circle2d").hypothesis_note is not None
    assert get_scenario("sphere_circle").hypothesis_note is not None  # 3 - 1 = 2
    assert get_scenario("line3d_good").hypothesis_note is None
    assert get_scenario("so3_path").hypothesis_note is None  # 9 - 6 = 3


def test_random_points_land_on_manifold():
    s = get_scenario("sphere_circle")
    X = s.random_points(np.random.default_rng(0), 32)
    assert X.shape == (32, 3)
    assert np.abs(s.constraints.residual(X)).max() <= 1e-12


USER_SPEC = {
    "name": "shifted_circle",
    "ambient_dim": 2,
    "surfaces": [{"terms": [[1.0, [2, 0]], [1.0, [0, 2]], [-2.0, [1, 0]], [0.0, [0, 0]]]}],
    "gains": [1.0],
    "scan_box": [[-2.0, 4.0, 31], [-3.0, 3.0, 31]],
    "starts": [[3.0, 0.0]],
}


def test_from_json_accepts_dict_string_and_file(tmp_path):
    for src in (
        USER_SPEC,
        json.dumps(USER_SPEC),
        tmp_path / "scene.json",
    ):
        if not isinstance(src, (dict, str)):
            src.write_text(json.dumps(USER_SPEC))
            src = str(src)
        s = from_json(src)
        assert s.name == "shifted_circle"
        assert s.ambient_dim == 2
        assert s.starts == ((3.0, 0.0),)
        # x^2 + y^2 - 2x = 0 is the unit circle about (1, 0)
        chi = field_value(s.constraints, s.surfaces, np.array([2.0, 0.0]))
        np.testing.assert_allclose(chi, [0.0, 2.0], atol=1e-12)
        X = s.random_points(np.random.default_rng(1), 8)
        assert X.shape == (8, 2)
        assert (X >= -3.0).all() and (X <= 4.0).all()


def test_from_json_bump_and_constraints():
    spec = {
        "name": "user_bump",
        "ambient_dim": 2,
        "surfaces": ["bump"],
        "gains": [1.0],
        "scan_box": [[-3.0, 3.0, 21], [-3.0, 3.0, 21]],
    }
    s = from_json(spec)
    v = s.surfaces.surfaces[0](np.array([[0.0, 0.0], [3.0, 0.0]]))
    assert v[0] == pytest.approx(4.0)
    assert v[1] < 0

    spec3 = {
        "name": "user_sphere",
        "ambient_dim": 3,
        "constraints": [{"terms": [[1.0, [2, 0, 0]], [1.0, [0, 2, 0]], [1.0, [0, 0, 2]]]}],
        "regular_value": [1.0],
        "surfaces": [{"terms": [[1.0, [0, 0, 1]]]}],
        "gains": [2.0],
        "scan_box": [[-1.2, 1.2, 11], [-1.2, 1.2, 11], [-1.2, 1.2, 11]],
    }
    s3 = from_json(spec3)
    assert s3.constraints.k == 1
    assert np.abs(s3.constraints.residual(np.array([0.0, 1.0, 0.0]))) <= 1e-12


@pytest.mark.parametrize(
    "mutate, excerpt",
    [
        (lambda d: d.pop("gains"), "missing required key"),
        (lambda d: d["surfaces"][0]["terms"].append([1.0, [1]]), "do not fit dim"),
        (lambda d: d.update(scan_box=[[-1.0, 1.0, 5]]), "expected ambient_dim"),
        (lambda d: d.update(regular_value=[0.0]), "regular_value"),
        (lambda d: d.update(surfaces=["bump"], ambient_dim=3,
                            scan_box=[[-1, 1, 5]] * 3), "ambient_dim 2"),
    ],
)
def test_from_json_rejects_bad_specs(mutate, excerpt):
    bad = json.loads(json.dumps(USER_SPEC))
    mutate(bad)
    with pytest.raises(ValueError, match=excerpt):
        from_json(bad)


def test_scenario_config_precedence():
    s = get_scenario("so3_path")
    assert s.config_overrides["dt"] == pytest.approx(5e-3)
    assert scenario_config(s).dt == pytest.approx(5e-3)
    assert scenario_config(s, dt=1e-3).dt == pytest.approx(1e-3)
    assert scenario_config(s, dt=None).dt == pytest.approx(5e-3)
    base = IntegratorConfig(t_max=7.0)
    cfg = scenario_config(get_scenario("circle2d"), base=base)
    assert cfg.t_max == pytest.approx(7.0) and cfg.dt == base.dt
