import dataclasses
import json

import numpy as np
import pytest

from gvf.integrate import (
    IntegratorConfig,
    VERDICT_DIVERGED,
    VERDICT_INCONCLUSIVE,
    VERDICT_NUMERIC,
    VERDICT_PATH,
    VERDICT_SINGULAR,
    audit_distance,
    batch,
    integrate,
    step,
    write_meta_json,
    write_trajectory_csv,
)
from gvf.scenarios import get_scenario


def test_circle_converges_to_path():
    s = get_scenario("circle2d")
    traj = integrate(s.constraints, s.surfaces, np.array([2.0, 0.5]))
    assert traj.verdict == VERDICT_PATH
    assert traj.e_norms[-1] <= 1e-3
    assert abs(np.linalg.norm(traj.x_final) - 1.0) <= 1e-3
    # V never grows beyond roundoff along the way
    assert traj.audit_max_growth <= 1e-10
    assert np.all(np.diff(traj.lyapunov) <= 1e-10 * (1.0 + traj.lyapunov[:-1]))


def test_ellipse_center_is_immediately_singular():
    s = get_scenario("ellipse2d")
    cfg = IntegratorConfig()
    traj = integrate(s.constraints, s.surfaces, np.zeros(2), cfg)
    assert traj.verdict == VERDICT_SINGULAR
    assert traj.t_final == pytest.approx(cfg.dwell_time, abs=2 * cfg.dt)
    # the field vanishes exactly there, so the state must not move at all
    np.testing.assert_array_equal(traj.x_final, np.zeros(2))
    assert traj.e_norms[-1] > cfg.tol_path


def test_divergence_with_small_escape_radius():
    s = get_scenario("line2d")
    cfg = IntegratorConfig(escape_radius=5.0, t_max=30.0)
    traj = integrate(s.constraints, s.surfaces, np.array([0.0, 3.0]), cfg)
    assert traj.verdict == VERDICT_DIVERGED
    assert np.linalg.norm(traj.x_final) > 5.0


def test_numeric_failure_on_backward_decaying_surface():
    # travelling backward from deep in the decay region, e^{-x} overflows
    # inside the very first step's stages
    s = get_scenario("line3d_bad")
    surfaces = dataclasses.replace(s.surfaces, propagation_sign=-1)
    cfg = IntegratorConfig(t_max=5.0)
    traj = integrate(s.constraints, surfaces, np.array([-25.0, 0.0, 0.5]), cfg)
    assert traj.verdict == VERDICT_NUMERIC
    assert traj.t_final < 5.0
    assert np.all(np.isfinite(traj.x_final))


def test_inconclusive_at_short_horizon():
    s = get_scenario("line3d_bad")
    cfg = IntegratorConfig(t_max=5.0)
    traj = integrate(s.constraints, s.surfaces, np.array([0.0, 1.0, 0.5]), cfg)
    assert traj.verdict == VERDICT_INCONCLUSIVE
    assert traj.t_final == pytest.approx(5.0)


def test_batch_matches_single_runs_exactly():
    for name in ["circle2d", "sphere_circle"]:
        s = get_scenario(name)
        rng = np.random.default_rng(17)
        seeds = s.random_points(rng, 3)
        if s.constraints.k:
            seeds = s.constraints.retract(seeds)
        cfg = IntegratorConfig(dt=2e-3, t_max=20.0)
        res = batch(s.constraints, s.surfaces, seeds, cfg)
        for i, x0 in enumerate(seeds):
            traj = integrate(s.constraints, s.surfaces, x0, cfg)
            assert res.verdicts[i] == traj.verdict, name
            np.testing.assert_array_equal(res.x_final[i], traj.x_final)
            assert res.t_final[i] == traj.t_final


def test_batch_thread_splitting_is_deterministic(monkeypatch):
    s = get_scenario("circle2d")
    seeds = np.random.default_rng(23).uniform(-2, 2, size=(6, 2))
    cfg = IntegratorConfig(dt=2e-3, t_max=20.0)
    base = batch(s.constraints, s.surfaces, seeds, cfg)
    monkeypatch.setenv("GVF_THREADS", "3")
    threaded = batch(s.constraints, s.surfaces, seeds, cfg)
    assert threaded.verdicts == base.verdicts
    np.testing.assert_array_equal(threaded.x_final, base.x_final)
    np.testing.assert_array_equal(threaded.audit_max_growth, base.audit_max_growth)


def test_early_stop_leaves_no_trailing_steps():
    s = get_scenario("circle2d")
    seeds = np.array([[2.0, 0.5], [0.5, -1.5]])
    res = batch(s.constraints, s.surfaces, seeds)
    assert all(v == VERDICT_PATH for v in res.verdicts)
    assert np.all(res.t_final < 20.0)
    assert np.all(res.n_steps < 20.0 / res.config.dt)


def test_rk4_error_shrinks_like_fourth_order():
    s = get_scenario("circle2d")
    x0 = np.array([1.5, 0.3])
    cfg = lambda dt: IntegratorConfig(dt=dt, t_max=1.0, dwell_time=1e9)  # noqa: E731

    def final(dt):
        return integrate(s.constraints, s.surfaces, x0, cfg(dt)).x_final

    ref = final(4e-3 / 16)
    e1 = np.linalg.norm(final(4e-3) - ref)
    ref2 = final(2e-3 / 16)
    e2 = np.linalg.norm(final(2e-3) - ref2)
    assert 6.0 <= e1 / e2 <= 40.0


def test_step_preserves_manifold():
    s = get_scenario("sphere_circle")
    x = np.array([0.0, 0.6, 0.8])
    out = step(s.constraints, s.surfaces, x, 1e-2)
    assert out.shape == (3,)
    assert s.constraints.residual(out) <= 1e-10
    assert np.linalg.norm(out - x) > 0


def test_sparse_retraction_still_bounded():
    s = get_scenario("sphere_circle")
    cfg = IntegratorConfig(retract_every=5, t_max=10.0, record_stride=1)
    traj = integrate(s.constraints, s.surfaces, np.array([0.0, 0.6, 0.8]), cfg)
    assert traj.verdict == VERDICT_PATH
    assert np.max(traj.residuals) <= 1e-6
    assert s.constraints.residual(traj.x_final) <= 1e-6


def test_trajectory_csv_schema_and_determinism(tmp_path):
    s = get_scenario("circle2d")
    cfg = IntegratorConfig(t_max=3.0)
    traj = integrate(s.constraints, s.surfaces, np.array([2.0, 0.5]), cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(traj, str(p1))
    write_trajectory_csv(traj, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "t,x_0,x_1,e_norm,V,chi_norm,residual"
    data = np.loadtxt(str(p1), delimiter=",", skiprows=1)
    assert data.shape == (traj.times.shape[0], 7)
    np.testing.assert_array_equal(data[:, 0], traj.times)
    np.testing.assert_array_equal(data[:, 1:3], traj.states)
    np.testing.assert_array_equal(data[:, 3], traj.e_norms)


def test_meta_json_contents(tmp_path):
    s = get_scenario("circle2d")
    traj = integrate(s.constraints, s.surfaces, np.array([2.0, 0.5]), IntegratorConfig(t_max=5.0))
    out = tmp_path / "meta.json"
    write_meta_json(str(out), "circle2d", traj, np.array([2.0, 0.5]))
    meta = json.loads(out.read_text())
    assert meta["scenario"] == "circle2d"
    assert meta["verdict"] == VERDICT_PATH
    assert meta["config"]["dt"] == pytest.approx(1e-3)
    assert meta["x0"] == [2.0, 0.5]
    assert len(meta["x_final"]) == 2


def test_audit_distance_against_known_geometry():
    circle = get_scenario("circle2d").path_points()
    d = audit_distance(np.array([[2.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), circle)
    np.testing.assert_allclose(d, [1.0, 0.0, 1.0], atol=1e-5)


def test_records_start_and_end_present():
    s = get_scenario("circle2d")
    cfg = IntegratorConfig(t_max=3.0, record_stride=100)
    traj = integrate(s.constraints, s.surfaces, np.array([2.0, 0.5]), cfg)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(traj.t_final)
    assert np.all(np.diff(traj.times) > 0)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(record_stride=0)
