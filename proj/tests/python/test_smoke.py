import math
import os
from pathlib import Path

import numpy as np
import pytest

import gripstat as gs

DATA = Path(os.environ.get("GRIPSTAT_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def geometry():
    return gs.reference_geometry()


def test_reference_geometry_round_trips(geometry):
    assert gs.load_geometry(geometry.serialize()) == geometry
    assert gs.load_geometry_file(str(DATA / "reference_geometry.cfg")) == geometry


def test_missing_geometry_file_raises():
    with pytest.raises(gs.Error):
        gs.load_geometry_file(str(DATA / "no_such_file.cfg"))


def test_parallel_theta1_inverts_actuation(geometry):
    t1 = math.radians(44.0)
    ta = gs.actuation_from_joints(geometry, t1, math.pi / 2 - t1, 0.0)
    assert gs.parallel_theta1(geometry, ta) == pytest.approx(t1, abs=1e-9)


def test_distal_only_force():
    J = np.diag([10.0, 20.0, 15.0])
    f = gs.contact_forces(J, np.array([0.0, 0.0, 1500.0]), [False, False, True])
    assert f[2] == pytest.approx(100.0)
    assert f[0] == 0.0 and f[1] == 0.0


def test_simulate_is_deterministic(geometry):
    sc = gs.GraspScenario()
    sc.object_size = gs.size_for_contact_angle(geometry, math.radians(45.0))
    sc.seed = 4
    a, b = gs.simulate_grasp(geometry, sc), gs.simulate_grasp(geometry, sc)
    assert len(a) > 100
    assert a.current == b.current
    assert a.truth.grasp_case == gs.GraspCase.MiddleFirst
    assert a.truth.theta1_switch == pytest.approx(math.radians(45.0), abs=1e-9)


def test_infeasible_scenario_raises(geometry):
    sc = gs.GraspScenario()
    sc.object_size = 1.85
    with pytest.raises(gs.DomainError):
        gs.simulate_grasp(geometry, sc)


def test_cli_usage_error():
    rc, _, err = gs.run_cli(["frobnicate"])
    assert rc == 2
    assert err


def test_estimate_on_trained_model(geometry, tmp_path):
    rc, _, err = gs.run_cli(["generate", "--geometry", str(DATA / "reference_geometry.cfg"), "--scenario",
                             str(DATA / "scenarios" / "sanity_grid.json"), "--out", str(tmp_path / "ds")])
    assert rc == 0, err
    rc, _, err = gs.run_cli(["train", "--geometry", str(DATA / "reference_geometry.cfg"), "--scenario",
                             str(DATA / "scenarios" / "sanity_train.json"), "--out", str(tmp_path / "m"),
                             str(tmp_path / "ds")])
    assert rc == 0, err
    model = gs.load_model(str(tmp_path / "m" / "model.json"))
    trace = gs.load_trace(str(DATA / "examples" / "middle_first_45deg" / "trace.csv"))
    est = gs.estimate(trace, geometry, model)
    assert est.grasp_case == gs.GraspCase.MiddleFirst
    assert est.forces.shape == (len(trace), 3)
    assert est.steady_force[2] == pytest.approx(100.0, rel=0.03)
    assert all(b >= a for a, b in zip(est.modes, est.modes[1:]))
