import numpy as np
import pytest

from wolf.model import (Configuration, ModelError, canonical_document,
                        canonical_model, emit_document, load_model)


def test_canonical_total_mass():
    # body 20 kg + 12 leg links x 0.5 kg
    model = canonical_model()
    assert model.total_mass == pytest.approx(26.0, abs=1e-12)


def test_zero_mass_rejected():
    doc = canonical_document()
    doc["legs"][1]["link_masses"][2] = 0.0
    with pytest.raises(ModelError, match="non-positive mass"):
        load_model(doc)
    with pytest.raises(ModelError, match="link_masses"):
        load_model(doc)


def test_no_arm_dof_count():
    model = canonical_model()
    assert model.n_arm == 0
    assert model.n_joints == 12
    assert model.nv == 18


def test_arm_dof_count():
    model = canonical_model(with_arm=True)
    assert model.n_arm == 3
    assert model.nv == 21
    assert model.total_mass == pytest.approx(26.0 + 3 * 0.4)


def test_limit_inversion_rejected():
    doc = canonical_document()
    doc["limits"]["position"] = [[-1.0, 1.0], [1.2, -2.2], [0.08, 2.7]]
    with pytest.raises(ModelError, match="limit inversion"):
        load_model(doc)


def test_missing_legs_rejected():
    with pytest.raises(ModelError, match="legs"):
        load_model({"base": {"mass": 20.0}})


def test_wrong_leg_order_rejected():
    doc = canonical_document()
    doc["legs"][0]["name"] = "RF"
    with pytest.raises(ModelError, match="order LF, RF, LH, RH"):
        load_model(doc)


def test_roundtrip_identical():
    for with_arm in (False, True):
        model = canonical_model(with_arm=with_arm)
        again = load_model(emit_document(model))
        assert again.total_mass == model.total_mass
        np.testing.assert_array_equal(again.hip_offsets, model.hip_offsets)
        np.testing.assert_array_equal(again.leg_lengths, model.leg_lengths)
        np.testing.assert_array_equal(again.leg_inertias, model.leg_inertias)
        np.testing.assert_array_equal(again.q_lower, model.q_lower)
        np.testing.assert_array_equal(again.tau_max, model.tau_max)
        np.testing.assert_array_equal(again.default_joints, model.default_joints)
        if with_arm:
            np.testing.assert_array_equal(again.arm_axes, model.arm_axes)
            np.testing.assert_array_equal(again.arm_coms, model.arm_coms)
            np.testing.assert_array_equal(again.arm_inertias, model.arm_inertias)


def test_configuration_validates_quaternion():
    with pytest.raises(ModelError, match="unit quaternion"):
        Configuration(np.zeros(3), [1.0, 0.5, 0.0, 0.0], np.zeros(12))


def test_configuration_dof_mismatch():
    model = canonical_model()
    cfg = Configuration(np.zeros(3), [1, 0, 0, 0], np.zeros(10))
    with pytest.raises(ModelError, match="joints"):
        cfg.check_dof(model)


def test_default_config_reaches_stance_height():
    from wolf.dynamics import forward_kinematics
    model = canonical_model()
    feet, _, _ = forward_kinematics(model, model.default_config())
    np.testing.assert_allclose(feet[:, 2], 0.0, atol=1e-12)
    # feet sit under the hips in the default stance
    np.testing.assert_allclose(feet[:, :2], model.hip_offsets[:, :2], atol=1e-12)
