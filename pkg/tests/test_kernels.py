"""Kernel path vs pure-numpy reference path agreement."""

import numpy as np
import pytest

from wolf import _kernels
from wolf.dynamics import (_compute_kincache_kernel, _compute_kincache_numpy,
                           bias_forces, foot_jacobians, gravity_forces,
                           mass_matrix)
from wolf.model import canonical_model

from test_dynamics import random_config

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA,
                                reason="numba unavailable; single path only")


@pytest.mark.parametrize("with_arm", [False, True])
def test_kernel_matches_numpy_reference(with_arm):
    model = canonical_model(with_arm=with_arm)
    rng = np.random.default_rng(123)
    for _ in range(20):
        cfg = random_config(model, rng=rng)
        kk = _compute_kincache_kernel(model, cfg, vel=True)
        kn = _compute_kincache_numpy(model, cfg, vel=True)
        np.testing.assert_allclose(kk.foot, kn.foot, atol=1e-13)
        np.testing.assert_allclose(kk.com_robot, kn.com_robot, atol=1e-13)
        np.testing.assert_allclose(kk.com_vel, kn.com_vel, atol=1e-12)
        np.testing.assert_allclose(kk.com_jdv, kn.com_jdv, atol=1e-11)
        np.testing.assert_allclose(kk.foot_vel, kn.foot_vel, atol=1e-12)
        np.testing.assert_allclose(kk.foot_jdv, kn.foot_jdv, atol=1e-11)
        np.testing.assert_allclose(foot_jacobians(model, kk),
                                   foot_jacobians(model, kn), atol=1e-13)
        np.testing.assert_allclose(mass_matrix(model, kk),
                                   mass_matrix(model, kn), atol=1e-11)
        np.testing.assert_allclose(bias_forces(model, kk),
                                   bias_forces(model, kn), atol=1e-10)
        np.testing.assert_allclose(gravity_forces(model, kk),
                                   gravity_forces(model, kn), atol=1e-11)
