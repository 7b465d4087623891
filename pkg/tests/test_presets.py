import math

import numpy as np
import pytest

from surf_rd.errors import ConfigError
from surf_rd.kinetics import ForcedSchnakenberg, RosenzweigMacArthur, SemilinearDecay
from surf_rd.presets import EXPERIMENTS, H0, TAU0, cap, get_preset, scheduled_tau, with_final_time


def test_reference_step_at_reference_mesh_size():
    assert scheduled_tau(H0, 1.0) == pytest.approx(0.2)
    assert scheduled_tau(H0 / 2.0, 1.0) == pytest.approx(0.05)


@pytest.mark.parametrize("h", [1.05, 0.6, 0.33, 0.16, 0.08, 0.04])
def test_scheduled_tau_lands_on_final_time(h):
    tau = scheduled_tau(h, 1.0)
    steps = 1.0 / tau
    assert steps == pytest.approx(round(steps), abs=1e-9)
    assert tau <= TAU0 * (h / H0) ** 2 * (1.0 + 1e-12)


def test_scheduled_tau_rejects_bad_input():
    with pytest.raises(ConfigError):
        scheduled_tau(0.0, 1.0)
    with pytest.raises(ConfigError):
        scheduled_tau(0.1, -1.0)


def test_cap_profile():
    points = np.array([[0.0, 0.0, 1.0], [0.1, 0.0, math.sqrt(0.99)], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    values = cap(points, 0.2)
    np.testing.assert_allclose(values, [1.0, math.sqrt(0.75), 0.0, 0.0])
    floored = cap(points, 0.2, floor=1e-7)
    assert floored[2] == 1e-7 and floored[3] == 1e-7
    assert floored[0] == pytest.approx(1.0)


def test_all_experiments_build():
    for name in EXPERIMENTS:
        preset = get_preset(name)
        assert preset.name == name
        assert preset.r == len(preset.diffusion)


def test_exp1_defaults():
    preset = get_preset("exp1")
    assert isinstance(preset.model, SemilinearDecay)
    assert preset.diffusion == (pytest.approx(1.0 / 24.0),)
    assert preset.exact is not None
    assert preset.solver == "cg"
    assert preset.report == "convergence"
    assert preset.tau_for(H0) == pytest.approx(0.2)


def test_exp1_without_matching_exact_solution():
    assert get_preset("exp1", {"beta": 0.25}).exact is None
    assert get_preset("exp1", {"alpha": 2.0}).exact is None


def test_exp2_defaults():
    preset = get_preset("exp2")
    assert preset.rectangle.lo == (0.0,) and preset.rectangle.hi == (1.0,)
    assert preset.solver == "direct"
    assert preset.report == "extrema"
    assert preset.exact is None


def test_exp3_defaults():
    preset = get_preset("exp3")
    assert isinstance(preset.model, RosenzweigMacArthur)
    assert preset.tau_for(0.01) == 1e-3
    assert preset.t_final == 5.0
    points = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    u0 = preset.initial_values(points)
    assert u0.shape == (2, 2)
    np.testing.assert_allclose(u0[0], [1.0, 1e-7])
    np.testing.assert_allclose(u0[1], 0.5)
    assert preset.rectangle.contains(u0)


def test_exp4_defaults():
    preset = get_preset("exp4")
    assert isinstance(preset.model, ForcedSchnakenberg)
    assert preset.exact.r == 2
    points = np.array([[0.6, 0.0, 0.8], [0.5, 0.5, math.sqrt(0.5)]])
    np.testing.assert_allclose(preset.initial_values(points), preset.exact.evaluate(points, 0.0))


def test_exp4_diffusions_are_fixed():
    with pytest.raises(ConfigError):
        get_preset("exp4", {"d1": 0.2})


def test_unknown_experiment_and_parameter():
    with pytest.raises(ConfigError, match="unknown experiment"):
        get_preset("exp9")
    with pytest.raises(ConfigError, match="bad parameter"):
        get_preset("exp2", {"beta": 1.0})


def test_with_final_time():
    preset = with_final_time(get_preset("exp2"), 0.25)
    assert preset.t_final == 0.25
    assert preset.tau_for(H0) == pytest.approx(0.25 / 2.0)
    with pytest.raises(ConfigError):
        with_final_time(preset, 0.0)
