import json
import math

import pytest

from mmwsched.scenarios import ConfigError, build_case1, build_case2, scenario_from_config, scenario_to_config


def test_case1_layout():
    sc = build_case1(42)
    assert len(sc.ues) == 10
    assert sc.nlos_group == (0, 1, 2)
    assert len(sc.obstacles) == 20
    assert sc.traffic.avg_rate == 500e6
    assert sc.field_m == (300.0, 300.0) and sc.enb == (150.0, 150.0)
    for u in sc.ues:
        assert math.hypot(*u.velocity) == pytest.approx(18.0)
    # the NLOS trio starts inside the cluttered quadrant, the rest on the far side of the eNodeB
    assert all(u.position[0] > 150 and u.position[1] > 150 for u in sc.ues[:3])
    assert all(u.position[0] < 150 and u.position[1] < 150 for u in sc.ues[3:])


def test_case2_layout():
    sc = build_case2(7)
    assert len(sc.ues) == 10 and len(sc.obstacles) == 300
    assert sc.traffic.avg_rate == 100e6
    assert all(0 <= math.hypot(*u.velocity) <= 30 for u in sc.ues)
    assert sc.nlos_group == ()


def test_builds_are_deterministic_per_seed():
    assert build_case1(5) == build_case1(5)
    assert build_case2(5) == build_case2(5)
    assert build_case2(5).obstacles != build_case2(6).obstacles


@pytest.mark.parametrize("raw, key", [
    ({"ues": [{"x": 1, "y": 1, "mcs": 29}]}, "mcs"),
    ({"ues": [{"x": 1, "y": 1, "mcs": 0}]}, "mcs"),
    ({"ues": [{"x": 1, "y": 1}], "bogus": 1}, "bogus"),
    ({"ues": [{"x": 1, "y": 1, "colour": "red"}]}, "ues[0].colour"),
    ({"ues": [{"x": 1}]}, "ues[0].y"),
    ({"ues": []}, "ues"),
    ({"ues": [{"x": 1, "y": 1}], "scheduler": "fifo"}, "scheduler"),
    ({"ues": [{"x": 1, "y": 1}], "harq_bler": 1.0}, "harq_bler"),
    ({"ues": [{"x": 1, "y": 1}], "t_c": 0.5}, "t_c"),
    ({"ues": [{"x": 1, "y": 1}], "obstacles": [{"x": 5, "y": 5, "half_width": 1}]}, "obstacles[0].half_height"),
    ({"base": "case9"}, "base"),
])
def test_config_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as err:
        scenario_from_config(raw)
    assert key in err.value.key


def test_explicit_config_resolves():
    sc = scenario_from_config({"field_m": [100, 50], "ues": [{"x": 10, "y": 20, "mcs": 28, "vx": 2}],
                               "scheduler": "epf", "duration_ms": 2, "avg_rate_mbps": 30}, seed=4)
    assert sc.field_m == (100.0, 50.0) and sc.enb == (50.0, 25.0)
    assert sc.ues[0].fixed_mcs == 28 and sc.ues[0].velocity == (2.0, 0.0)
    assert sc.policy.value == "epf" and sc.duration_us == 2000 and sc.seed == 4


@pytest.mark.parametrize("build", [build_case1, build_case2])
def test_config_echo_round_trips(build):
    sc = build(3, scheduler="gpf", alpha=2.0)
    echo = json.loads(json.dumps(scenario_to_config(sc)))
    again = scenario_from_config(echo)
    assert scenario_to_config(again) == scenario_to_config(sc)
    assert again.ues == sc.ues and again.obstacles == sc.obstacles
