import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluxchain import (BiasSchedule, ConfigError, default_device, eval_schedule,
                       load_device, serialize_device)
from fluxchain.device import device_dict
from fluxchain.units import PHI0


def test_default_device_matches_design_table():
    p = default_device()
    assert p.ic_x_qfp == pytest.approx(990e-9)
    assert p.l_qfp == pytest.approx(416e-12)
    assert p.m_qub_qfp == pytest.approx(65e-12)
    assert p.m_qfp_tres == pytest.approx(65e-12)
    assert p.ic_x_qub == pytest.approx(103e-9)   # extracted preferred
    assert p.d_asym == pytest.approx(0.102)
    assert p.q_total == pytest.approx(720)
    assert p.phi0 == PHI0


def test_load_missing_required_field():
    p = default_device()
    raw = json.loads(serialize_device(p))
    del raw["qfp"]["l_qfp"]
    with pytest.raises(ConfigError, match="missing field l_qfp"):
        load_device(json.dumps(raw))


def test_load_negative_inductance_names_field():
    raw = json.loads(serialize_device(default_device()))
    raw["qfp"]["l_qfp"] = -1e-12
    with pytest.raises(ConfigError, match="l_qfp"):
        load_device(json.dumps(raw))


def test_load_rejects_unknown_key_and_bad_json():
    raw = json.loads(serialize_device(default_device()))
    raw["qfp"]["bogus"] = 1.0
    with pytest.raises(ConfigError, match="bogus"):
        load_device(json.dumps(raw))
    with pytest.raises(ConfigError, match="JSON"):
        load_device("{not json")


def test_d_asym_range_enforced():
    raw = json.loads(serialize_device(default_device()))
    raw["qubit"]["d_asym"] = 1.0
    with pytest.raises(ConfigError, match="d_asym"):
        load_device(json.dumps(raw))


def test_internal_q_consistency():
    raw = json.loads(serialize_device(default_device()))
    raw["resonator"]["q_external"] = 500.0   # < q_total: negative internal loss
    with pytest.raises(ConfigError, match="q_external"):
        load_device(json.dumps(raw))


def test_serialize_round_trip_bit_exact():
    p = default_device()
    q = load_device(serialize_device(p))
    assert device_dict(p) == device_dict(q)


def test_schedule_linear_midpoint():
    s = BiasSchedule({"phi_x_qub": [(0.0, 0.0), (10e-6, 1.0)]})
    assert s.value("phi_x_qub", 5e-6) == pytest.approx(0.5)


def test_schedule_clamps_outside():
    s = BiasSchedule({"phi_x_qub": [(0.0, 0.0), (10e-6, 1.0)]})
    assert s.value("phi_x_qub", -1e-6) == 0.0
    assert s.value("phi_x_qub", 20e-6) == 1.0


def test_default_sequence_holds_full_anneal():
    from fluxchain.device import default_schedule_json
    s = BiasSchedule.from_json(default_schedule_json())
    bias = eval_schedule(s, 15e-6)   # after the qubit anneal completes
    assert bias.phi_x_qub == 1.0


def test_schedule_requires_increasing_times():
    with pytest.raises(ConfigError, match="strictly increasing"):
        BiasSchedule({"phi_x_qub": [(0.0, 0.0), (0.0, 1.0)]})


def test_unknown_line_rejected():
    with pytest.raises(ConfigError, match="unknown control line"):
        BiasSchedule({"phi_q_nope": [(0.0, 0.0), (1.0, 1.0)]})


def test_missing_line_evaluates_to_zero():
    s = BiasSchedule({"phi_x_qub": [(0.0, 0.0), (1e-6, 1.0)]})
    assert eval_schedule(s, 0.5e-6).phi_z_tres == 0.0


@given(st.floats(0.001, 0.999))
def test_schedule_piecewise_linear_property(frac):
    # interpolation across any breakpoint pair is exact at interior points
    s = BiasSchedule({"phi_z_qfp": [(0.0, -2.0), (4e-6, 1.0), (10e-6, 0.25)]})
    times, values = s.lines["phi_z_qfp"]
    for i in range(len(times) - 1):
        ti = times[i] + frac * (times[i + 1] - times[i])
        expect = values[i] + frac * (values[i + 1] - values[i])
        assert s.value("phi_z_qfp", ti) == pytest.approx(expect, abs=1e-12)


def test_schedule_json_round_trip():
    s = BiasSchedule({"phi_z_qfp": [(0.0, -2.0), (4e-6, 1.0)],
                      "phi_x_qfp": [(0.0, 0.5), (4e-6, 1.0)]})
    s2 = BiasSchedule.from_json(s.to_json())
    for name in s.lines:
        assert np.array_equal(s.lines[name][0], s2.lines[name][0])
        assert np.array_equal(s.lines[name][1], s2.lines[name][1])


def test_flux_bias_rejects_nan():
    from fluxchain import FluxBias
    with pytest.raises(ConfigError, match="finite"):
        FluxBias(phi_z_qub=math.nan)
