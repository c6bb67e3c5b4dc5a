import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from iidgen import load_scenario
from iidgen.config import BUNDLED, dump_scenario, gains_fragment, parse_scenario, scenario_to_dict
from iidgen.errors import ConfigError

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def base():
    return {
        "exosystems": [{"S": [[0.0, 1.0], [-1.0, 0.0]], "E": [1.0, 0.0], "w0": [1.0, 1.0]}],
        "plant": {"A": [[0.0]], "N": [[1.0]]},
    }


@st.composite
def scenario_dicts(draw):
    m = draw(st.integers(1, 3))
    n = draw(st.integers(1, 3))
    l = draw(st.integers(1, 2))
    vec = lambda k: draw(st.lists(finite, min_size=k, max_size=k))
    S = [vec(m) for _ in range(m)]
    data = {
        "name": "random",
        "seed": draw(st.integers(0, 2**31)),
        "exosystems": [{"S": S, "E": vec(m), "w0": vec(m)} for _ in range(l)],
        "plant": {"A": [vec(n) for _ in range(n)], "N": [vec(n) for _ in range(l)]},
        "sim": {"dt": draw(st.floats(1e-4, 1e-2)), "horizon": draw(st.floats(1.0, 200.0))},
    }
    if draw(st.booleans()):
        data["gains"] = {"L1": vec(m + n), "L23": vec(m + n + 1)}
    if draw(st.booleans()):
        data["region"] = {"sector_inner_angle": draw(st.floats(0.1, 3.0)),
                          "strip": [-draw(st.floats(5.0, 20.0)), -draw(st.floats(0.1, 4.0))]}
    if draw(st.booleans()):
        data["synthesis"] = {"gamma0": draw(st.floats(0.1, 100.0)), "nu0": draw(st.floats(0.1, 100.0)),
                             "alpha": 0.5, "beta": 0.5, "budget": draw(st.integers(1, 5000)),
                             "stability_margin": 0.05}
        if draw(st.booleans()):
            data["synthesis"]["seed"] = draw(st.integers(0, 2**31))
    if draw(st.booleans()):
        data["sim"]["noise"] = {"kind": "sinusoid", "amplitude": draw(st.floats(0.0, 1.0)),
                                "frequency": draw(st.floats(0.0, 10.0)), "phase": 0.25}
    return data


@settings(max_examples=60, deadline=None)
@given(scenario_dicts())
def test_yaml_round_trip_is_exact(data):
    sc = parse_scenario(data)
    again = parse_scenario(yaml.safe_load(dump_scenario(sc)))
    assert scenario_to_dict(again) == scenario_to_dict(sc)
    for a, b in zip(sc.exosystems, again.exosystems):
        assert np.array_equal(a.S, b.S) and np.array_equal(a.w0, b.w0)
    assert np.array_equal(sc.plant.A, again.plant.A)
    if sc.gains is not None:
        assert sc.gains == again.gains


def test_bundled_scenarios_load_cleanly():
    for name in BUNDLED:
        sc = load_scenario(name)
        assert sc.report.ok and sc.name == name
        assert parse_scenario(scenario_to_dict(sc)).name == name
    assert load_scenario("example2").plant.time_varying
    assert load_scenario("example1_noise").noise_at_peak


def test_time_varying_round_trip():
    sc = load_scenario("example2")
    again = parse_scenario(yaml.safe_load(dump_scenario(sc)))
    t = np.linspace(0, 50, 7)
    assert np.array_equal(sc.plant.A_at(t), again.plant.A_at(t))


def test_file_loading(tmp_path):
    path = tmp_path / "mine.yaml"
    path.write_text(yaml.safe_dump(base()))
    sc = load_scenario(path)
    assert sc.name == "mine" and sc.horizon == 30.0 and sc.gains is None
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.yaml")
    path.write_text("exosystems: [")
    with pytest.raises(ConfigError):
        load_scenario(path)


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(extra=1), ""),
    (lambda d: d["plant"].update(B=[[1.0]]), "plant"),
    (lambda d: d["plant"].pop("N"), "plant.N"),
    (lambda d: d["exosystems"][0].update(E=[1.0]), "exosystems[0].E"),
    (lambda d: d["exosystems"][0].update(S=[[0.0, "x"], [1.0, 0.0]]), "exosystems[0].S[0][1]"),
    (lambda d: d["plant"].update(N=[[1.0, 2.0]]), "plant.N[0]"),
    (lambda d: d.update(gains={"L1": [1.0, 0.0, 1.0], "L23": [1.0]}), "gains"),
    (lambda d: d.update(sim={"dt": -1.0}), "sim.dt"),
    (lambda d: d.update(sim={"dt": 0.1, "horizon": 0.5}), "sim.horizon"),
    (lambda d: d.update(region={"strip": [-1.0, -10.0]}), "region"),
    (lambda d: d.update(synthesis={"budget": 0}), "synthesis.budget"),
    (lambda d: d.update(sim={"noise": {"kind": "gaussian"}}), "sim.noise.kind"),
])
def test_errors_name_the_field(mutate, field):
    data = base()
    mutate(data)
    with pytest.raises(ConfigError) as info:
        parse_scenario(data)
    assert info.value.path == field
    assert info.value.exit_code == 2


def test_both_gain_forms_agree():
    stacked = base()
    stacked["gains"] = {"L1": [1.0, 0.0, 1.0], "L23": [536.0, 1074.6, -974.3, -21.9]}
    blocks = base()
    blocks["gains"] = {"L11": [1.0, 0.0], "L12": [1.0], "L21": [536.0, 1074.6], "L22": [-974.3],
                       "L3": -21.9}
    assert parse_scenario(stacked).gains == parse_scenario(blocks).gains
    frag = yaml.safe_load(gains_fragment(parse_scenario(blocks).gains))
    assert frag["gains"] == stacked["gains"]


def test_overrides():
    sc = load_scenario("example1")
    o = sc.with_overrides(dt=0.01, horizon=5.0, seed=9, budget=77)
    assert (o.dt, o.horizon, o.seed) == (0.01, 5.0, 9)
    assert o.synthesis.seed == 9 and o.synthesis.budget == 77 and o.noise.seed == 9
    assert sc.dt == 1e-3 and sc.synthesis.budget == 1500
    with pytest.raises(ConfigError):
        sc.with_overrides(dt=1.0, horizon=5.0)
    with pytest.raises(ConfigError):
        sc.with_overrides(budget=0)


def test_synthesis_seed_overrides_scenario_seed():
    data = base()
    data["seed"] = 4
    data["synthesis"] = {"seed": 9}
    sc = parse_scenario(data)
    assert sc.seed == 4 and sc.synthesis.seed == 9 and sc.noise.seed == 4
    data["synthesis"] = {}
    assert parse_scenario(data).synthesis.seed == 4


def test_infinite_bounds_accepted():
    data = base()
    data["synthesis"] = {"gamma0": ".inf", "nu0": math.inf}
    spec = parse_scenario(data).synthesis
    assert spec.gamma0 == math.inf and spec.nu0 == math.inf
