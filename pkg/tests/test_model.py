import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iidgen import Exosystem, GainSet, LmiRegion, Plant, validate_scenario
from iidgen.errors import ConfigError
from iidgen.model import Const, MatrixExpr, Sin, Sum, parse_expr

from _cases import ROT


def test_exosystem_is_read_only():
    exo = Exosystem(ROT, [1, 0], [1, 1])
    assert exo.m == 2
    with pytest.raises(ValueError):
        exo.S[0, 0] = 3.0


def test_matrix_expr_evaluates_scalar_and_array_times():
    A = MatrixExpr(((Sin(0.2, 0.05, 0.0), Const(1.0)), (Const(-1.0), Const(1.0))))
    assert A(0.0).shape == (2, 2)
    t = np.linspace(0, 10, 7)
    stack = A(t)
    assert stack.shape == (7, 2, 2)
    assert np.allclose(stack[:, 0, 0], 0.2 * np.sin(0.05 * t))
    assert np.all(stack[:, 1, 0] == -1.0)


def test_expression_config_round_trip():
    node = {"sum": [1.0, {"scale": {"factor": 2.0, "arg": {"sin": {"amplitude": 0.5,
                                                                  "frequency": 3.0,
                                                                  "phase": 0.1}}}}]}
    expr = parse_expr(node)
    assert parse_expr(expr.to_config()).to_config() == expr.to_config()
    assert expr(0.3) == pytest.approx(1.0 + 2.0 * 0.5 * math.sin(0.9 + 0.1))
    assert isinstance(parse_expr(2), Const)
    assert isinstance(Sum((Const(1.0),)), Sum)


@pytest.mark.parametrize("node", [True, {"cos": {}}, {"sin": {"omega": 1}}, {"sum": []}, "x"])
def test_bad_expressions_name_their_path(node):
    with pytest.raises(ConfigError, match="A_expr"):
        parse_expr(node, "A_expr")


def test_time_varying_plant_requires_frozen_matrix():
    A = MatrixExpr(((Const(1.0),),))
    with pytest.raises(ValueError):
        Plant(A, ([1.0],))
    p = Plant(A, ([1.0],), [[1.0]])
    assert p.time_varying and p.n == 1
    const = Plant([[2.0]], ([1.0],))
    assert not const.time_varying
    assert np.array_equal(const.frozen_A, [[2.0]])
    assert const.A_at(np.zeros(4)).shape == (4, 1, 1)


def test_gainset_stacking():
    g = GainSet.from_stacked([1, 0, 1], [536.0, 1074.6, -974.3, -21.9], m=2)
    assert g.m == 2 and g.n == 1
    assert np.array_equal(g.L11, [1, 0]) and np.array_equal(g.L12, [1])
    assert np.array_equal(g.L21, [536.0, 1074.6]) and g.L3 == -21.9
    assert GainSet.from_stacked(g.L1, g.L23, 2) == g
    with pytest.raises(ValueError):
        GainSet.from_stacked([1, 0, 1], [1, 2, 3], m=2)


def test_example_region_membership():
    region = LmiRegion.example_region()
    assert region.problems() == []
    inside = [-5.0, -1.5 + 1j, -9.0 + 8j]
    outside = [-0.5, -11.0, -1.5 + 4j, 0.0, 1.0]
    assert region.contains(inside).all()
    assert not region.contains(outside).any()
    # the sector edge: |Im| = tan(3 pi / 8) |Re|
    edge = -2.0 + 2.0j * math.tan(3 * math.pi / 8)
    assert abs(region.margin(edge)) < 1e-12


@pytest.mark.parametrize("region", [LmiRegion.strip(0, 1), LmiRegion.conic_sector(4.0),
                                    LmiRegion.intersection([])])
def test_invalid_regions_report_problems(region):
    assert region.problems()


@settings(max_examples=300, deadline=None)
@given(st.floats(-15, 3), st.floats(-15, 15))
def test_lmi_form_matches_geometric_margin(re, im):
    region = LmiRegion.intersection([LmiRegion.conic_sector(3 * math.pi / 4),
                                     LmiRegion.strip(-10, -1), LmiRegion.half_plane(-0.5)])
    z = complex(re, im)
    margin = float(region.margin(z))
    if abs(margin) > 1e-6:
        assert region.contains_qm(z) == (margin > 0)


def test_region_to_config_lists_parts():
    cfg = LmiRegion.example_region().to_config()
    assert cfg == {"sector_inner_angle": 3 * math.pi / 4, "strip": [-10.0, -1.0]}


def test_validation_collects_dimension_errors():
    exos = [Exosystem(ROT, [1, 0, 0], [1, 1]), Exosystem(2 * ROT, [1, 0], [1, 1])]
    plant = Plant([[0.0]], ([1.0, 2.0],))
    report = validate_scenario(exos, plant, GainSet([1], [1], [1], [1], 0.0))
    paths = {i.path for i in report.errors}
    assert {"exosystems[0].E", "exosystems[1].S", "plant.N[0]", "plant.N", "gains.L11",
            "gains.L21"} <= paths
    assert not report.ok


def test_validation_warns_on_shared_eigenvalue_and_growing_forcing():
    report = validate_scenario([Exosystem(ROT, [1, 0], [1, 1])], Plant(ROT, ([1.0, 0.0],)))
    assert report.ok
    assert [w.path for w in report.warnings] == ["plant.frozen_A"]
    growing = validate_scenario([Exosystem([[0.1]], [1], [1])], Plant([[0.0]], ([1.0],)))
    assert [w.path for w in growing.warnings] == ["exosystems[0].S"]


def test_validation_accepts_examples():
    from iidgen import load_scenario

    for name in ("example1", "example1_noise", "example2"):
        sc = load_scenario(name)
        assert len(validate_scenario(sc.exosystems, sc.plant, sc.gains)) == 0
