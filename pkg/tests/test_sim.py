import numpy as np
import pytest

from iidgen import Exosystem, GainSet, NoiseSpec, Plant, build_augmented, exosystem_propagate, simulate
from iidgen.errors import InsufficientWindow, StateBlowup
from iidgen.sim import (
    compute_max_state,
    compute_tail_bound,
    deviation_amplitude,
    linear_recurrence,
    residual,
    superposition_check,
)

from _cases import ROT, example1_generator, example2_generator


def test_rotation_exosystem_closed_form():
    exo = Exosystem(ROT, [1, 0], [1, 1])
    t = np.array([0.0, np.pi / 2, np.pi, 7.3])
    want = np.column_stack([np.cos(t) + np.sin(t), np.cos(t) - np.sin(t)])
    assert np.allclose(exosystem_propagate(exo, t), want, atol=1e-14)
    assert np.array_equal(exosystem_propagate(exo, 0.0), [1.0, 1.0])
    still = Exosystem(np.zeros((2, 2)), [1, 0], [3, -2])
    assert np.array_equal(exosystem_propagate(still, [0.0, 5.0, 1e3]), [[3, -2]] * 3)
    with pytest.raises(ValueError):
        exosystem_propagate(exo, -1.0)


def test_trace_layout_and_recomputable_metrics():
    sc, gen = example1_generator()
    tr = simulate(gen, sc.exosystems, sc.plant, 5.0, 1e-2)
    assert tr.times.size == 501 and np.allclose(np.diff(tr.times), 1e-2, rtol=0, atol=1e-15)
    assert np.array_equal(np.hstack([tr.v, tr.eta_hat, tr.e[:, None]]), tr.x)
    assert tr.tail_bound == compute_tail_bound(tr.times, tr.y)
    assert tr.max_state == compute_max_state(tr.x)
    assert tr.w.shape == (1, 501, 2) and tr.xi.shape == (501, 1) and tr.y.shape == (501, 1)


def test_example1_tracks_exact_solution():
    sc, gen = example1_generator()
    tr = simulate(gen, sc.exosystems, sc.plant, 30.0, 1e-3)
    late = tr.times > 15
    err = np.abs(tr.eta_hat[late, 0] - (np.sin(tr.times[late]) - np.cos(tr.times[late])))
    assert err.max() < 1e-2
    assert tr.tail_bound < 1e-3


def test_residual_equals_L12_times_e():
    sc, gen = example2_generator()
    const = Plant(sc.plant.frozen_A, sc.plant.N_list)
    tr = simulate(gen, sc.exosystems, const, 20.0, 1e-3)
    want = np.outer(tr.e, gen.gains.L12)
    assert np.abs(tr.y - want).max() <= 1e-12 * max(1.0, tr.max_state)


def test_residual_trivial_points():
    sc, gen = example1_generator()
    assert np.array_equal(residual(gen, sc.plant, 0.0, np.zeros(4), np.zeros(1)), [0.0])
    x = np.array([0.3, -1.0, 2.0, 0.0])
    assert np.abs(residual(gen, sc.plant, 1.0, x, np.array([0.7]))).max() < 1e-15


def test_recurrence_and_stage_loop_agree():
    sc, gen = example1_generator()
    a = simulate(gen, sc.exosystems, sc.plant, 10.0, 1e-3)
    b = simulate(gen, sc.exosystems, sc.plant, 10.0, 1e-3, method="stages")
    assert np.abs(a.x - b.x).max() <= 1e-11 * a.max_state


def test_linear_recurrence_matches_loop():
    rng = np.random.default_rng(0)
    Phi = 0.3 * rng.normal(size=(3, 3))
    z = rng.normal(size=(37, 3))
    want = z.copy()
    for k in range(1, 37):
        want[k] = Phi @ want[k - 1] + z[k]
    assert np.allclose(linear_recurrence(Phi, z), want, atol=1e-12)


def test_zero_gains_drift_stays_bounded():
    sc, _ = example1_generator()
    gen = build_augmented(ROT, [[0.0]], GainSet([0, 0], [0], [0, 0], [0], 0.0), [[1.0]])
    tr = simulate(gen, sc.exosystems, sc.plant, 30.0, 1e-3)
    # A = 0 integrates sin + cos: eta_hat = 1 + sin t - cos t, bounded by 1 + sqrt(2)
    assert tr.max_state == pytest.approx(1 + np.sqrt(2), rel=1e-6)


def test_unstable_gains_blow_up():
    sc, _ = example1_generator()
    gen = build_augmented(ROT, [[0.0]], GainSet([1, 0], [1], [0, 0], [1], 5.0), [[1.0]])
    with pytest.raises(StateBlowup) as info:
        simulate(gen, sc.exosystems, sc.plant, 60.0, 1e-3)
    assert 0 < info.value.time < 60


def test_tail_bound_shrinks_with_horizon():
    sc, gen = example1_generator()
    tails = [simulate(gen, sc.exosystems, sc.plant, T, 1e-3).tail_bound for T in (8.0, 15.0, 30.0)]
    assert tails[0] > tails[1] > tails[2]
    # past 30 s the integrator's own steady-state defect is the floor
    t60 = simulate(gen, sc.exosystems, sc.plant, 60.0, 1e-3).tail_bound
    assert t60 <= tails[2] * (1 + 1e-3)


def test_step_halving_keeps_tail_bound():
    sc, gen = example1_generator()
    a = simulate(gen, sc.exosystems, sc.plant, 15.0, 1e-3).tail_bound
    b = simulate(gen, sc.exosystems, sc.plant, 15.0, 5e-4).tail_bound
    assert abs(a - b) < 1e-2 * a


def test_example2_time_varying_bounded():
    sc, gen = example2_generator()
    tr = simulate(gen, sc.exosystems, sc.plant, 40.0, 1e-3)
    assert np.isfinite(tr.max_state) and tr.max_state < 1e3


def test_superposition_and_cancellation():
    sc, gen = example2_generator()
    tr = simulate(gen, sc.exosystems, sc.plant, 20.0, 1e-3)
    assert superposition_check(gen, sc.exosystems, sc.plant, 20.0, 1e-3) <= 1e-10 * tr.max_state

    sc1, gen1 = example1_generator()
    exo = sc1.exosystems[0]
    pair = build_augmented(ROT, [[0.0]], gen1.gains, [[1.0], [-1.0]])
    tr = simulate(pair, [exo, exo], Plant([[0.0]], ([1.0], [-1.0])), 5.0, 1e-3)
    assert np.all(tr.x == 0)
    with pytest.raises(ValueError):
        superposition_check(gen1, sc1.exosystems, sc1.plant, 5.0, 1e-3)


def test_noise_response_is_linear_in_amplitude():
    sc, gen = example1_generator()
    nominal = simulate(gen, sc.exosystems, sc.plant, 20.0, 1e-3)
    noise = NoiseSpec.sinusoid(0.1, 2.0, 0.3)
    d1 = deviation_amplitude(simulate(gen, sc.exosystems, sc.plant, 20.0, 1e-3, noise), nominal)
    d2 = deviation_amplitude(simulate(gen, sc.exosystems, sc.plant, 20.0, 1e-3, noise.scaled(2.0)),
                             nominal)
    assert d2 / d1 == pytest.approx(2.0, rel=1e-6)


def test_uniform_noise_is_reproducible():
    sc, gen = example2_generator()
    noise = NoiseSpec.uniform(0.05, seed=4)
    a = simulate(gen, sc.exosystems, sc.plant, 10.0, 1e-3, noise)
    b = simulate(gen, sc.exosystems, sc.plant, 10.0, 1e-3, noise)
    c = simulate(gen, sc.exosystems, sc.plant, 10.0, 1e-3, NoiseSpec.uniform(0.05, seed=5))
    assert np.array_equal(a.x, b.x) and not np.array_equal(a.x, c.x)
    assert np.abs(a.eps).max() <= 0.05


def test_argument_checks():
    sc, gen = example1_generator()
    with pytest.raises(ValueError):
        simulate(gen, sc.exosystems, sc.plant, 1e-3, 1e-3)
    with pytest.raises(ValueError):
        simulate(gen, sc.exosystems, sc.plant, 1.0, 0.0)
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", 1.0)
    short = simulate(gen, sc.exosystems, sc.plant, 0.01, 1e-3)
    with pytest.raises(InsufficientWindow):
        deviation_amplitude(short, short, settle_fraction=1.5)
