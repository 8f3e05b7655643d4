import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import BIPYRAMID_POSITIONS, STAR_POSITIONS
from signed_rigidity.framework import Framework, make_graph
from signed_rigidity.henneberg import random_signed_henneberg
from signed_rigidity.oracle import entry_fields, finite_difference_jacobian, random_framework
from signed_rigidity.rigidity import RigidityKind, signed_angle_values
from signed_rigidity.simulation import (
    ConstraintTargets,
    Controller,
    Integrator,
    SimulationConfig,
    SimulationError,
    Status,
    ambiguity_metrics,
    centroid_drift,
    congruent,
    control_velocity,
    energy_increase,
    formation_error,
    measure_targets,
    perturb,
    potential,
    simulate,
    static_trajectory,
    tail_decay_slope,
)

KIND_OF = {
    RigidityKind.DISTANCE_ONLY: Controller.DISTANCE_ONLY_BASELINE,
    RigidityKind.WEAK_DISTANCE_ANGLE: Controller.WEAK_BASELINE,
    RigidityKind.DISTANCE_SIGN_2D: Controller.DISTANCE_SIGNED,
    RigidityKind.DISTANCE_VOLUME_3D: Controller.DISTANCE_SIGNED,
    RigidityKind.ANGLE_SIGN_2D: Controller.ANGLE_SIGNED,
    RigidityKind.ANGLE_VOLUME_3D: Controller.ANGLE_SIGNED,
}

# Four agents, four angles and two signed angles (well-conditioned AngleSign2D target).
KITE_POSITIONS = np.array([[-0.829, -0.526], [0.603, 0.164], [-0.812, -0.134], [0.599, -1.144]])


def kite():
    g = make_graph(4, angles=[(0, 1, 2), (2, 0, 1), (2, 1, 3), (1, 2, 3)], signed_angles=[(1, 0, 2), (3, 2, 1)])
    return Framework(g, 2, KITE_POSITIONS)


def random_case(kind, seed):
    """Random framework, targets read off a second random realization, and the controller."""
    rng = np.random.default_rng(seed)
    fw = random_framework(kind, rng)
    other = fw.with_positions(fw.positions + 0.1 * rng.normal(size=fw.positions.shape), validate=False)
    return fw, measure_targets(other, gain_k=float(rng.uniform(0.5, 10))), KIND_OF[kind]


def test_error_vanishes_at_target(star_framework):
    tg = measure_targets(star_framework, 10.0)
    e = formation_error(star_framework, tg, "DistanceSigned")
    assert abs(e).max() < 1e-12
    assert abs(control_velocity(star_framework, tg, "DistanceSigned")).max() < 1e-12


def test_flipped_start_error_scaled_by_gain(star_framework):
    tg = ConstraintTargets(distance_sq_half=[4.5, 4.5, 12.5, 12.5], signed_sines=[1, 1, 1], gain_k=10)
    flipped = STAR_POSITIONS.copy()
    flipped[1] = [1.8, 2.4]
    e = formation_error(star_framework.with_positions(flipped), tg, "DistanceSigned")
    # oracle values: S(2;3,1) = -1 after the flip, so k (S - S*) = 10 (-1 - 1)
    np.testing.assert_allclose(e, [0, 0, 0, 0, -20, 0, 0], atol=1e-12)


@pytest.mark.parametrize("kind", list(KIND_OF))
@given(seed=st.integers(0, 2**32 - 1))
def test_error_norm_matches_direct_potential(kind, seed):
    fw, tg, ctrl = random_case(kind, seed)
    # phi summed directly from independently evaluated entries
    star = np.concatenate([np.asarray(v, float) for v in _stacked_targets(kind, tg)])
    vals = np.array([float(f(fw.p.astype(np.longdouble))) for f in entry_fields(fw.graph, fw.dim, kind, tg.gain_k)])
    phi = 0.5 * float(np.sum((vals - star) ** 2))
    e = formation_error(fw, tg, ctrl)
    assert e @ e == pytest.approx(2 * phi, rel=1e-9, abs=1e-14)
    assert potential(fw, tg, ctrl) == pytest.approx(phi, rel=1e-9, abs=1e-14)


def _stacked_targets(kind, tg):
    k = tg.gain_k
    out = []
    for fam in kind.families:
        if fam == "edge":
            w = 2.0 if kind is RigidityKind.WEAK_DISTANCE_ANGLE else 1.0
            out.append(w * np.asarray(tg.distance_sq_half))
        elif fam == "angle":
            out.append(tg.cosines)
        elif fam == "signed_angle":
            out.append(k * np.asarray(tg.signed_sines))
        else:
            out.append(k * np.asarray(tg.signed_volumes))
    return out


@pytest.mark.parametrize("kind", list(KIND_OF))
@given(seed=st.integers(0, 2**32 - 1))
def test_velocity_is_negative_gradient(kind, seed):
    fw, tg, ctrl = random_case(kind, seed)
    u = control_velocity(fw, tg, ctrl)

    def phi(x):
        return potential(fw.with_positions(np.asarray(x, float), validate=False), tg, ctrl)

    grad = finite_difference_jacobian(phi, fw.p, h=1e-6, dtype=float)
    scale = max(np.abs(grad).max(), 1e-8)
    assert np.abs(u + grad).max() <= 1e-5 * scale
    # rows sum to zero per coordinate, so u has no translation component
    assert np.abs(u.reshape(fw.n, fw.dim).sum(axis=0)).max() <= 1e-12 * max(1.0, np.abs(u).max() * fw.n)


def test_target_length_mismatch(star_framework):
    with pytest.raises(SimulationError, match="distance_sq_half"):
        formation_error(star_framework, ConstraintTargets(distance_sq_half=[1.0], signed_sines=[1, 1, 1]),
                        "DistanceSigned")


@pytest.mark.parametrize("kwargs, msg", [
    ({"distance_sq_half": [-1.0]}, "positive"),
    ({"signed_sines": [1.5]}, r"\[-1, 1\]"),
    ({"gain_k": 0.0}, "gain_k"),
])
def test_invalid_targets(kwargs, msg):
    with pytest.raises(SimulationError, match=msg):
        ConstraintTargets(**kwargs)


def test_invalid_integrators_and_configs(star_framework):
    tg = measure_targets(star_framework, 10.0)
    with pytest.raises(SimulationError):
        Integrator(step=0.0)
    with pytest.raises(SimulationError):
        Integrator(step=1.0, horizon=0.5)
    with pytest.raises(SimulationError):
        SimulationConfig(star_framework, tg, "DistanceSigned", stop_tolerance=0.0)
    with pytest.raises(SimulationError, match="angle"):
        SimulationConfig(star_framework, tg, "AngleSigned")
    plain = Framework(make_graph(5, edges=[(0, 1)]), 2, STAR_POSITIONS)
    with pytest.raises(SimulationError, match="signed"):
        SimulationConfig(plain, measure_targets(plain), "DistanceSigned")


def test_start_at_target_converges_immediately(star_framework):
    tg = measure_targets(star_framework, 10.0)
    traj = simulate(SimulationConfig(star_framework, tg, "DistanceSigned"))
    assert traj.status is Status.CONVERGED and len(traj) == 1 and traj.times[-1] == 0.0
    np.testing.assert_array_equal(traj.positions[-1], STAR_POSITIONS)


@pytest.fixture(scope="module")
def bipyramid_run():
    g = make_graph(5, edges=[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)],
                   signed_volumes=[(1, 0, 2, 3), (1, 4, 2, 3)])
    ref = Framework(g, 3, BIPYRAMID_POSITIONS)
    tg = measure_targets(ref, 10.0)
    start = perturb(BIPYRAMID_POSITIONS, 0.05, np.random.default_rng(5))
    return ref, tg, simulate(SimulationConfig(ref.with_positions(start), tg, "DistanceSigned",
                                              Integrator(step=1e-3, horizon=10.0)))


def test_bipyramid_run_converges_cleanly(bipyramid_run):
    ref, tg, traj = bipyramid_run
    assert traj.status is Status.CONVERGED
    assert traj.error_norms[-1] <= 1e-8
    dt = np.diff(traj.times)
    assert np.all(dt > 0) and np.allclose(dt, 1e-3)
    assert energy_increase(traj) <= 1e-9
    assert tail_decay_slope(traj) < 0
    assert centroid_drift(traj) <= 1e-9
    m = ambiguity_metrics(traj, tg, BIPYRAMID_POSITIONS)
    assert m.residuals_met and all(m.sign_agreement) and m.congruent_to_reference
    assert not m.flip and not m.flex


def test_hand_mirrored_state_is_flagged_flip(bipyramid_run):
    ref, tg, traj = bipyramid_run
    mirrored = traj.positions[-1] * [1, 1, -1]
    m = ambiguity_metrics(static_trajectory(ref.with_positions(mirrored), tg, "DistanceSigned"), tg,
                          BIPYRAMID_POSITIONS)
    assert m.residuals_met and m.flip and not m.flex
    assert m.sign_agreement == [False, False]


def test_flex_is_flagged_for_a_deformed_quadrilateral():
    g = make_graph(4, edges=[(0, 1), (1, 2), (2, 3), (0, 3)])
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    a = np.deg2rad(80)
    sheared = np.array([[0, 0], [1, 0], [1 + np.cos(a), np.sin(a)], [np.cos(a), np.sin(a)]])
    ref = Framework(g, 2, square)
    tg = measure_targets(ref)
    m = ambiguity_metrics(static_trajectory(ref.with_positions(sheared), tg, "DistanceOnlyBaseline"), tg, square)
    assert m.residuals_met and not m.congruent_to_reference and m.flex and not m.flip


def test_angle_signed_converges_to_similar_shape():
    fw = kite()
    tg = measure_targets(fw, 2.0)
    start = perturb(KITE_POSITIONS, 0.03, np.random.default_rng(0))
    traj = simulate(SimulationConfig(fw.with_positions(start), tg, "AngleSigned", Integrator(step=1e-2, horizon=60)))
    assert traj.status is Status.CONVERGED
    m = ambiguity_metrics(traj, tg, KITE_POSITIONS)
    assert m.congruent_to_reference and not m.flip and not m.flex
    assert centroid_drift(traj) <= 1e-9
    assert energy_increase(traj) <= 1e-9
    # scale is free, so this is similarity rather than congruence
    assert not congruent(traj.positions[-1], KITE_POSITIONS)


def test_runaway_flow_is_reported_as_divergence(star_framework):
    tg = measure_targets(star_framework, 10.0)
    start = perturb(STAR_POSITIONS, 0.2, np.random.default_rng(1))
    traj = simulate(SimulationConfig(star_framework.with_positions(start), tg, "DistanceSigned",
                                     Integrator(step=5.0, horizon=500.0)))
    assert traj.status is Status.DIVERGED
    assert len(traj) >= 1 and np.all(np.isfinite(traj.positions))


@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 0.2))
def test_perturbation_is_bounded_and_seeded(seed, frac):
    P = perturb(STAR_POSITIONS, frac, np.random.default_rng(seed))
    Q = perturb(STAR_POSITIONS, frac, np.random.default_rng(seed))
    np.testing.assert_array_equal(P, Q)
    diameter = max(np.linalg.norm(a - b) for a in STAR_POSITIONS for b in STAR_POSITIONS)
    assert np.linalg.norm(P - STAR_POSITIONS, axis=1).max() <= frac * diameter + 1e-12


@given(seed=st.integers(0, 2**32 - 1))
def test_congruence_ignores_proper_rigid_motion_but_not_reflection(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(6, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    Q *= np.sign(np.linalg.det(Q))
    moved = P @ Q.T + rng.normal(size=3)
    assert congruent(moved, P)
    assert not congruent(moved * [1, 1, -1], P)
    assert congruent(2.5 * moved, P, similar=True)


def test_signed_angles_of_reference_are_positive(star_framework):
    np.testing.assert_allclose(signed_angle_values(star_framework.graph, STAR_POSITIONS), 1.0)


@settings(max_examples=10)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 3]))
def test_short_flows_descend_and_keep_centroid(seed, dim):
    rng = np.random.default_rng(seed)
    ref = random_signed_henneberg(int(rng.integers(dim + 1, dim + 4)), dim, rng, max_signed=0.9, scale=3.0)
    tg = measure_targets(ref, 10.0)
    start = perturb(ref.positions, 0.05, rng)
    traj = simulate(SimulationConfig(ref.with_positions(start), tg, "DistanceSigned", Integrator(horizon=1.0)))
    assert traj.status is not Status.DIVERGED
    assert energy_increase(traj) <= 1e-9
    assert centroid_drift(traj) <= 1e-9 * max(1.0, np.abs(start).max())
