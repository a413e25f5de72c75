import warnings

import numpy as np
import pytest

from homotrack.polysys import PolynomialSystem, eval_system, parse_system, serialize_system, variables
from homotrack.problems import (
    TrackBudgetExceeded,
    gen_cyclic,
    gen_eco,
    read_start_pair,
    total_degree_start,
    write_start_pair,
)
from homotrack.problems import geometry as geo
from homotrack.problems import vision
from homotrack.tracker import TrackerConfig, solve


# ------------------------------------------------------------------ starts


def test_total_degree_single_linear():
    pair = total_degree_start([1])
    assert len(pair.solutions) == 1
    assert pair.max_residual() < 1e-10


def test_total_degree_squares():
    pair = total_degree_start([2, 2, 2], seed=3)
    assert len(pair.solutions) == 8
    assert pair.max_residual() < 1e-10
    # each coordinate is one of the two square roots
    for i in range(3):
        assert len({round(complex(v).real, 9) for v in pair.solutions[:, i]}) == 2


def test_total_degree_cyclic7_count():
    pair = total_degree_start(gen_cyclic(7).degrees)
    assert len(pair.solutions) == 5040
    assert len({tuple(np.round(s, 8)) for s in pair.solutions}) == 5040
    assert pair.max_residual() < 1e-10


def test_track_budget():
    with pytest.raises(TrackBudgetExceeded, match="track budget exceeded"):
        total_degree_start([10] * 8)
    with pytest.raises(ValueError):
        total_degree_start([0, 1])


def test_start_pair_files(tmp_path):
    pair = total_degree_start([2, 3], seed=1)
    write_start_pair(pair, tmp_path / "g.txt", tmp_path / "g.sols")
    back = read_start_pair(tmp_path / "g.txt", tmp_path / "g.sols")
    assert back.system == pair.system
    assert np.array_equal(back.solutions, pair.solutions)


# -------------------------------------------------------------- benchmarks


def test_cyclic3_by_hand():
    x1, x2, x3 = variables(3)
    want = PolynomialSystem(3, [x1 + x2 + x3, x1 * x2 + x2 * x3 + x3 * x1, x1 * x2 * x3 - 1])
    assert gen_cyclic(3) == want


def test_cyclic_shapes():
    s = gen_cyclic(7)
    assert s.num_vars == 7 and s.degrees == list(range(1, 8))
    for bad in (2, 10):
        with pytest.raises(ValueError):
            gen_cyclic(bad)


def test_eco_shape():
    s = gen_eco(12)
    assert s.num_vars == 12
    assert s.degrees == [2] * 11 + [1]
    assert s.bezout_number == 2048
    for bad in (2, 13):
        with pytest.raises(ValueError):
            gen_eco(bad)


def test_eco_forms_share_solutions():
    quad, cubic = gen_eco(5), gen_eco(5, form="cubic")
    sset, *_ = solve(quad)
    assert len(sset) == 8
    for s in sset.solutions:
        assert np.abs(eval_system(cubic, s.x)).max() < 1e-9


def test_eco4_count_agrees_between_start_draws():
    counts = {len(solve(gen_eco(4), config=TrackerConfig(seed=s))[0]) for s in (0, 1)}
    assert counts == {4}


# ------------------------------------------------------------------ geometry


def test_quaternion_round_trip(rng):
    for _ in range(20):
        R = geo.random_rotation(rng)
        q = geo.rot_to_quat(R)
        assert abs(np.linalg.norm(q) - 1) < 1e-14 and q[0] >= 0
        assert np.abs(geo.quat_to_rot(q) - R).max() < 1e-12
        assert geo.is_rotation(geo.quat_to_rot(q))


def test_essential_matrix_properties(rng):
    R, T = geo.random_rotation(rng), rng.normal(size=3)
    E = geo.essential(R, T)
    X1 = rng.normal(size=3) + [0, 0, 5]
    X2 = R @ X1 + T
    assert abs(X2 @ E @ X1) < 1e-12
    assert np.abs(2 * E @ E.T @ E - np.trace(E @ E.T) * E).max() < 1e-12


def test_pose_gt_validation():
    with pytest.raises(ValueError):
        vision.PoseGT(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


# ------------------------------------------------------------------ shapes


SHAPES = {"trace3": 3, "p3p": 3, "tri2": 5, "tri3": 9, "tri4": 14, "relpose5": 16, "trifocalF": 18}


@pytest.mark.parametrize("kind", sorted(SHAPES))
def test_builder_shapes(kind):
    inst, _ = vision.synth_instance(kind, 0)
    s = vision.build_system(inst)
    assert (s.num_vars, s.num_eqs) == (SHAPES[kind], SHAPES[kind])


@pytest.mark.parametrize("kind", sorted(SHAPES))
@pytest.mark.parametrize("seed", range(5))
def test_ground_truth_residual(kind, seed):
    inst, pose = vision.synth_instance(kind, seed)
    s = vision.build_system(inst)
    assert np.abs(s(inst.gt_vector())).max() < 1e-10
    assert geo.is_rotation(pose.R)


def test_degrees():
    inst, _ = vision.synth_instance("p3p", 0)
    assert vision.build_system(inst).degrees == [2, 2, 2]
    inst, _ = vision.synth_instance("trace3", 0)
    s = vision.build_system(inst)
    assert max(s.degrees) == 3
    # 20 monomials of degree <= 3 in three unknowns bound each cubic's support
    assert all(len(eq.terms) <= 20 for eq in s.equations)


def test_p3p_seed1_residual():
    inst, _ = vision.synth_instance("p3p", 1)
    assert np.abs(vision.build_system(inst)(inst.gt_vector())).max() < 1e-12


def test_p3p_solutions_and_pose():
    inst, pose = vision.synth_instance("p3p", 2)
    sset, *_ = solve(vision.build_system(inst))
    assert len(sset) == 8
    d = np.abs(sset.points - inst.gt_vector()).max(1)
    assert d.min() < 1e-8
    physical = [p for p in sset.real_points if np.all(p > 0)]
    assert 1 <= len(physical) <= 4
    R, T = vision.p3p_pose(inst.world, inst.points[0], inst.gt_vector())
    assert np.abs(R - pose.R).max() < 1e-10 and np.abs(T - pose.T).max() < 1e-10


def test_p3p_collinear_rejected():
    world = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]])
    rays = np.array([[0, 0, 1], [0.1, 0, 1], [0, 0.1, 1.0]])
    with pytest.raises(vision.DegenerateConfiguration):
        vision.build_p3p_depth(world, rays)


def test_trace_recovers_alpha_and_essential():
    inst, pose = vision.synth_instance("trace3", 4)
    g1, g2 = inst.points
    sset, *_ = solve(vision.build_system(inst))
    alpha = inst.gt_vector()
    d = np.abs(sset.points - alpha).max(1)
    assert d.min() < 1e-8
    E = vision.essential_from_alpha(g1, g2, sset.points[np.argmin(d)].real)
    eps = np.einsum("ia,ab,ib->i", g2, E, g1)
    assert np.abs(eps).max() < 1e-10
    # up to scale the recovered E equals [T]x R
    Egt = geo.essential(pose.R, pose.T)
    s = (E.ravel() @ Egt.ravel()) / (E.ravel() @ E.ravel())
    assert np.abs(s * E - Egt).max() < 1e-8


def test_trace_rank_deficient():
    g = np.array([[0.1, 0.2, 1.0]] * 5)
    with pytest.raises(vision.DegenerateConfiguration):
        vision.build_trace_constraint(g, g)


def test_trace_entry_selection_is_configurable():
    inst, _ = vision.synth_instance("trace3", 1)
    s = vision.build_trace_constraint(*inst.points, entries=((2, 2), (0, 2), (1, 1)))
    assert np.abs(s(inst.gt_vector())).max() < 1e-10
    with pytest.raises(ValueError):
        vision.build_trace_constraint(*inst.points, entries=((0, 0), (0, 0), (1, 1)))


def test_relpose_coincident_points_warn():
    inst, _ = vision.synth_instance("relpose5", 0)
    g1, g2 = inst.points
    g1 = g1.copy()
    g1[1] = g1[0]
    with pytest.warns(vision.DegenerateConfigurationWarning):
        vision.build_relpose_depth(g1, g2)


def test_relpose_quaternion_from_gt():
    inst, pose = vision.synth_instance("relpose5", 3)
    q = inst.gt_vector()[:4]
    assert np.abs(geo.quat_to_rot(q / np.linalg.norm(q)) - pose.R).max() < 1e-8


def test_image_point_validation():
    with pytest.raises(ValueError):
        vision.build_p3p_depth(np.eye(3), [[0, 0, 2.0]] * 3)
    with pytest.raises(ValueError):
        vision.build_relpose_depth(np.ones((4, 3)), np.ones((4, 3)))


def test_triangulation_noiseless_zero_correction():
    inst, _ = vision.synth_instance("triangulation3", 0)
    s = vision.build_system(inst)
    assert np.abs(s(np.zeros(9))).max() < 1e-15


def test_triangulation_errors():
    inst, _ = vision.synth_instance("tri3", 0)
    with pytest.raises(ValueError):
        vision.build_triangulation(inst, 5)
    del inst.E[(0, 2)]
    with pytest.raises(ValueError, match="missing"):
        vision.build_triangulation(inst, 3)


def test_triangulation_e_satisfies_trace_constraint():
    inst, _ = vision.synth_instance("tri4", 1)
    for E in inst.E.values():
        assert np.abs(2 * E @ E.T @ E - np.trace(E @ E.T) * E).max() < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_two_view_oracle(seed):
    """Lowest-cost real critical point equals the degree-6 univariate solution."""
    inst, _ = vision.synth_instance("tri2", seed, noise=3.0)
    sset, *_ = solve(vision.build_system(inst))
    best = vision.best_triangulation(sset.real_points, 2)
    h1, h2 = vision.hartley_sturm(inst.points[0][0], inst.points[1][0], inst.E[(0, 1)])
    want = np.r_[inst.points[0][0][:2] - h1[:2], inst.points[1][0][:2] - h2[:2]]
    assert np.abs(best[:4] - want).max() < 1e-8


def test_hartley_sturm_corrected_points_are_consistent(rng):
    inst, _ = vision.synth_instance("tri2", 7, noise=5.0)
    E = inst.E[(0, 1)]
    h1, h2 = vision.hartley_sturm(inst.points[0][0], inst.points[1][0], E)
    assert abs(h2 @ E @ h1) < 1e-12


def test_trifocal_view_pair_equations():
    """Both motion equations hold at ground truth with the eliminated depth."""
    inst, pose = vision.synth_instance("trifocalF", 2)
    x = inst.gt_vector()
    f, q12, T12 = x[0], x[1:5], x[9:12]
    rho = np.r_[1.0, x[15:18]]
    R = geo.quat_to_rot(q12)
    for p in range(4):
        g1 = np.r_[inst.points[0][p, :2], f]
        rhs = rho[p] * R @ g1 + f * T12
        rho2 = rhs[2] / f
        g2 = np.r_[inst.points[1][p, :2], f]
        assert np.abs(rho2 * g2 - rhs).max() < 1e-10
    assert np.abs(vision.build_system(inst)(x)).max() < 1e-10


def test_instance_json_round_trip(tmp_path):
    for kind in ("tri3", "p3p", "trifocalF"):
        inst, _ = vision.synth_instance(kind, 5)
        vision.write_instance(tmp_path / "i.json", inst)
        back = vision.read_instance(tmp_path / "i.json")
        assert back.kind == kind
        assert serialize_system(vision.build_system(back)) == serialize_system(vision.build_system(inst))
        assert np.array_equal(back.gt_vector(), inst.gt_vector())


def test_built_systems_serialize():
    inst, _ = vision.synth_instance("relpose5", 1)
    s = vision.build_system(inst)
    assert parse_system(serialize_system(s)) == s


def test_noise_changes_observations_only():
    a, _ = vision.synth_instance("tri3", 2)
    b, _ = vision.synth_instance("tri3", 2, noise=1.0)
    assert not np.array_equal(a.points[0], b.points[0])
    assert all(np.array_equal(a.E[k], b.E[k]) for k in a.E)
    assert b.gt_vector() is None


def test_unknown_kind():
    with pytest.raises(ValueError):
        vision.synth_instance("p4p", 0)


def test_no_warning_for_generic_instances():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for kind in ("relpose5", "trifocalF"):
            vision.build_system(vision.synth_instance(kind, 0)[0])
