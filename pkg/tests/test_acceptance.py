"""Acceptance suite: one marked group per criterion, summarized at the end of the run."""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import crandn
from homotrack import cli
from homotrack.batchla import LinearProblem, naive_solve, solve_batch
from homotrack.homotopy import eval_H, eval_Jt, eval_Jx
from homotrack.polysys import (
    PolynomialSystem,
    Polynomial,
    compile_homotopy,
    eval_system,
    serialize_solutions,
    serialize_system,
)
from homotrack.problems import gen_cyclic, gen_eco, read_start_pair, total_degree_start
from homotrack.problems.vision import best_triangulation, build_system, build_triangulation, synth_instance
from homotrack.tracker import correct, solve, track_many

RESIDUAL_TOL = 1e-8
FIXTURES = Path(os.environ.get("HC_FIXTURES", Path(__file__).parent / "fixtures"))


def max_residual(F, points):
    return max((np.abs(eval_system(F, p)).max() for p in points), default=0.0)


@pytest.fixture(scope="module")
def benchmarks():
    out = {}
    for F in (gen_cyclic(7), gen_eco(12)):
        sset, results, _ = solve(F)
        out[F.name] = (F, sset, results)
    return out


# --- 1: benchmark solution counts ---------------------------------------

@pytest.mark.slow
@pytest.mark.acceptance(1)
@pytest.mark.parametrize("name, tracks, count", [("cyclic-7", 5040, 924), ("eco-12", 2048, 1024)])
def test_ac1_benchmark_counts(benchmarks, name, tracks, count):
    F, sset, results = benchmarks[name]
    assert len(results) == tracks
    assert len(sset) == count
    assert max_residual(F, sset.points) < RESIDUAL_TOL


# --- 2: residual accuracy over the corpus --------------------------------

CORPUS_VISION = [("p3p", s) for s in range(3)] + [("trace3", s) for s in range(3)] + \
                [("tri2", s) for s in range(3)] + [("tri3", 0)]


def _verify_cli(tmp_path, F, points):
    sys_path, sol_path = tmp_path / "F.txt", tmp_path / "S.txt"
    sys_path.write_text(serialize_system(F))
    sol_path.write_text(serialize_solutions(points))
    return cli.main(["verify", "--system", str(sys_path), "--solutions", str(sol_path), "--tol", str(RESIDUAL_TOL)])


@pytest.mark.slow
@pytest.mark.acceptance(2)
def test_ac2_benchmark_endpoints(benchmarks, tmp_path):
    for name, (F, _, results) in benchmarks.items():
        ends = np.array([r.x for r in results if r.converged])
        assert max_residual(F, ends) < RESIDUAL_TOL, name
        assert _verify_cli(tmp_path, F, ends) == 0, name


@pytest.mark.acceptance(2)
@pytest.mark.parametrize("make", [lambda: gen_cyclic(5), lambda: gen_eco(6), lambda: gen_eco(8)])
def test_ac2_small_benchmarks(make, tmp_path):
    F = make()
    _, results, _ = solve(F)
    ends = np.array([r.x for r in results if r.converged])
    assert len(ends) and max_residual(F, ends) < RESIDUAL_TOL
    assert _verify_cli(tmp_path, F, ends) == 0


@pytest.mark.acceptance(2)
@pytest.mark.parametrize("kind, seed", CORPUS_VISION)
@pytest.mark.parametrize("noise", [0.0, 1.0])
def test_ac2_vision_endpoints(kind, seed, noise, tmp_path):
    inst, _ = synth_instance(kind, seed, noise=noise)
    F = build_system(inst)
    _, results, _ = solve(F)
    ends = np.array([r.x for r in results if r.converged])
    assert len(ends) and max_residual(F, ends) < RESIDUAL_TOL
    assert _verify_cli(tmp_path, F, ends) == 0


# --- 3: ground-truth recovery -------------------------------------------

@pytest.mark.acceptance(3)
@pytest.mark.parametrize("kind", ["p3p", "trace3", "tri2"])
def test_ac3_ground_truth_recovered(kind):
    misses = []
    for seed in range(20):
        inst, _ = synth_instance(kind, seed)
        sset, _, _ = solve(build_system(inst))
        gt = inst.gt_vector()
        dist = np.abs(sset.points - gt).max(axis=1).min() if len(sset) else np.inf
        if not dist <= 1e-6:
            misses.append((seed, dist))
    assert misses == []


# --- 4: builder shapes ---------------------------------------------------

@pytest.mark.acceptance(4)
@pytest.mark.parametrize("kind, n", [("trace3", 3), ("p3p", 3), ("tri2", 5), ("tri3", 9), ("tri4", 14),
                                     ("relpose5", 16), ("trifocalF", 18)])
def test_ac4_shapes(kind, n):
    F = build_system(synth_instance(kind, 0)[0])
    assert (F.num_vars, len(F.equations)) == (n, n)


# --- 5: supplied start systems ---------------------------------------------

def _fixture_pair(kind):
    sys_path, sol_path = FIXTURES / f"{kind}.start.txt", FIXTURES / f"{kind}.start.sols"
    if not (sys_path.exists() and sol_path.exists()):
        pytest.skip(f"start-system fixtures for {kind} not present in {FIXTURES}")
    return read_start_pair(sys_path, sol_path)


@pytest.mark.acceptance(5)
@pytest.mark.parametrize("kind, count", [("tri3", 94), ("tri4", 296), ("trifocalF", 1784)])
def test_ac5_supplied_start_counts(kind, count):
    pair = _fixture_pair(kind)
    inst, _ = synth_instance(kind, 0, noise=1.0)
    sset, _, _ = solve(build_system(inst), pair.system, pair.solutions)
    assert len(sset) == count


# --- 6: linear-solver oracle -----------------------------------------------

@pytest.mark.acceptance(6)
def test_ac6_linear_solver_oracle():
    rng = np.random.default_rng(6)
    probs = [LinearProblem(crandn(rng, n, n), crandn(rng, n)) for n in rng.integers(4, 33, 1000)]
    worst = 0.0
    for p, s in zip(probs, solve_batch(probs)):
        assert s.ok
        ref = naive_solve(p.A, p.b)
        worst = max(worst, np.abs(s.x - ref).max() / np.abs(ref).max())
    assert worst < 1e-10


@pytest.mark.acceptance(6)
def test_ac6_singular_flagged():
    rng = np.random.default_rng(66)
    probs = []
    for n in (4, 9, 17, 32):
        A = crandn(rng, n, n)
        A[n - 1] = A[0] + 2 * A[1]
        probs.append(LinearProblem(A, crandn(rng, n)))
        probs.append(LinearProblem(np.zeros((n, n)), np.ones(n)))
    sols = solve_batch(probs)
    assert all(s.status == "singular" and s.x is None for s in sols)


# --- 7: Jacobians and Newton ----------------------------------------------

@pytest.mark.acceptance(7)
@pytest.mark.parametrize("make", [lambda: gen_cyclic(5), lambda: gen_eco(6),
                                  lambda: build_system(synth_instance("trace3", 0)[0]),
                                  lambda: build_system(synth_instance("tri3", 0, noise=1.0)[0])])
def test_ac7_jacobians_vs_finite_differences(make):
    F = make()
    rng = np.random.default_rng(7)
    G = total_degree_start(F.degrees).system
    ch = compile_homotopy(G, F, np.exp(1.3j))
    n, h = F.num_vars, 1e-6
    for _ in range(100):
        x, t = 0.7 * crandn(rng, n), rng.uniform(0.01, 0.99)
        J = eval_Jx(ch, x, t)
        for v in range(n):
            e = np.zeros(n)
            e[v] = h
            fd = (eval_H(ch, x + e, t) - eval_H(ch, x - e, t)) / (2 * h)
            assert np.all(np.abs(fd - J[:, v]) < 1e-5 * (np.abs(J[:, v]) + 1))
        fdt = (eval_H(ch, x, t + h) - eval_H(ch, x, t - h)) / (2 * h)
        assert np.all(np.abs(fdt - eval_Jt(ch, x, t)) < 1e-5 * (np.abs(fdt) + 1))


@pytest.mark.acceptance(7)
def test_ac7_newton_contraction():
    F = PolynomialSystem(1, [Polynomial(1, {(2,): 1.0, (0,): -4.0})])
    ch = compile_homotopy(F, F, 1.0)
    x, _, _ = correct(ch, [2.0 + 1e-3], 1.0, max_iters=1)
    assert abs(x[0] - 2.0) < 1e-5


# --- 8: determinism and threading ---------------------------------------

@pytest.fixture(scope="module")
def eco11():
    F = gen_eco(11)
    pair = total_degree_start(F.degrees)
    assert len(pair.solutions) >= 1024
    return compile_homotopy(pair.system, F, np.exp(0.4j)), pair.solutions


@pytest.mark.acceptance(8)
def test_ac8_bit_identical_across_threads(eco11):
    ch, starts = eco11
    base = track_many(ch, starts, threads=1)
    for th in (2, 4):
        other = track_many(ch, starts, threads=th)
        assert all(a.x.tobytes() == b.x.tobytes() and a.status == b.status for a, b in zip(base, other))


@pytest.mark.slow
@pytest.mark.acceptance(8)
@pytest.mark.xfail((os.cpu_count() or 1) < 2, strict=False,
                   reason="one CPU: threads share a core, so the comparison is decided by timer noise")
def test_ac8_multithreaded_not_slower(eco11):
    ch, starts = eco11
    threads = max(2, os.cpu_count() or 1)
    times = {1: [], threads: []}
    track_many(ch, starts[:8], threads=1)
    for _ in range(3):
        for th in times:
            t0 = time.perf_counter()
            track_many(ch, starts, threads=th)
            times[th].append(time.perf_counter() - t0)
    single, multi = min(times[1]), min(times[threads])
    print(f"eco-11 {len(starts)} tracks: 1 thread {single:.3f}s, {threads} threads {multi:.3f}s, "
          f"{os.cpu_count()} cpu(s)")
    assert multi <= single


# --- 9: optional 3-view vs 4-view triangulation ----------------------------

@pytest.mark.slow
@pytest.mark.acceptance(9)
def test_ac9_four_views_correct_better_than_three():
    pairs = {3: _fixture_pair("tri3"), 4: _fixture_pair("tri4")}
    errs = {3: [], 4: []}
    for seed in range(200):
        inst, _ = synth_instance("tri4", seed, noise=1.0)
        clean = inst.gt["clean"]
        for N, pair in pairs.items():
            sset, _, _ = solve(build_triangulation(inst, N), pair.system, pair.solutions)
            best = best_triangulation(sset.real_points, N)
            assert best is not None
            d = [np.hypot(*(inst.points[k][0, :2] - best[2 * k:2 * k + 2] - clean[k][0, :2])) for k in range(N)]
            errs[N].append(np.mean(d) * inst.focal)
    assert np.mean(errs[4]) <= np.mean(errs[3])
