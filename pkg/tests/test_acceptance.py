"""Acceptance gate: one test per criterion, each reported as a PASS/FAIL line."""

import time

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nodectx import cli
from nodectx.greedy_parafac import CPModel, DecomposeOptions, decompose, fit_error
from nodectx.network_builder import (
    CharacteristicMatrix,
    build_adjacency_tensor,
    generate_synthetic_network,
)
from nodectx.ranking_query import (
    build_similarity_matrices,
    evaluate_all_tasks,
    task1_decomp,
    task1_standard,
    task2_decomp,
    task2_standard,
    task3_decomp,
    task3_standard,
    task4_decomp,
    task4_standard,
)
from nodectx.sparse_tensor3 import (
    SparseTensor3,
    contract_modes_1_2,
    contract_modes_1_3,
    contract_modes_2_3,
    frontal_slices_symmetric,
)
from oracles import dense_contract, dense_tasks, two_pass_adjacency, greedy_dense, reconstruct

CONTRACTIONS = (contract_modes_2_3, contract_modes_1_3, contract_modes_1_2)


def test_construction_matches_transcribed_algorithm(criterion):
    with criterion("construction oracle equivalence (200 matrices, exact, < 5 s)") as info:
        rng = np.random.default_rng(1)
        start = time.perf_counter()
        for _ in range(200):
            N, M = rng.integers(1, 9), rng.integers(1, 6)
            counts = rng.integers(0, 6, size=(N, M))
            X = build_adjacency_tensor(CharacteristicMatrix.from_counts(counts))
            np.testing.assert_array_equal(X.to_dense(), two_pass_adjacency(counts))
        elapsed = time.perf_counter() - start
        info["detail"] = f"{elapsed:.2f} s"
        assert elapsed < 5.0


def test_structural_invariants(criterion):
    with criterion("structural invariants (1000 generated cases)") as info:
        seen = []

        @settings(
            max_examples=1000,
            deadline=None,
            database=None,
            suppress_health_check=list(HealthCheck),
        )
        @given(
            st.tuples(st.integers(1, 10), st.integers(1, 6)).flatmap(
                lambda s: arrays(np.int64, s, elements=st.integers(0, 9))
            )
        )
        def check(counts):
            seen.append(1)
            X = build_adjacency_tensor(CharacteristicMatrix.from_counts(counts))
            assert frontal_slices_symmetric(X, 0.0)
            assert not np.any(X.subs[:, 0] == X.subs[:, 1])

        check()
        info["detail"] = f"{len(seen)} cases"
        assert len(seen) >= 1000


def test_exact_rank1_recovery(criterion):
    with criterion("exact rank-1 recovery (1e-8 relative, fit <= 1e-8)") as info:
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(20):
            shape = rng.integers(2, 12, size=3)
            h, a, t = (rng.random(n) + 0.05 for n in shape)
            h, a, t = (v / np.linalg.norm(v) for v in (h, a, t))
            lam = float(rng.uniform(0.5, 100))
            X = SparseTensor3.from_dense(lam * np.einsum("i,j,k->ijk", h, a, t))
            model = decompose(X, DecomposeOptions(rank=1))
            errs = [
                abs(model.weights[0] - lam) / lam,
                np.linalg.norm(model.hubs[:, 0] - h),
                np.linalg.norm(model.authorities[:, 0] - a),
                np.linalg.norm(model.terms[:, 0] - t),
                fit_error(X, model),
            ]
            worst = max(worst, *errs)
        info["detail"] = f"worst {worst:.1e}"
        assert worst <= 1e-8


def test_odeco_recovery(criterion):
    with criterion("odeco recovery (lambda 5,3,1 within 1e-8, cosines >= 1-1e-8)") as info:
        rng = np.random.default_rng(3)
        I, J, K = 9, 7, 6
        # disjoint supports make the three terms mutually orthogonal in every mode
        rows = np.array_split(rng.permutation(I), 3)
        cols = np.array_split(rng.permutation(J), 3)
        slices = np.array_split(rng.permutation(K), 3)
        D = np.zeros((I, J, K))
        for lam, ri, cj, sk in zip((5.0, 3.0, 1.0), rows, cols, slices):
            vecs = []
            for n, idx in ((I, ri), (J, cj), (K, sk)):
                v = np.zeros(n)
                v[idx] = rng.random(idx.size) + 0.1
                vecs.append(v / np.linalg.norm(v))
            D += lam * np.einsum("i,j,k->ijk", *vecs)
        model = decompose(SparseTensor3.from_dense(D), DecomposeOptions(rank=3))
        expected = greedy_dense(D, 3)
        np.testing.assert_allclose([e[0] for e in expected], [5, 3, 1], atol=1e-10)
        lam_err = float(np.max(np.abs(model.weights - [5.0, 3.0, 1.0])))
        cosines = [
            abs(F[:, r] @ vec)
            for r, (_, h, a, t) in enumerate(expected)
            for F, vec in ((model.hubs, h), (model.authorities, a), (model.terms, t))
        ]
        info["detail"] = f"lambda err {lam_err:.1e}, min cosine 1-{1 - min(cosines):.1e}"
        assert lam_err <= 1e-8
        assert min(cosines) >= 1 - 1e-8


def test_dense_oracle_equivalence(criterion):
    with criterion("contractions and fit_error vs dense oracle (500 tensors, 1e-10)") as info:
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(500):
            shape = tuple(int(n) for n in rng.integers(1, 7, size=3))
            D = rng.standard_normal(shape) * (rng.random(shape) < rng.uniform(0.2, 1.0))
            if not D.any():
                D[tuple(rng.integers(0, n) for n in shape)] = 1.0
            X = SparseTensor3.from_dense(D)
            for mode in range(3):
                others = [ax for ax in range(3) if ax != mode]
                u = rng.standard_normal(shape[others[0]])
                v = rng.standard_normal(shape[others[1]])
                want = dense_contract(D, mode, u, v)
                got = CONTRACTIONS[mode](X, u, v)
                # relative to the result, or to ||D|| ||u|| ||v|| when the result cancels
                scale = max(
                    np.linalg.norm(want),
                    1e-6 * np.linalg.norm(D) * np.linalg.norm(u) * np.linalg.norm(v),
                )
                worst = max(worst, float(np.linalg.norm(got - want) / scale))
            R = int(rng.integers(1, 4))
            H, A, T = (rng.standard_normal((n, R)) for n in shape)
            H, A, T = (F / np.linalg.norm(F, axis=0) for F in (H, A, T))
            model = CPModel(rng.random(R) * 3, H, A, T)
            dense = np.linalg.norm(D - reconstruct(model.weights, H, A, T)) / np.linalg.norm(D)
            worst = max(worst, abs(fit_error(X, model) - dense) / dense)
        info["detail"] = f"worst relative {worst:.1e}"
        assert worst <= 1e-10


def test_monotone_deflation(criterion):
    with criterion("monotone deflation (50 tensors, R = 1..6, 1e-12 slack)") as info:
        rng = np.random.default_rng(5)
        worst = -np.inf
        for _ in range(50):
            N, M = rng.integers(4, 13), rng.integers(2, 7)
            counts = rng.integers(1, 6, size=(N, M)) * (rng.random((N, M)) < 0.6)
            counts[:2, 0] = np.maximum(counts[:2, 0], 1)
            X = build_adjacency_tensor(CharacteristicMatrix.from_counts(counts))
            errors = [fit_error(X, decompose(X, DecomposeOptions(rank=R))) for R in range(1, 7)]
            worst = max(worst, float(np.max(np.diff(errors))))
        info["detail"] = f"largest step {worst:.1e}"
        assert worst <= 1e-12


def test_task_formula_equivalence(criterion):
    with criterion("task formulas vs dense oracle (N, M <= 20, 1e-10)") as info:
        seen = []

        @settings(
            max_examples=300,
            deadline=None,
            database=None,
            suppress_health_check=list(HealthCheck),
        )
        @given(
            st.tuples(st.integers(1, 20), st.integers(1, 20)).flatmap(
                lambda s: arrays(np.int64, s, elements=st.integers(0, 9))
            ),
            st.integers(1, 5),
            st.integers(0, 2**32 - 1),
        )
        def check(counts, R, seed):
            seen.append(1)
            rng = np.random.default_rng(seed)
            N, M = counts.shape
            C = CharacteristicMatrix.from_counts(counts)
            H, T = rng.standard_normal((N, R)), rng.standard_normal((M, R))
            H, T = H / np.linalg.norm(H, axis=0), T / np.linalg.norm(T, axis=0)
            model = CPModel(np.sort(rng.random(R) + 0.1)[::-1], H, H.copy(), T)
            qb = rng.integers(0, 2, size=N).astype(float)
            qw = rng.integers(0, 2, size=M).astype(float)
            want, B, W = dense_tasks(counts, H, T, qb, qw)
            sims = build_similarity_matrices(C)
            assert np.max(np.abs(sims.blogs - B), initial=0.0) <= 1e-10
            assert np.max(np.abs(sims.words - W), initial=0.0) <= 1e-10
            got = {
                1: (task1_standard(C, qw), task1_decomp(model, qw)),
                2: (task2_standard(C, qb), task2_decomp(model, qb)),
                3: (task3_standard(C, qb, sims), task3_decomp(model, qb)),
                4: (task4_standard(C, qw, sims), task4_decomp(model, qw)),
            }
            for task, (std, dec) in got.items():
                for out, ref in ((std.scores, want[task][0]), (dec.scores, want[task][1])):
                    assert np.max(np.abs(out - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))

        check()
        info["detail"] = f"{len(seen)} cases"


def test_synthetic_similarity_substitute(criterion):
    with criterion("synthetic 4-cluster similarities (tasks 1,3 >= 0.80 and >= task 4)") as info:
        C = generate_synthetic_network(151, 180, 4, seed=1, noise=0.05)
        X = build_adjacency_tensor(C)
        models = [decompose(X, DecomposeOptions(rank=R)) for R in (2, 4, 8)]
        report = evaluate_all_tasks(C, models)
        v = report.values
        info["detail"] = "; ".join(
            f"R={R}: " + " ".join(f"{x:.3f}" for x in v[:, c]) for c, R in enumerate(report.ranks)
        )
        assert np.all(v[[0, 2]] >= 0.80)
        assert np.all(v[0] >= v[3]) and np.all(v[2] >= v[3])


def test_rank14_performance(criterion):
    with criterion("R=14 on 151x151x180 under 60 s") as info:
        C = generate_synthetic_network(151, 180, 4, seed=1, noise=0.05)
        X = build_adjacency_tensor(C)
        start = time.perf_counter()
        model = decompose(X, DecomposeOptions(rank=14))
        elapsed = time.perf_counter() - start
        info["detail"] = f"{elapsed:.1f} s, nnz={X.nnz}, fit_error={fit_error(X, model):.4f}"
        assert model.rank == 14
        assert elapsed < 60.0


def test_pipeline_determinism(criterion, tmp_path):
    with criterion("full pipeline byte-identical across two runs") as info:
        trees = []
        for name in ("first", "second"):
            out = tmp_path / name
            argv = [["synth", "--out", out, "--seed", "1"]]
            argv.append(["run", "--out", out, "--input", out / cli.SYNTH_FILE, "--ranks", "2,4,8"])
            argv.append(["rank", "--out", out, "--rank", "4"])
            for args in argv:
                assert cli.main([str(a) for a in args]) == 0
            trees.append(
                {
                    p.relative_to(out).as_posix(): p.read_bytes()
                    for p in sorted(out.rglob("*"))
                    if p.is_file() and p.name != cli.TIMING_FILE
                }
            )
        info["detail"] = f"{len(trees[0])} files compared"
        assert trees[0].keys() == trees[1].keys()
        differing = [k for k in trees[0] if trees[0][k] != trees[1][k]]
        assert not differing, differing
