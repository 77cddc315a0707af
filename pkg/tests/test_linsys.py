from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cases
from r1c import (
    PartialTensor,
    SparseSystem,
    build_system,
    flatten,
    nullspace_dimension,
    row_equilibrated,
    smallest_singular,
    stability_constant,
)


def system_for(dims, entries, k) -> SparseSystem:
    return build_system(flatten(PartialTensor(dims, entries), k))


class TestBuildSystem:
    def test_cube_mode3_matches_printed_matrix(self, cube):
        system = build_system(flatten(cube, 3))
        assert system.shape == (7, 6)
        np.testing.assert_array_equal(system.to_dense(), cases.CUBE_MODE3_MATRIX)

    def test_row_provenance_orientation(self, cube):
        view = flatten(cube, 3)
        system = build_system(view)
        dense = system.to_dense()
        pos = view.row_positions
        for r, (j, a, b) in enumerate(system.row_provenance):
            assert a < b
            assert dense[r, pos[b]] == view.obs[(a, j)]
            assert dense[r, pos[a]] == -view.obs[(b, j)]

    def test_pair_count_by_hand(self, extractable_matrix):
        # column groups have sizes 3, 2, 1 -> 3 + 1 + 0 pairs
        system = build_system(flatten(extractable_matrix, 2))
        assert system.shape == (4, 3)

    def test_singleton_groups_give_zero_rows(self):
        t = PartialTensor((2, 2), {(1, 1): 1.0, (2, 2): 2.0})
        system = build_system(flatten(t, 2))
        assert system.nrows == 0 and system.ncols == 2

    def test_observed_zero_drops_one_entry(self):
        system = system_for((3, 3), cases.ONE_WAY_ENTRIES, 2)
        dense = system.to_dense()
        nonzero_per_row = (dense != 0).sum(axis=1)
        assert nonzero_per_row.max() <= 2
        assert (nonzero_per_row == 0).any()  # the pair of two observed zeros

    def test_scaling_equivariance(self, cube):
        base = build_system(flatten(cube, 3)).to_dense()
        scaled = build_system(flatten(cube.scaled(2.5), 3)).to_dense()
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=0, atol=0)


class TestSmallestSingular:
    def test_cube_mode3_nullvector_sign_fixed(self, cube):
        triplet = smallest_singular(build_system(flatten(cube, 3)))
        assert triplet.sigma_min <= 1e-10
        expected = -cases.CUBE_MODE3_NULLVECTOR  # largest-magnitude entry positive
        np.testing.assert_allclose(triplet.right_vector, expected, atol=1e-8)

    def test_one_by_one(self):
        system = SparseSystem.from_dense([[2.0]])
        triplet = smallest_singular(system)
        assert triplet.sigma_min == pytest.approx(2.0)
        np.testing.assert_allclose(triplet.right_vector, [1.0])
        assert not triplet.underdetermined

    def test_extractable_matrix_direction(self, extractable_matrix):
        triplet = smallest_singular(build_system(flatten(extractable_matrix, 2)))
        assert triplet.sigma_min <= 1e-10
        np.testing.assert_allclose(
            triplet.right_vector, cases.EXTRACTABLE_MATRIX_NULLVECTOR, atol=1e-10
        )

    def test_underdetermined_returns_nullvector(self):
        dense = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
        triplet = smallest_singular(SparseSystem.from_dense(dense))
        assert triplet.underdetermined
        assert triplet.sigma_min == 0.0
        assert triplet.gap == 0.0
        assert np.linalg.norm(dense @ triplet.right_vector) <= 1e-10 * np.abs(dense).max()
        assert triplet.sigma_second > 0.5  # rank 2 here

    def test_zero_rows(self):
        system = SparseSystem(0, 3, [], [], [])
        triplet = smallest_singular(system)
        assert triplet.underdetermined and triplet.sigma_min == 0.0
        assert np.linalg.norm(triplet.right_vector) == pytest.approx(1.0)

    def test_unit_norm_and_consistency(self, cube):
        for k in (1, 2, 3):
            system = build_system(flatten(cube, k))
            triplet = smallest_singular(system)
            assert np.linalg.norm(triplet.right_vector) == pytest.approx(1.0, abs=1e-12)
            dense = system.to_dense()
            sigma_max = np.linalg.norm(dense, 2)
            assert np.linalg.norm(dense @ triplet.right_vector) <= triplet.sigma_min + 1e-8 * max(
                1.0, sigma_max
            )

    def test_iterative_matches_dense_small(self, cube):
        system = build_system(flatten(cube, 3))
        dense = smallest_singular(system, method="dense")
        iterative = smallest_singular(system, method="iterative")
        assert abs(dense.sigma_min - iterative.sigma_min) <= 1e-10
        assert abs(float(dense.right_vector @ iterative.right_vector)) >= 1 - 1e-10

    def test_right_vector_invariant_under_positive_scaling(self, extractable_matrix):
        base = smallest_singular(build_system(flatten(extractable_matrix, 2)))
        for c in (0.25, 7.0):
            scaled = smallest_singular(build_system(flatten(extractable_matrix.scaled(c), 2)))
            np.testing.assert_allclose(scaled.right_vector, base.right_vector, atol=1e-10)


class TestNullspaceDimension:
    @pytest.mark.parametrize("k,dim", sorted(cases.CUBE_NULLITY_BY_MODE.items()))
    def test_cube_dimensions(self, cube, k, dim):
        system = build_system(flatten(cube, k))
        assert nullspace_dimension(system) == dim
        assert cases.fraction_nullity(system.to_dense()) == dim

    @pytest.mark.parametrize("k,dim", sorted(cases.NON_DETERMINABLE_NULLITY_BY_MODE.items()))
    def test_non_determinable_pattern_dimensions(self, k, dim):
        system = system_for(cases.NON_DETERMINABLE_DIMS, cases.NON_DETERMINABLE_ENTRIES, k)
        assert nullspace_dimension(system) == dim
        assert cases.fraction_nullity(system.to_dense()) == dim

    def test_zero_row_system(self):
        assert nullspace_dimension(SparseSystem(0, 3, [], [], [])) == 3

    def test_iterative_matches_dense(self, cube):
        for k in (1, 2, 3):
            system = build_system(flatten(cube, k))
            assert nullspace_dimension(system, method="iterative") == nullspace_dimension(
                system, method="dense"
            )


class TestRowEquilibrated:
    def test_unit_rows_and_same_nullspace(self, cube):
        system = build_system(flatten(cube, 3))
        scaled = row_equilibrated(system)
        dense = scaled.to_dense()
        norms = np.linalg.norm(dense, axis=1)
        np.testing.assert_allclose(norms[norms > 0], 1.0, atol=1e-14)
        t_raw = smallest_singular(system)
        t_eq = smallest_singular(scaled)
        assert abs(float(t_raw.right_vector @ t_eq.right_vector)) >= 1 - 1e-10

    def test_zero_rows_stay_zero(self):
        system = system_for((3, 3), cases.ONE_WAY_ENTRIES, 2)
        dense = row_equilibrated(system).to_dense()
        assert (np.linalg.norm(dense, axis=1) <= 1.0 + 1e-14).all()


class TestStabilityConstant:
    def test_tall_formula(self):
        u, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 5)))
        v, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
        dense = u[:, :3] @ np.diag([2.0, 1.0, 0.0]) @ v.T
        bound = stability_constant(SparseSystem.from_dense(dense))
        assert not bound.wide
        assert bound.constant == pytest.approx(4.0 * math.sqrt(2.0) / 1.0, rel=1e-9)
        assert bound.radius == pytest.approx(0.25, rel=1e-9)

    def test_wide_formula(self):
        u, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((2, 2)))
        v, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((3, 3)))
        dense = u @ np.diag([1.5, 0.5]) @ v[:, :2].T
        bound = stability_constant(SparseSystem.from_dense(dense))
        assert bound.wide
        assert bound.constant == pytest.approx(6.0 * math.sqrt(2.0), rel=1e-9)
        assert bound.radius == pytest.approx(0.5 / 3.0, rel=1e-9)

    def test_cube_mode3_against_dense_oracle(self, cube):
        system = build_system(flatten(cube, 3))
        _, _, sigma_second = cases.dense_smallest(cases.CUBE_MODE3_MATRIX)
        bound = stability_constant(system)
        assert bound.constant == pytest.approx(4.0 * math.sqrt(2.0) / sigma_second, rel=1e-12)

    def test_rejects_rank_deficiency_two(self, cube):
        system = build_system(flatten(cube, 1))  # nullity 2
        with pytest.raises(ValueError, match="dimension"):
            stability_constant(system)


class TestIndicatorSolutionProperty:
    def test_rows_vanish_on_true_profile(self):
        # On exactly rank-one data, the row profile of the completion solves
        # every pair equation; checked via provenance for every mode.
        rng = np.random.default_rng(7)
        dims = (3, 4, 2)
        factors = [rng.standard_normal(n) + 1.5 for n in dims]
        omega = {(i, j, l) for i in (1, 3) for j in (1, 2, 4) for l in (1, 2)}
        entries = {
            idx: factors[0][idx[0] - 1] * factors[1][idx[1] - 1] * factors[2][idx[2] - 1]
            for idx in omega
        }
        t = PartialTensor(dims, entries)
        for k in (1, 2, 3):
            view = flatten(t, k)
            system = build_system(view)
            others = [factors[s] for s in range(3) if s != k - 1]
            x = np.array(
                [others[0][lab[0] - 1] * others[1][lab[1] - 1] for lab in view.row_labels]
            )
            residual = system.to_dense() @ x
            np.testing.assert_allclose(residual, 0.0, atol=1e-10)


@st.composite
def random_views(draw, max_cols=50):
    n1 = draw(st.integers(2, 8))
    n2 = draw(st.integers(2, 8))
    cells = [(i, j) for i in range(1, n1 + 1) for j in range(1, n2 + 1)]
    chosen = draw(st.lists(st.sampled_from(cells), min_size=2, max_size=min(n1 * n2, 14), unique=True))
    vals = draw(
        st.lists(
            st.floats(min_value=-5, max_value=5, allow_nan=False),
            min_size=len(chosen),
            max_size=len(chosen),
        )
    )
    return PartialTensor((n1, n2), dict(zip(chosen, vals)))


class TestOracleAgreementProperty:
    @given(random_views())
    @settings(max_examples=60, deadline=None)
    def test_iterative_agrees_with_dense_oracle(self, t):
        system = build_system(flatten(t, 2))
        if system.ncols < 1:
            return
        dense = system.to_dense()
        sigma_min_o, vec_o, sigma_second_o = cases.dense_smallest(dense)
        triplet = smallest_singular(system, method="iterative")
        sigma_max = float(np.linalg.norm(dense, 2)) if dense.size else 0.0
        got = triplet.sigma_min if not triplet.underdetermined else 0.0
        want = sigma_min_o if system.nrows >= system.ncols else 0.0
        assert abs(got - want) <= 1e-8 * max(1.0, sigma_max)
        if sigma_second_o - sigma_min_o > 1e-6:
            assert abs(float(triplet.right_vector @ vec_o)) >= 1 - 1e-8
