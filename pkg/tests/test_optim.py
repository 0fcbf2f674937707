import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfscm.errors import DomainError, IllPosedError
from mfscm.midas import LagPolyBasis
from mfscm.optim import (
    AlignedDesign,
    DesignColumn,
    SimplexQP,
    build_lifted_problem,
    project_metric,
    project_simplex,
    solve_joint,
    solve_ols,
    solve_simplex_ls,
)


def simplex_grid(n, step):
    """All points of the n-simplex on a grid with the given step."""
    k = round(1.0 / step)
    pts = []
    for comp in itertools.combinations_with_replacement(range(n), k):
        counts = np.bincount(comp, minlength=n)
        pts.append(counts / k)
    return np.asarray(pts)


class TestProjectSimplex:
    def test_feasible_point_unchanged(self):
        np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])

    def test_vertex(self):
        np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_symmetry(self):
        np.testing.assert_allclose(
            project_simplex(np.array([0.6, 0.6, 0.6])), [1 / 3, 1 / 3, 1 / 3]
        )

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            project_simplex(np.array([]))

    @given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=8), st.integers(0, 999))
    @settings(max_examples=60, deadline=None)
    def test_projection_properties(self, vals, _):
        v = np.asarray(vals)
        p = project_simplex(v)
        assert np.min(p) >= 0.0
        assert abs(p.sum() - 1.0) < 1e-9
        # no feasible grid point may be closer than the projection
        grid = simplex_grid(v.size, 0.25)
        dists = np.sum((grid - v) ** 2, axis=1)
        assert np.sum((p - v) ** 2) <= dists.min() + 1e-9


class TestSolveSimplexLS:
    def test_interpolation_vertex(self, rng):
        Z = rng.normal(size=(25, 4))
        sol = solve_simplex_ls(Z[:, 2], Z)
        assert sol.objective < 1e-12
        np.testing.assert_allclose(sol.w, [0, 0, 1, 0], atol=1e-6)

    def test_matches_dense_grid_search(self, rng):
        T0 = 30
        Z = rng.normal(size=(T0, 3))
        z1 = rng.normal(size=T0)
        sol = solve_simplex_ls(z1, Z)
        grid = simplex_grid(3, 1e-3)
        vals = np.sum((z1[:, None] - Z @ grid.T) ** 2, axis=0) / T0
        assert sol.objective <= vals.min() + 1e-6
        assert sol.status == "converged"

    def test_duplicate_columns_detected(self, rng):
        col = rng.normal(size=20)
        Z = np.column_stack([col, col, rng.normal(size=20)])
        sol = solve_simplex_ls(rng.normal(size=20), Z)
        assert (0, 1) in sol.duplicate_columns

    def test_identical_columns_objective_matches_single_donor(self, rng):
        col = rng.normal(size=20)
        z1 = rng.normal(size=20)
        multi = solve_simplex_ls(z1, np.column_stack([col, col, col]))
        single = float(np.mean((z1 - col) ** 2))
        assert multi.objective == pytest.approx(single, rel=1e-10)
        assert multi.duplicate_columns == ((0, 1, 2),)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DomainError):
            solve_simplex_ls(rng.normal(size=10), rng.normal(size=(12, 3)))

    def test_block_weights_always_feasible(self, rng):
        for _ in range(25):
            Z = rng.normal(size=(10, 20)) + 0.5 * rng.normal(size=(1, 20))
            z1 = Z @ project_simplex(rng.normal(size=20)) + 0.1 * rng.normal(size=10)
            sol = solve_simplex_ls(z1, Z)
            assert sol.status == "converged"
            assert np.min(sol.w) >= -1e-10
            assert abs(sol.w.sum() - 1.0) <= 1e-8

    def test_scale_equivariance(self, rng):
        T0 = 40
        Z = rng.normal(size=(T0, 4))
        z1 = rng.normal(size=T0)
        c = 3.7
        base = solve_simplex_ls(z1, Z)
        scaled = solve_simplex_ls(c * z1, c * Z)
        assert scaled.objective == pytest.approx(c**2 * base.objective, rel=1e-8)
        np.testing.assert_allclose(scaled.w, base.w, atol=1e-6)

    def test_objective_monotone_along_iterates(self, rng):
        Z = rng.normal(size=(15, 6))
        z1 = rng.normal(size=15)
        qp = SimplexQP(Z, z1, 1.0 / 15, _simplex_feas(6), _ident_lift(6))
        trace = []
        solve_joint(qp, trace=trace)
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs <= 1e-12 * (1.0 + np.abs(np.asarray(trace[:-1]))))


def _simplex_feas(d):
    from mfscm.optim import _Feasible

    return _Feasible.simplex(d)


def _ident_lift(d):
    from mfscm.optim import _identity_lift

    return _identity_lift(d)


class TestSolveOLS:
    def test_exact_recovery(self, rng):
        Z = rng.normal(size=(30, 2))
        w = solve_ols(Z @ np.array([0.3, 0.7]), Z)
        np.testing.assert_allclose(w, [0.3, 0.7], atol=1e-10)

    def test_orthogonal_target_gives_zero(self, rng):
        Z, _ = np.linalg.qr(rng.normal(size=(12, 3)))
        z1 = rng.normal(size=12)
        z1 -= Z @ (Z.T @ z1)
        np.testing.assert_allclose(solve_ols(z1, Z), np.zeros(3), atol=1e-10)

    def test_residual_orthogonal_to_columns(self, rng):
        Z = rng.normal(size=(40, 5))
        z1 = rng.normal(size=40)
        w = solve_ols(z1, Z)
        np.testing.assert_allclose(Z.T @ (z1 - Z @ w), np.zeros(5), atol=1e-8)

    def test_singular_design_rejected(self, rng):
        col = rng.normal(size=20)
        with pytest.raises(IllPosedError):
            solve_ols(rng.normal(size=20), np.column_stack([col, col]))


class TestProjectMetric:
    def test_feasible_target_fixed(self, rng):
        M = rng.normal(size=(3, 3))
        M = M @ M.T + np.eye(3)
        target = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(project_metric(target, M), target, atol=1e-8)

    def test_identity_metric_reduces_to_simplex_projection(self, rng):
        v = rng.normal(size=5)
        np.testing.assert_allclose(project_metric(v, np.eye(5)), project_simplex(v), atol=1e-8)

    def test_matches_grid_search(self, rng):
        M = rng.normal(size=(3, 3))
        M = M @ M.T + 0.5 * np.eye(3)
        tau = rng.normal(size=3) * 2.0
        p = project_metric(tau, M)
        grid = simplex_grid(3, 1e-3)
        diffs = grid - tau
        vals = np.einsum("ij,jk,ik->i", diffs, M, diffs)
        mine = float((p - tau) @ M @ (p - tau))
        assert mine <= vals.min() + 1e-6

    def test_asymmetric_metric_rejected(self, rng):
        M = rng.normal(size=(3, 3))
        M = M @ M.T + np.eye(3)
        M[0, 1] += 1.0
        with pytest.raises(DomainError):
            project_metric(rng.normal(size=3), M)


class TestProjectionIdentity:
    @pytest.mark.parametrize("J", [2, 3, 4, 6])
    def test_constrained_ls_equals_metric_projection_of_ols(self, J, rng):
        T0 = 50
        for _ in range(5):
            Z = rng.normal(size=(T0, J)) + rng.normal(size=(1, J))
            z1 = Z @ project_simplex(rng.normal(size=J)) + 0.3 * rng.normal(size=T0)
            w_c = solve_simplex_ls(z1, Z, scale=1.0 / T0).w
            w_ols = solve_ols(z1, Z)
            w_proj = project_metric(w_ols, Z.T @ Z / T0)
            np.testing.assert_allclose(w_c, w_proj, atol=1e-6)


def lifted_design(rng, T0=60, Q=0, m=3, n_fixed=2, cov_scale=0.0):
    cols = []
    for j in range(n_fixed):
        cols.append(DesignColumn(j, rng.normal(size=T0), np.empty(0)))
    HF = rng.normal(size=(T0, m))
    cols.append(DesignColumn(n_fixed, HF, np.empty(0), m=m))
    z1 = rng.normal(size=T0)
    return AlignedDesign(z1, tuple(cols), T0=T0, Q=Q, covariate_scale=cov_scale), HF


class TestBuildLiftedProblem:
    def test_no_lifted_units_reduces_to_fixed_simplex(self, rng):
        T0 = 40
        cols = tuple(DesignColumn(j, rng.normal(size=T0), np.empty(0)) for j in range(3))
        z1 = rng.normal(size=T0)
        design = AlignedDesign(z1, cols, T0=T0, Q=0, covariate_scale=0.0)
        qp = build_lifted_problem(design, LagPolyBasis(3))
        sol = solve_joint(qp)
        direct = solve_simplex_ls(z1, np.column_stack([c.outcome for c in cols]), scale=1.0 / T0)
        assert sol.objective == pytest.approx(direct.objective, abs=1e-12)

    def test_constant_basis_collapses_to_uniform_aggregation(self, rng):
        design, HF = lifted_design(rng, m=3)
        qp = build_lifted_problem(design, LagPolyBasis(1))
        sol = solve_joint(qp)
        fixed = np.column_stack(
            [c.outcome for c in design.columns[:2]] + [HF @ np.full(3, 1 / 3)]
        )
        direct = solve_simplex_ls(design.z1, fixed, scale=1.0 / design.T0)
        assert sol.objective == pytest.approx(direct.objective, abs=1e-10)
        if 2 in sol.lag_weights and sol.w[2] > 1e-8:
            np.testing.assert_allclose(sol.lag_weights[2], np.full(3, 1 / 3), atol=1e-8)

    @pytest.mark.parametrize("nonneg", [True, False])
    def test_grid_search_domination(self, nonneg, rng):
        # one fixed donor, one lifted donor, m = L = 3; 1e-2 grids
        T0 = 30
        fixed_col = rng.normal(size=T0)
        HF = rng.normal(size=(T0, 3))
        mix = 0.55 * fixed_col + 0.45 * (HF @ np.array([0.6, 0.3, 0.1]))
        z1 = mix + 0.2 * rng.normal(size=T0)
        cols = (
            DesignColumn(0, fixed_col, np.empty(0)),
            DesignColumn(1, HF, np.empty(0), m=3),
        )
        design = AlignedDesign(z1, cols, T0=T0, Q=0, covariate_scale=0.0)
        qp = build_lifted_problem(design, LagPolyBasis(3), nonneg_midas=nonneg)
        sol = solve_joint(qp)
        w_grid = np.linspace(0.0, 1.0, 101)
        B_grid = simplex_grid(3, 1e-2)
        agg = HF @ B_grid.T  # (T0, nB)
        best = np.inf
        for w1 in w_grid:
            resid = z1[:, None] - (1 - w1) * fixed_col[:, None] - w1 * agg
            best = min(best, float(np.min(np.sum(resid**2, axis=0))) / T0)
        assert sol.objective <= best + 1e-8

    def test_degenerate_unit_reports_uniform(self, rng):
        # lifted donor orthogonal to the target: optimal weight 0
        T0 = 40
        fixed_col = rng.normal(size=T0)
        z1 = fixed_col.copy()
        HF = rng.normal(size=(T0, 3)) * 50.0
        cols = (
            DesignColumn(0, fixed_col, np.empty(0)),
            DesignColumn(1, HF, np.empty(0), m=3),
        )
        design = AlignedDesign(z1, cols, T0=T0, Q=0, covariate_scale=0.0)
        sol = solve_joint(build_lifted_problem(design, LagPolyBasis(3)))
        assert sol.degenerate_units == (1,)
        np.testing.assert_allclose(sol.lag_weights[1], np.full(3, 1 / 3))
        assert sol.w[0] == pytest.approx(1.0, abs=1e-8)

    def test_noiseless_joint_recovery(self, rng):
        # well-conditioned donors; exact convex combination with known shares
        T0 = 80
        n_fixed, m = 3, 3
        F = rng.normal(size=(T0, n_fixed)) + rng.uniform(-2, 2, size=(1, n_fixed))
        HF = rng.normal(size=(T0, m)) + rng.uniform(-2, 2, size=(1, m))
        B0 = np.array([0.5, 1 / 3, 1 / 6])
        w0 = np.array([0.25, 0.15, 0.2, 0.4])
        z1 = F @ w0[:3] + w0[3] * (HF @ B0)
        cols = tuple(DesignColumn(j, F[:, j], np.empty(0)) for j in range(3)) + (
            DesignColumn(3, HF, np.empty(0), m=m),
        )
        design = AlignedDesign(z1, cols, T0=T0, Q=0, covariate_scale=0.0)
        sol = solve_joint(build_lifted_problem(design, LagPolyBasis(3)))
        assert np.max(np.abs(sol.w - w0)) < 1e-4
        np.testing.assert_allclose(sol.lag_weights[3], B0, atol=1e-3)
        # recovered coefficients reproduce the per-lag weights and sum to one
        basis = LagPolyBasis(3)
        np.testing.assert_allclose(basis.design(3) @ sol.zeta[3], sol.lag_weights[3], atol=1e-10)
        assert abs(sol.lag_weights[3].sum() - 1.0) < 1e-8

    def test_feasibility_invariants(self, rng):
        for _ in range(10):
            design, _ = lifted_design(rng)
            sol = solve_joint(build_lifted_problem(design, LagPolyBasis(3)))
            assert np.min(sol.w) >= -1e-10
            assert abs(sol.w.sum() - 1.0) <= 1e-8

    def test_validate_accepts_wellformed_qp(self, rng):
        design, _ = lifted_design(rng)
        qp = build_lifted_problem(design, LagPolyBasis(3))
        qp.validate()


class TestOracleDomination:
    @pytest.mark.parametrize("seed", range(6))
    def test_joint_objective_dominates_coarse_grid(self, seed):
        # J = 3 with one unit per frequency class shape: two fixed + one lifted
        rng = np.random.default_rng(seed)
        T0 = 24
        F = rng.normal(size=(T0, 2))
        HF = rng.normal(size=(T0, 3))
        z1 = rng.normal(size=T0)
        cols = (
            DesignColumn(0, F[:, 0], np.empty(0)),
            DesignColumn(1, F[:, 1], np.empty(0)),
            DesignColumn(2, HF, np.empty(0), m=3),
        )
        design = AlignedDesign(z1, cols, T0=T0, Q=0, covariate_scale=0.0)
        sol = solve_joint(build_lifted_problem(design, LagPolyBasis(3)))
        w_grid = simplex_grid(3, 0.05)
        B_grid = simplex_grid(3, 0.05)
        agg = HF @ B_grid.T
        best = np.inf
        for w in w_grid:
            resid = z1[:, None] - (F @ w[:2])[:, None] - w[2] * agg
            best = min(best, float(np.min(np.sum(resid**2, axis=0))) / T0)
        assert sol.objective <= best + 1e-8
