"""Tests for the masked-grid Poisson solver, dual singular fields, the
corrected two-step solve and the pairing-matrix machinery."""

import math

import numpy as np
import pytest

from bilap.errors import FrameError, NotSolvable, SingularPairingMatrix
from bilap.grid import (
    Grid2D,
    ReentrantCorner,
    corner_polar,
    lshape_grid,
    notched_grid,
    rectangle_grid,
    solve_poisson_dirichlet,
)
from bilap.twostep import (
    SigmaField,
    assemble_pairing_matrix,
    complete_singularity,
    compute_dual_singularity,
    constrained_solve,
    corrected_two_step_solve,
    duality_pairing,
    kernel_fields,
    kernel_residual,
    singular_coefficient,
    singular_pairing,
    solve_poisson_dirichlet_1d,
    two_step_solve,
    two_step_solve_1d,
)


def nodal(grid, func):
    X, Y = np.meshgrid(grid.node_x, grid.node_y, indexing="ij")
    return func(X, Y)


def patch_sigma(grid, t, radius=0.25, center=(0.5, 0.5)):
    """+1 outside a disk of cells around the corner, -t inside."""
    cx = (np.arange(grid.nx) + 0.5) * grid.h
    cy = (np.arange(grid.ny) + 0.5) * grid.h
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    inside = np.hypot(CX - center[0], CY - center[1]) < radius
    return SigmaField(np.where(inside, -t, 1.0))


class TestGrid:
    def test_masks_rectangle(self):
        g = rectangle_grid(8)
        assert g.n_interior == 7 * 7
        assert g.boundary.sum() == 4 * 8

    def test_lshape_corner_registration(self):
        g = lshape_grid(16)
        assert len(g.corners) == 1
        c = g.corners[0]
        assert (c.x, c.y) == (0.5, 0.5)
        r, theta = corner_polar(g, c)
        i0 = 8
        assert theta[i0, i0 + 2] == pytest.approx(0.0, abs=1e-12)  # +y edge
        assert theta[i0 + 2, i0] == pytest.approx(1.5 * math.pi, rel=1e-12)  # +x edge

    def test_bad_frame_rejected(self):
        mask = np.ones((16, 16), dtype=bool)
        idx = np.arange(16)
        mask[np.ix_(idx >= 8, idx >= 8)] = False
        # frame pointing into the removed quadrant
        bad = ReentrantCorner(x=0.5, y=0.5, frame_angle=0.0, orientation=1.0)
        g = Grid2D(16, 16, mask, corners=(bad,))
        from bilap.grid import _frame_check

        with pytest.raises(FrameError):
            _frame_check(g, bad)

    def test_disconnected_mask_rejected(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[:3, :3] = True
        mask[5:, 5:] = True
        with pytest.raises(ValueError):
            Grid2D(8, 8, mask)

    def test_corner_must_be_reentrant(self):
        mask = np.ones((8, 8), dtype=bool)
        c = ReentrantCorner(x=0.5, y=0.5, frame_angle=0.5 * math.pi, orientation=1.0)
        with pytest.raises(ValueError):
            Grid2D(8, 8, mask, corners=(c,))


class TestPoisson:
    def test_zero_rhs(self):
        g = rectangle_grid(16)
        u, res = solve_poisson_dirichlet(g, np.zeros((17, 17)))
        assert np.all(u == 0.0) and res == 0.0

    def test_manufactured_rectangle(self):
        errs = []
        for n in (16, 32):
            g = rectangle_grid(n)
            f = nodal(g, lambda X, Y: -2.0 * math.pi ** 2 * np.sin(math.pi * X) * np.sin(math.pi * Y))
            u, _ = solve_poisson_dirichlet(g, f)
            exact = nodal(g, lambda X, Y: np.sin(math.pi * X) * np.sin(math.pi * Y))
            errs.append(np.abs(u - exact)[g.interior].max())
        assert 3.2 <= errs[0] / errs[1] <= 4.8

    def test_discrete_maximum_principle(self):
        g = lshape_grid(16)
        rng = np.random.default_rng(50)
        f = np.zeros((17, 17))
        f[g.interior] = -rng.uniform(0.0, 1.0, g.n_interior)
        u, _ = solve_poisson_dirichlet(g, f)
        assert np.all(u[g.interior] >= 0.0)

    def test_1d_solver(self):
        errs = []
        for n in (32, 64):
            x = np.arange(1, n) / n
            u = solve_poisson_dirichlet_1d(n, -math.pi ** 2 * np.sin(math.pi * x))
            errs.append(np.abs(u - np.sin(math.pi * x)).max())
        assert 3.2 <= errs[0] / errs[1] <= 4.8


class TestTwoStep:
    def test_manufactured_1d(self):
        n = 64
        x = np.arange(1, n) / n
        p, v = two_step_solve_1d(n, np.ones(n), math.pi ** 4 * np.sin(math.pi * x))
        assert np.abs(p + math.pi ** 2 * np.sin(math.pi * x)).max() < 5e-3
        assert np.abs(v - np.sin(math.pi * x)).max() < 5e-4

    def test_manufactured_2d_convergence(self):
        errs = []
        for n in (32, 64):
            g = rectangle_grid(n)
            f = nodal(g, lambda X, Y: 4.0 * math.pi ** 4 * np.sin(math.pi * X) * np.sin(math.pi * Y))
            sol = two_step_solve(g, SigmaField.constant(g), f)
            exact = nodal(g, lambda X, Y: np.sin(math.pi * X) * np.sin(math.pi * Y))
            errs.append(np.abs(sol.v - exact)[g.interior].max())
        assert 3.2 <= errs[0] / errs[1] <= 4.8

    def test_sign_changing_sigma_solves(self):
        g = rectangle_grid(32)
        cells = np.where((np.arange(32)[:, None] < 16) * np.ones((1, 32), bool), 1.0, -1.0)
        sol = two_step_solve(
            g, SigmaField(cells),
            nodal(g, lambda X, Y: 4.0 * math.pi ** 4 * np.sin(math.pi * X) * np.sin(math.pi * Y)),
        )
        assert sol.residual_p <= 1e-10 and sol.residual_v <= 1e-10

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            SigmaField(np.zeros((4, 4)))


class TestDualSingularity:
    @pytest.fixture(scope="class")
    def lshape64(self):
        g = lshape_grid(64)
        s = compute_dual_singularity(g, 0)
        return g, s

    def test_vanishes_on_boundary(self, lshape64):
        g, s = lshape64
        assert np.all(s.dual[g.boundary] == 0.0)

    def test_discrete_harmonicity_away_from_corner(self, lshape64):
        g, s = lshape64
        r, _ = corner_polar(g, g.corners[0])
        lap = g.apply_laplacian(s.dual)
        far = g.interior & (r > 0.3)
        # pure truncation of the r^(-2/3) leading term: O(h^2) at fixed radius
        assert np.abs(lap[far]).max() <= 600.0 * g.h ** 2

    def test_harmonicity_residual_refines(self):
        maxres = []
        for n in (32, 64):
            g = lshape_grid(n)
            s = compute_dual_singularity(g, 0)
            r, _ = corner_polar(g, g.corners[0])
            lap = g.apply_laplacian(s.dual)
            maxres.append(np.abs(lap[g.interior & (r > 0.3)]).max())
        assert 2.5 <= maxres[0] / maxres[1] <= 6.0

    def test_leading_decay_along_bisector(self):
        g = lshape_grid(128)
        s = compute_dual_singularity(g, 0)
        i0 = 64
        ks = np.arange(2, 7)
        vals = np.array([s.dual[i0 - k, i0 - k] for k in ks])
        rs = ks * g.h * math.sqrt(2.0)
        slope = np.polyfit(np.log(rs), np.log(np.abs(vals)), 1)[0]
        assert slope == pytest.approx(-2.0 / 3.0, abs=0.1)

    def test_pairing_with_smooth_laplacians(self, lshape64):
        g, s = lshape64
        w = nodal(g, lambda X, Y: X * Y * (1 - X) * (1 - Y) * (X - 0.5) * (Y - 0.5))
        pairing = g.inner(s.dual, g.apply_laplacian(w))
        assert abs(pairing) <= 1.0 * g.h ** (2.0 / 3.0)

    def test_positive_self_pairing(self, lshape64):
        g, s = lshape64
        s = complete_singularity(g, SigmaField.constant(g), s)
        assert s.pairing > 0.0
        assert s.kernel_candidate is not None


class TestCorrection:
    @pytest.fixture(scope="class")
    def corrected(self):
        g = lshape_grid(64)
        sigma = SigmaField.constant(g)
        f = nodal(g, lambda X, Y: np.sin(3.0 * X + 1.0) * np.cos(2.0 * Y) + 2.0)
        s = complete_singularity(g, sigma, compute_dual_singularity(g, 0))
        unc = two_step_solve(g, sigma, f)
        cor = corrected_two_step_solve(g, sigma, f, [s])
        return g, sigma, f, s, unc, cor

    def test_zero_source(self):
        g = lshape_grid(32)
        s = compute_dual_singularity(g, 0)
        assert singular_coefficient(g, np.zeros((33, 33)), s) == 0.0

    def test_uncorrected_coefficient_persists(self):
        # the naive split keeps exciting the singularity as the grid refines
        cs = []
        for n in (32, 64):
            g = lshape_grid(n)
            sigma = SigmaField.constant(g)
            f = nodal(g, lambda X, Y: np.sin(3.0 * X + 1.0) * np.cos(2.0 * Y) + 2.0)
            s = compute_dual_singularity(g, 0)
            unc = two_step_solve(g, sigma, f)
            sinv = sigma.inverse_at_nodes(g)
            cs.append(singular_coefficient(g, sinv * unc.p, s))
        assert min(abs(c) for c in cs) > 1e-3
        assert abs(cs[0] - cs[1]) < 0.5 * abs(cs[1])

    def test_correction_kills_coefficient(self, corrected):
        g, sigma, f, s, unc, cor = corrected
        sinv = sigma.inverse_at_nodes(g)
        c_unc = singular_coefficient(g, sinv * unc.p, s)
        c_cor = singular_coefficient(g, sinv * cor.p, s)
        assert abs(c_cor) <= 0.1 * abs(c_unc)

    def test_orthogonality_by_construction(self, corrected):
        g, sigma, f, s, unc, cor = corrected
        sinv = sigma.inverse_at_nodes(g)
        num = abs(singular_pairing(g, sinv * cor.p, s.dual))
        scale = math.sqrt(singular_pairing(g, sinv * cor.p, sinv * cor.p)) * math.sqrt(
            singular_pairing(g, s.dual, s.dual)
        )
        assert num <= 1e-10 * scale

    def test_relaxed_minus_corrected_parallels_kernel_candidate(self, corrected):
        g, sigma, f, s, unc, cor = corrected
        fpsi = duality_pairing(g, f, s.kernel_candidate)
        predicted = (fpsi / s.pairing) * s.kernel_candidate
        diff = unc.v - cor.v
        rel = np.linalg.norm(diff - predicted) / np.linalg.norm(diff)
        assert rel <= 0.1

    def test_proportionality_improves_with_refinement(self, corrected):
        g64, sigma64, f64, s64, unc64, cor64 = corrected
        rels = []
        for n, (g, sigma, f, s, unc, cor) in (
            (64, corrected),
            (128, (None,) * 6),
        ):
            if g is None:
                g = lshape_grid(n)
                sigma = SigmaField.constant(g)
                f = nodal(g, lambda X, Y: np.sin(3.0 * X + 1.0) * np.cos(2.0 * Y) + 2.0)
                s = complete_singularity(g, sigma, compute_dual_singularity(g, 0))
                unc = two_step_solve(g, sigma, f)
                cor = corrected_two_step_solve(g, sigma, f, [s])
            fpsi = duality_pairing(g, f, s.kernel_candidate)
            predicted = (fpsi / s.pairing) * s.kernel_candidate
            diff = unc.v - cor.v
            rels.append(np.linalg.norm(diff - predicted) / np.linalg.norm(diff))
        assert rels[1] < rels[0]

    def test_no_corners_delegates(self):
        g = rectangle_grid(16)
        sigma = SigmaField.constant(g)
        f = nodal(g, lambda X, Y: np.ones_like(X))
        a = corrected_two_step_solve(g, sigma, f, [])
        b = two_step_solve(g, sigma, f)
        assert np.array_equal(a.v, b.v)


class TestPairingMatrix:
    def test_positive_sigma_invertible(self):
        g = lshape_grid(32)
        sigma = SigmaField.constant(g)
        s = compute_dual_singularity(g, 0)
        pm = assemble_pairing_matrix(g, sigma, [s])
        assert pm.kernel_dim == 0
        assert pm.matrix[0, 0] > 0.0

    def test_mirrored_corners_skewsymmetric_sigma(self):
        g = notched_grid(64)
        cells = np.where(
            ((np.arange(64) + 0.5) / 64.0 < 0.5)[:, None] * np.ones((1, 64), bool), 1.0, -1.0
        )
        sigma = SigmaField(cells)
        sings = [compute_dual_singularity(g, i) for i in range(2)]
        # reflected geometry: the two dual fields are mirror images
        assert np.abs(sings[0].dual - sings[1].dual[::-1, :]).max() <= 1e-12
        pm = assemble_pairing_matrix(g, sigma, sings)
        norm = np.linalg.norm(pm.matrix)
        assert abs(pm.matrix[0, 1]) <= 0.05 * norm
        assert abs(pm.matrix[0, 0] + pm.matrix[1, 1]) <= 0.05 * norm

    def test_symmetry_exact(self):
        g = notched_grid(32)
        rng = np.random.default_rng(51)
        cells = rng.uniform(0.5, 2.0, (32, 32)) * np.where(rng.random((32, 32)) < 0.3, -1.0, 1.0)
        sigma = SigmaField(cells)
        sings = [compute_dual_singularity(g, i) for i in range(2)]
        pm = assemble_pairing_matrix(g, sigma, sings)
        assert np.abs(pm.matrix - pm.matrix.T).max() <= 1e-12 * np.linalg.norm(pm.matrix)


class TestKernelOnset:
    @pytest.fixture(scope="class")
    def onset(self):
        g = lshape_grid(64)
        s = compute_dual_singularity(g, 0)

        def pairing_at(t):
            sigma = patch_sigma(g, t)
            sinv = sigma.inverse_at_nodes(g)
            return singular_pairing(g, sinv * s.dual, s.dual)

        lo, hi = 0.1, 10.0
        assert pairing_at(lo) * pairing_at(hi) < 0.0
        a, b = lo, hi
        fa = pairing_at(a)
        while (b - a) > 1e-12:
            mid = 0.5 * (a + b)
            fm = pairing_at(mid)
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
        tstar = 0.5 * (a + b)
        return g, s, tstar

    def test_sign_change_and_singular_matrix(self, onset):
        g, s, tstar = onset
        sigma = patch_sigma(g, tstar)
        pm = assemble_pairing_matrix(g, sigma, [s])
        assert pm.kernel_dim == 1
        with pytest.raises(SingularPairingMatrix):
            corrected_two_step_solve(g, sigma, np.ones((65, 65)), [s])

    def test_kernel_field_residual(self, onset):
        g, s, tstar = onset
        sigma = patch_sigma(g, tstar)
        pm = assemble_pairing_matrix(g, sigma, [s])
        psis = kernel_fields(g, sigma, [s], pm)
        assert len(psis) == 1
        tol = g.h ** (2.0 / 3.0)
        for w in (
            nodal(g, lambda X, Y: X * Y * (1 - X) * (1 - Y) * (X - 0.5) * (Y - 0.5)),
            nodal(g, lambda X, Y: np.sin(2 * math.pi * X) * np.sin(2 * math.pi * Y)),
            nodal(g, lambda X, Y: X * Y * (1 - X) * (1 - Y) * (X - 0.5) * (Y - 0.5)
                  * (1.0 + 3.0 * X + 7.0 * Y * Y)),
        ):
            assert kernel_residual(g, sigma, psis[0], w) <= tol

    def test_constrained_solve_compatible_source(self, onset):
        g, s, tstar = onset
        sigma = patch_sigma(g, tstar)
        pm = assemble_pairing_matrix(g, sigma, [s])
        w = nodal(g, lambda X, Y: (X * Y * (1 - X) * (1 - Y) * (X - 0.5) * (Y - 0.5)) ** 2)
        sig_nodes = sigma.at_nodes(g)
        f = g.apply_laplacian(sig_nodes * g.apply_laplacian(w))
        sol = constrained_solve(g, sigma, f, [s], pm, solvability_tol=2e-2)
        assert sol.residual_v <= 1e-10
        sinv = sigma.inverse_at_nodes(g)
        num = abs(singular_pairing(g, sinv * sol.p, s.dual))
        den = math.sqrt(singular_pairing(g, sinv * sol.p, sinv * sol.p)) * math.sqrt(
            singular_pairing(g, s.dual, s.dual)
        )
        # the kernel-direction pairing is not correctable (adding the dual
        # field leaves it fixed); it tracks the compatibility defect of f,
        # which for manufactured data sits at the quadrature level
        assert num <= 0.05 * den

    def test_constrained_solve_incompatible_source(self, onset):
        g, s, tstar = onset
        sigma = patch_sigma(g, tstar)
        pm = assemble_pairing_matrix(g, sigma, [s])
        psis = kernel_fields(g, sigma, [s], pm)
        with pytest.raises(NotSolvable):
            constrained_solve(g, sigma, psis[0], [s], pm)

    def test_constrained_delegates_when_regular(self):
        g = lshape_grid(32)
        sigma = SigmaField.constant(g)
        s = compute_dual_singularity(g, 0)
        pm = assemble_pairing_matrix(g, sigma, [s])
        f = nodal(g, lambda X, Y: np.ones_like(X))
        a = constrained_solve(g, sigma, f, [s], pm)
        b = corrected_two_step_solve(g, sigma, f, [s])
        assert np.array_equal(a.v, b.v)
