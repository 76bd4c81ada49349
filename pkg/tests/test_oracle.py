import math

import numpy as np
import pytest

from wfrsmc.core import InvalidArgumentError, NumericalFailureError, StepSizeError, TimeSchedule
from wfrsmc.correctors import InterpolationSpec
from wfrsmc.oracle import (
    GridDensity,
    _advect,
    _diffuse,
    analytic_target,
    cfl_steps,
    chi2_cases,
    chi2_dissipation_residual,
    fk_pde_solve,
    gamma2_operator,
    gamma_operator,
    heat_as_reaction_error,
    heat_as_transport_error,
    integrate_fk,
    l1_distance,
    ou_generator,
    ou_semigroup,
    transport_as_reaction_error,
    variance_decay_ratios_mc,
    write_grid_csv,
)


def gaussian_grid(var, n, lo=-8.0, hi=8.0, mean=0.0):
    return GridDensity.from_function(lambda x: np.exp(-0.5 * (x - mean) ** 2 / var), lo, hi, n)


def heat_l1(n_cells, duration=0.5):
    p0 = gaussian_grid(0.25, n_cells)
    steps = int(math.ceil(duration / (0.9 * p0.dx**2)))
    traj = integrate_fk(p0, None, lambda t: 1.0, None, TimeSchedule(0.0, duration, steps), record_times=[duration])
    return l1_distance(traj[-1][1], gaussian_grid(0.25 + duration, n_cells))


class TestGridDensity:
    def test_normalized_mass_and_moments(self):
        g = gaussian_grid(2.0, 1024, lo=-12.0, hi=14.0, mean=1.0)
        assert g.mass() == pytest.approx(1.0, abs=1e-12)
        assert g.mean() == pytest.approx(1.0, abs=1e-8)
        assert g.std() == pytest.approx(math.sqrt(2.0), abs=1e-4)
        assert np.all(g.values >= 0)

    def test_log_function_constructor(self):
        a = GridDensity.from_log_function(lambda x: -0.5 * x * x, -8, 8, 128)
        b = gaussian_grid(1.0, 128)
        np.testing.assert_allclose(a.values, b.values, rtol=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            GridDensity(1.0, 0.0, 10, np.ones(10))
        with pytest.raises(InvalidArgumentError):
            l1_distance(gaussian_grid(1, 64), gaussian_grid(1, 128))

    def test_cdf(self):
        c = gaussian_grid(1.0, 256).cdf_at_faces()
        assert c[0] == 0.0 and c[-1] == 1.0 and np.all(np.diff(c) >= 0)


class TestSolver:
    def test_null_evolution(self):
        p0 = gaussian_grid(1.0, 128)
        traj = integrate_fk(p0, lambda t, x: 0 * x, lambda t: 0.0, lambda t, x: 0 * x, TimeSchedule(0, 1, 10))
        for _, g in traj:
            np.testing.assert_allclose(g.values, p0.values, rtol=1e-13)

    def test_heat_flow(self):
        assert heat_l1(1024) < 1e-3

    def test_refinement_is_second_order(self):
        assert heat_l1(256) / heat_l1(512) >= 3.0

    @pytest.mark.parametrize("scheme", ["upwind", "limited", "lax_wendroff"])
    def test_transport_conserves_mass(self, scheme):
        p0 = gaussian_grid(1.0, 256)
        v = 0.7 * np.sin(p0.faces)
        p = _advect(p0.values, v, 0.5 * p0.dx, p0.dx, scheme)
        p = _diffuse(p, 0.5, 0.2 * p0.dx**2, p0.dx)
        assert abs(np.sum(p) * p0.dx - 1.0) < 1e-8

    def test_unknown_scheme(self):
        p0 = gaussian_grid(1.0, 64)
        with pytest.raises(InvalidArgumentError):
            _advect(p0.values, np.zeros(65), 0.01, p0.dx, "spectral")

    def test_cfl_guard(self):
        p0 = gaussian_grid(1.0, 256)
        with pytest.raises(StepSizeError):
            integrate_fk(p0, None, lambda t: 1.0, None, TimeSchedule(0, 1, 10))
        with pytest.raises(StepSizeError):
            integrate_fk(p0, lambda t, x: 0 * x + 100.0, lambda t: 0.0, None, TimeSchedule(0, 1, 10))

    def test_boundary_precondition(self):
        wide = gaussian_grid(9.0, 64, lo=-3.0, hi=3.0)
        with pytest.raises(InvalidArgumentError):
            integrate_fk(wide, None, lambda t: 0.1, None, TimeSchedule(0, 0.1, 10))

    def test_non_finite_potential(self):
        p0 = gaussian_grid(1.0, 64)
        with pytest.raises(NumericalFailureError):
            integrate_fk(p0, None, lambda t: 0.0, lambda t, x: np.where(x > 0, np.inf, 0.0), TimeSchedule(0, 0.1, 2))

    def test_reaction_only_is_exact_tilt(self):
        # with no transport the solution is p0 exp(t psi) renormalized
        p0 = gaussian_grid(1.0, 256)
        traj = integrate_fk(p0, None, lambda t: 0.0, lambda t, x: -0.5 * x * x, TimeSchedule(0, 1, 50),
                            record_times=[1.0])
        np.testing.assert_allclose(traj[-1][1].values, gaussian_grid(0.5, 256).values, rtol=1e-10, atol=1e-14)

    def test_geometric_terminal_matches_product(self, equal_pair):
        spec = InterpolationSpec("geometric", 0.5)
        p0 = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x), -7.0, 9.0, 256)
        n = cfl_steps(p0, equal_pair, spec, multiple_of=500)
        assert n % 500 == 0
        traj = fk_pde_solve(p0, equal_pair, spec, TimeSchedule(1, 0, n), record_times=[0.5, 0.0])
        assert [t for t, _ in traj] == [0.5, 0.0]
        final = traj[-1][1]
        exact = analytic_target(equal_pair, spec, 0.0, -7.0, 9.0, 256)
        assert l1_distance(final, exact) < 1e-2
        assert final.mean() == pytest.approx(1.0, abs=5e-3)

    @pytest.mark.parametrize("kind", ["mixture", "fisher_rao"])
    def test_other_kinds_track_analytic(self, unequal_pair, kind):
        spec = InterpolationSpec(kind, 0.5)
        p0 = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x), -7.0, 9.0, 256)
        n = cfl_steps(p0, unequal_pair, spec)
        final = fk_pde_solve(p0, unequal_pair, spec, TimeSchedule(1, 0, n), record_times=[0.0])[-1][1]
        assert l1_distance(final, analytic_target(unequal_pair, spec, 0.0, -7.0, 9.0, 256)) < 2e-2

    def test_analytic_mixture_endpoint(self, equal_pair):
        a = analytic_target(equal_pair, InterpolationSpec("mixture", 0.0), 0.0, -7, 9, 128)
        b = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x), -7, 9, 128)
        np.testing.assert_allclose(a.values, b.values, rtol=1e-12)

    def test_csv_output(self, tmp_path):
        p0 = gaussian_grid(1.0, 8, lo=-12, hi=12)
        path = tmp_path / "grid.csv"
        write_grid_csv(path, [(0.0, p0), (0.5, p0)])
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x_center,density"
        assert len(lines) == 17
        assert float(lines[1].split(",")[1]) == pytest.approx(-10.5)


class TestSemigroup:
    def test_identity_at_zero(self):
        x = np.linspace(-2, 2, 5)
        np.testing.assert_allclose(ou_semigroup("linear", 1.0, 0.0)(x), x)
        np.testing.assert_allclose(ou_semigroup("quadratic", 2.0, 0.0)(x), x**2)

    def test_linear_half(self):
        assert ou_semigroup("linear", 1.0, math.log(2)).coeffs[1] == pytest.approx(0.5)

    def test_quadratic_closed_form(self):
        t, a = 0.7, 1.5
        v = ou_semigroup("quadratic", a, t)
        assert v(2.0) == pytest.approx(math.exp(-2 * a * t) * 4 + (1 - math.exp(-2 * a * t)) / a)

    def test_quadratic_is_invariant_in_mean(self):
        # E_pi[P_t x^2] = E_pi[x^2] = 1/alpha
        a = 2.0
        c = ou_semigroup("quadratic", a, 0.9).coeffs
        assert c[0] + c[2] / a == pytest.approx(1 / a)

    def test_linear_variance_ratio(self):
        c = ou_semigroup("linear", 1.0, 0.5).coeffs[1]
        assert c**2 == pytest.approx(math.exp(-1.0))

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            ou_semigroup("cubic", 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            ou_semigroup("linear", 1.0, -1.0)

    def test_variance_decay_small_run(self):
        r = variance_decay_ratios_mc([0.25], k=20_000, seed=3)[0]
        assert r == pytest.approx(math.exp(-0.5), rel=0.05)


class TestCarreDuChamp:
    x = np.linspace(-5, 5, 201)

    def test_gamma_of_linear(self):
        gen = ou_generator(self.x, 1.0)
        np.testing.assert_allclose(gamma_operator(self.x, self.x, gen)[1:-1], 1.0, atol=1e-10)

    def test_gamma_matches_gradient_squared(self):
        gen = ou_generator(self.x, 1.0)
        f = np.sin(self.x)
        g = gamma_operator(f, f, gen)
        dx = self.x[1] - self.x[0]
        assert np.nanmax(np.abs(g - np.cos(self.x) ** 2)) < 2 * dx**2

    def test_constant_gives_zero(self):
        gen = ou_generator(self.x, 1.0)
        c = np.full_like(self.x, 3.0)
        assert np.nanmax(np.abs(gamma_operator(c, c, gen))) < 1e-12
        assert np.nanmax(np.abs(gamma2_operator(c, gen))) < 1e-12

    def test_bilinearity(self):
        gen = ou_generator(self.x, 1.0)
        f, g = np.sin(self.x), self.x**2
        np.testing.assert_allclose(gamma_operator(2.5 * f, g, gen), 2.5 * gamma_operator(f, g, gen), atol=1e-12,
                                   equal_nan=True)

    def test_bakry_emery_equality_for_linear(self):
        gen = ou_generator(self.x, 1.0)
        g2 = gamma2_operator(self.x, gen)
        dx = self.x[1] - self.x[0]
        assert np.nanmax(np.abs(g2 - 1.0)) < dx**2

    def test_bakry_emery_inequality_for_quadratic(self):
        gen = ou_generator(self.x, 1.0)
        q = self.x**2
        gap = gamma2_operator(q, gen) - gamma_operator(q, q, gen)
        assert np.nanmin(gap) >= -1e-8


class TestChi2:
    def test_standard_cases(self):
        res = chi2_cases()
        assert set(res) == {"equilibrium", "ou_no_reaction", "quadratic_reaction"}
        assert all(v < 1e-3 for v in res.values())

    def test_rejects_nonpositive_rho(self):
        pi = gaussian_grid(1.0, 128)
        with pytest.raises(InvalidArgumentError):
            chi2_dissipation_residual(pi.with_values(np.zeros(128)), lambda y: 0 * y, pi)


class TestLemmas:
    def test_heat_as_reaction(self):
        assert heat_as_reaction_error() < 1e-3

    def test_transport_as_reaction(self):
        assert transport_as_reaction_error() < 1e-3

    def test_heat_as_transport(self):
        assert heat_as_transport_error() < 1e-2
