"""Grid-based verification machinery in one dimension.

:func:`fk_pde_solve` integrates the transport-diffusion-reaction equation

    dp/dt = -(p v)' + sigma^2/2 p'' + p (psi - E_p psi)

on a uniform cell-centered grid by explicit operator splitting, independently
of any particle code.  The rest of the module holds closed forms and discrete
operators used to check identities: the chi-square dissipation balance, the
OU semigroup, and the carre du champ operators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import correctors
from .core import (
    PURPOSE_INIT,
    PURPOSE_STATE,
    Ensemble,
    InvalidArgumentError,
    NumericalFailureError,
    RngStream,
    StepSizeError,
    TimeSchedule,
)
from .correctors import InterpolationKind, InterpolationSpec
from .dynamics import ula_step
from .models import QuadraticTarget

log = logging.getLogger(__name__)


@dataclass
class GridDensity:
    """Cell-centered nonnegative values on ``n_cells`` uniform cells of ``[lo, hi]``.

    The mass is the finite-volume sum ``sum(values) * dx``.
    """

    lo: float
    hi: float
    n_cells: int
    values: np.ndarray

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidArgumentError("grid needs hi > lo")
        if self.n_cells < 3:
            raise InvalidArgumentError("grid needs at least 3 cells")
        self.values = np.asarray(self.values, dtype=float).reshape(self.n_cells)

    @classmethod
    def from_function(cls, fn: Callable, lo: float, hi: float, n_cells: int,
                      normalize: bool = True) -> "GridDensity":
        g = cls(lo, hi, n_cells, np.zeros(n_cells))
        g.values = np.asarray(fn(g.centers), dtype=float)
        return g.normalized() if normalize else g

    @classmethod
    def from_log_function(cls, log_fn: Callable, lo: float, hi: float, n_cells: int) -> "GridDensity":
        g = cls(lo, hi, n_cells, np.zeros(n_cells))
        lv = np.asarray(log_fn(g.centers), dtype=float)
        g.values = np.exp(lv - (logsumexp(lv) + math.log(g.dx)))
        return g

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.lo + np.arange(self.n_cells + 1) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.values) * self.dx)

    def normalized(self) -> "GridDensity":
        m = self.mass()
        if not m > 0:
            raise NumericalFailureError("cannot normalize a grid density with zero mass")
        return GridDensity(self.lo, self.hi, self.n_cells, self.values / m)

    def with_values(self, values) -> "GridDensity":
        return GridDensity(self.lo, self.hi, self.n_cells, np.asarray(values, dtype=float).copy())

    def same_grid(self, other: "GridDensity") -> bool:
        return (self.lo, self.hi, self.n_cells) == (other.lo, other.hi, other.n_cells)

    def mean(self) -> float:
        return float(np.sum(self.values * self.centers) * self.dx / self.mass())

    def std(self) -> float:
        m = self.mean()
        return float(math.sqrt(np.sum(self.values * (self.centers - m) ** 2) * self.dx / self.mass()))

    def cdf_at_faces(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.values) * self.dx])
        return c / c[-1]


def l1_distance(a: GridDensity, b: GridDensity) -> float:
    if not a.same_grid(b):
        raise InvalidArgumentError("densities live on different grids")
    return float(np.sum(np.abs(a.values - b.values)) * a.dx)


# ---------------------------------------------------------------------------
# Explicit transport-diffusion-reaction solver
# ---------------------------------------------------------------------------


def _advect(p: np.ndarray, vf: np.ndarray, h: float, dx: float, scheme: str) -> np.ndarray:
    """Conservative advection with Dirichlet-zero ghosts; ``vf`` lives on the faces."""
    pad = np.concatenate([[0.0, 0.0], p, [0.0, 0.0]])
    # neighbours of face j (between cells j-1 and j): indices in pad are j+1 and j+2
    left = pad[1:-2]
    right = pad[2:-1]
    vp = np.maximum(vf, 0.0)
    vm = np.minimum(vf, 0.0)
    flux = vp * left + vm * right
    if scheme in ("limited", "lax_wendroff"):
        # Lax-Wendroff anti-diffusive correction, van Leer limited unless "lax_wendroff"
        jump = right - left
        if scheme == "limited":
            far_left = pad[0:-3]
            far_right = pad[3:]
            up_jump = np.where(vf >= 0, left - far_left, far_right - right)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(jump != 0.0, up_jump / jump, 0.0)
            phi = (r + np.abs(r)) / (1.0 + np.abs(r))
        else:
            phi = 1.0
        courant = np.abs(vf) * h / dx
        flux = flux + 0.5 * np.abs(vf) * (1.0 - courant) * phi * jump
    elif scheme != "upwind":
        raise InvalidArgumentError(f"unknown advection scheme {scheme!r}")
    return p - (h / dx) * (flux[1:] - flux[:-1])


def _diffuse(p: np.ndarray, coef: float, h: float, dx: float) -> np.ndarray:
    if coef == 0.0:
        return p
    pad = np.concatenate([[0.0], p, [0.0]])
    return p + coef * h / (dx * dx) * (pad[2:] - 2.0 * p + pad[:-2])


def integrate_fk(
    p0: GridDensity,
    velocity: Optional[Callable[[float, np.ndarray], np.ndarray]],
    sigma: Callable[[float], float],
    potential: Optional[Callable[[float, np.ndarray], np.ndarray]],
    sched: TimeSchedule,
    record_times: Optional[Sequence[float]] = None,
    advection: str = "limited",
    mass_tol: float = 1e-6,
    boundary_tol: float = 1e-10,
):
    """Integrate the normalized Feynman-Kac PDE on ``p0``'s grid.

    ``velocity(t, faces)`` and ``potential(t, centers)`` are evaluated at the
    left end of each step.  Returns a list of ``(t, GridDensity)`` at the
    requested times (all grid times when ``record_times`` is None).
    """
    dx = p0.dx
    faces, centers = p0.faces, p0.centers
    p = p0.values.copy()
    scale = float(np.max(p))
    if max(p[0], p[-1]) > boundary_tol * max(scale, 1.0):
        raise InvalidArgumentError("initial density is not negligible at the grid boundary")
    if record_times is None:
        wanted = set(range(sched.n_steps + 1))
    else:
        wanted = {sched.index_of(t) for t in record_times}
    out = []
    if 0 in wanted:
        out.append((sched.time(0), p0.with_values(p)))
    h = sched.h
    warned = False
    for k in range(sched.n_steps):
        t = sched.time(k)
        s = float(sigma(t))
        coef = 0.5 * s * s
        if coef * h > 0.5 * dx * dx * (1 + 1e-12):
            raise StepSizeError(f"diffusion CFL violated at t={t:.4g}: h={h:.3g} > dx^2/sigma^2")
        mass_before = np.sum(p) * dx
        if velocity is not None:
            vf = np.asarray(velocity(t, faces), dtype=float)
            vmax = float(np.max(np.abs(vf)))
            if vmax * h > dx * (1 + 1e-12):
                raise StepSizeError(f"advection CFL violated at t={t:.4g}: |v|h={vmax * h:.3g} > dx")
            p = _advect(p, vf, h, dx, advection)
        p = _diffuse(p, coef, h, dx)
        mass_after = np.sum(p) * dx
        if abs(mass_after - mass_before) > mass_tol:
            raise NumericalFailureError(
                f"mass changed by {mass_after - mass_before:.3g} in one transport step at t={t:.4g}"
            )
        if potential is not None:
            psi = np.asarray(potential(t, centers), dtype=float)
            with np.errstate(invalid="ignore", over="ignore"):
                mean_psi = np.sum(psi * p) / np.sum(p)
                p = p * np.exp(h * (psi - mean_psi))
        if np.any(~np.isfinite(p)):
            raise NumericalFailureError(f"non-finite density at t={t:.4g}")
        p = p / (np.sum(p) * dx)
        if not warned and max(p[0], p[-1]) > boundary_tol * max(float(np.max(p)), 1.0):
            log.warning("density reached the grid boundary at t=%.4g; widen the grid", t)
            warned = True
        if k + 1 in wanted:
            out.append((sched.time(k + 1), p0.with_values(p)))
    return out


def _interp_fields(fields, interp: InterpolationSpec):
    """Exact guided velocity and potential on the grid (true log-ratio, no tracking)."""

    def parts(t, x):
        pts = np.asarray(x, dtype=float).reshape(-1, 1)
        s1, s2, _, _, l1, l2 = fields.evaluate(t, pts)
        ev = correctors.guided_eval(interp, s1, s2, l2 - l1, fields.sigma(t))
        return pts, ev

    def velocity(t, x):
        pts, ev = parts(t, x)
        s = fields.sigma(t)
        return (-fields.f(t, pts) + s * s * ev.guided_score)[:, 0]

    def potential(t, x):
        return parts(t, x)[1].psi

    return velocity, potential


def fk_pde_solve(
    p0: GridDensity,
    fields,
    interp: InterpolationSpec,
    sched: TimeSchedule,
    record_times: Optional[Sequence[float]] = None,
    advection: str = "limited",
):
    """Grid solution of the guided sampling PDE for one interpolation kind (1-D)."""
    if fields.dim != 1:
        raise InvalidArgumentError("the grid oracle is one-dimensional")
    velocity, potential = _interp_fields(fields, interp)
    if interp.kind == InterpolationKind.MIXTURE:
        potential = None
    return integrate_fk(p0, velocity, fields.sigma, potential, sched, record_times, advection)


def cfl_steps(p0: GridDensity, fields, interp: InterpolationSpec, t_start: float = 1.0,
              t_end: float = 0.0, safety: float = 0.9, n_probe: int = 201, multiple_of: int = 1) -> int:
    """Smallest step count over ``[t_end, t_start]`` satisfying both CFL limits.

    The count is rounded up to a multiple of ``multiple_of`` so that the grid
    contains every point of a coarser schedule with that many steps.
    """
    velocity, _ = _interp_fields(fields, interp)
    faces = p0.faces
    dx = p0.dx
    worst = 0.0
    for t in np.linspace(t_start, t_end, n_probe):
        s = fields.sigma(t)
        vmax = float(np.max(np.abs(velocity(t, faces))))
        worst = max(worst, vmax / dx, s * s / (dx * dx))
    n = int(math.ceil(abs(t_start - t_end) * worst / safety))
    return multiple_of * -(-n // multiple_of)


def analytic_target(fields, interp: InterpolationSpec, t: float, lo: float, hi: float,
                    n_cells: int) -> GridDensity:
    """Exact interpolated marginal at diffusion time ``t``, normalized on the grid."""
    q1, q2 = fields.marginals(t)
    b = interp.beta

    def logp(x):
        l1, l2 = q1.log_density(x), q2.log_density(x)
        if interp.kind == InterpolationKind.GEOMETRIC:
            return (1 - b) * l1 + b * l2
        terms = []
        scale = 0.5 if interp.kind == InterpolationKind.FISHER_RAO else 1.0
        if b < 1:
            terms.append(math.log1p(-b) + scale * l1)
        if b > 0:
            terms.append(math.log(b) + scale * l2)
        return np.logaddexp.reduce(terms, axis=0) / scale

    return GridDensity.from_log_function(logp, lo, hi, n_cells)


# ---------------------------------------------------------------------------
# Discrete derivatives and carre du champ
# ---------------------------------------------------------------------------


def central_gradient(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order centered first derivative; NaN in the two edge cells."""
    out = np.full_like(f, np.nan, dtype=float)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dx)
    return out


def central_laplacian(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.full_like(f, np.nan, dtype=float)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (dx * dx)
    return out


@dataclass(frozen=True)
class DiscreteGenerator:
    """Centered-difference diffusion generator ``L f = a f'' + b(x) f'``.

    Edge cells have no centered stencil and come back as NaN; NaN spreads
    inward one cell per application.
    """

    x: np.ndarray
    drift: np.ndarray
    diffusion: float = 1.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def __call__(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return self.diffusion * central_laplacian(f, self.dx) + self.drift * central_gradient(f, self.dx)


def langevin_generator(x: np.ndarray, grad_potential: Callable) -> DiscreteGenerator:
    """``L f = f'' - V'(x) f'`` on the grid ``x``."""
    x = np.asarray(x, dtype=float)
    return DiscreteGenerator(x, -np.asarray(grad_potential(x), dtype=float), 1.0)


def ou_generator(x: np.ndarray, alpha: float = 1.0) -> DiscreteGenerator:
    return langevin_generator(x, lambda y: alpha * y)


def gamma_operator(f, g, generator: DiscreteGenerator) -> np.ndarray:
    """``(L(fg) - f Lg - g Lf) / 2``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return 0.5 * (generator(f * g) - f * generator(g) - g * generator(f))


def gamma2_operator(f, generator: DiscreteGenerator) -> np.ndarray:
    """``(L Gamma(f) - 2 Gamma(f, Lf)) / 2``."""
    f = np.asarray(f, dtype=float)
    return 0.5 * (generator(gamma_operator(f, f, generator)) - 2.0 * gamma_operator(f, generator(f), generator))


# ---------------------------------------------------------------------------
# OU semigroup closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OUSemigroupValue:
    """``P_t f`` as a polynomial ``sum_k coeffs[k] x^k`` for the OU generator ``f'' - alpha x f'``."""

    f_kind: str
    alpha: float
    t: float
    coeffs: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * x**k for k, c in enumerate(self.coeffs))


def ou_semigroup(f_kind: str, alpha: float, t: float) -> OUSemigroupValue:
    if t < 0:
        raise InvalidArgumentError("t must be nonnegative")
    if alpha <= 0:
        raise InvalidArgumentError("alpha must be positive")
    if f_kind == "linear":
        coeffs = (0.0, math.exp(-alpha * t))
    elif f_kind == "quadratic":
        e2 = math.exp(-2 * alpha * t)
        coeffs = (-math.expm1(-2 * alpha * t) / alpha, 0.0, e2)
    else:
        raise InvalidArgumentError(f"unknown test function kind {f_kind!r}")
    return OUSemigroupValue(f_kind, alpha, t, coeffs)


def variance_decay_ratios_mc(times, k: int = 100_000, seed: int = 0, alpha: float = 1.0,
                             step: float = 1e-3) -> list:
    """Monte Carlo ``Var_pi(P_t f) / Var_pi(f)`` for ``f(x) = x`` under OU, at each of ``times``.

    Starts ``k`` particles from the invariant law, runs unadjusted Langevin
    once up to the largest time and estimates ``P_t f`` at each requested
    time by least-squares regression of ``X_t`` on ``X_0`` (exact for linear
    ``f``, since ``P_t f`` is linear).
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise InvalidArgumentError("times must be nonnegative")
    marks = {int(round(t / step)): t for t in times}
    x0 = RngStream(seed, 0, PURPOSE_INIT).normal(k, 1) / math.sqrt(alpha)
    a = x0[:, 0] - x0[:, 0].mean()
    e = Ensemble(x0.copy(), np.zeros(k), np.zeros(k), np.ones(k, bool), 0.0, track_ell=False)
    tgt = QuadraticTarget(alpha)
    found = {}
    for i in range(max(marks) + 1):
        if i in marks:
            b = e.x[:, 0] - e.x[:, 0].mean()
            slope = float(a @ b / (a @ a))
            found[marks[i]] = float(np.var(slope * a) / np.var(a))
        if i < max(marks):
            e = ula_step(e, tgt, step, 1.0, RngStream(seed, i, PURPOSE_STATE))
    return [found[t] for t in times]


def variance_decay_ratio_mc(t: float, k: int = 100_000, seed: int = 0, alpha: float = 1.0,
                            step: float = 1e-3) -> float:
    return variance_decay_ratios_mc([t], k, seed, alpha, step)[0]


# ---------------------------------------------------------------------------
# Chi-square dissipation identity
# ---------------------------------------------------------------------------


def chi2_dissipation_terms(rho: np.ndarray, g: np.ndarray, pi: np.ndarray, dx: float, sigma: float):
    """Right-hand side of the chi-square balance for relative density ``rho``."""
    grad = central_gradient(rho, dx)
    gamma = 0.5 * sigma * sigma * grad**2
    inner = slice(1, -1)
    w = pi * dx
    var = float(np.sum((rho - 1.0) ** 2 * w))
    dissipation = float(np.sum(gamma[inner] * w[inner]))
    mean_g = float(np.sum(g * rho * w))
    return -dissipation + float(np.sum(rho * (rho - 1.0) * g * w)) - mean_g * var, var


def chi2_dissipation_residual(rho: GridDensity, g: Callable, pi: GridDensity, sigma: float = math.sqrt(2.0),
                              alpha: float = 1.0, h: float = 1e-4, advection: str = "limited") -> float:
    """``|LHS - RHS|`` of the chi-square dissipation identity under OU plus frozen reweighting.

    ``rho`` holds relative-density values ``p/pi`` on ``pi``'s grid.  The
    left side differentiates ``Var_pi(rho_t)`` centrally across two solver
    steps; the right side is evaluated at the middle snapshot.
    """
    if not rho.same_grid(pi):
        raise InvalidArgumentError("rho and pi must share a grid")
    if np.any(rho.values <= 0):
        raise InvalidArgumentError("relative density must be strictly positive")
    pi_vals = pi.normalized().values
    x = pi.centers
    g_vals = np.asarray(g(x), dtype=float) * np.ones_like(x)
    p0 = pi.with_values(rho.values * pi_vals).normalized()
    sched = TimeSchedule(0.0, 2 * h, 2)
    traj = integrate_fk(
        p0,
        lambda t, xf: -alpha * xf,
        lambda t: sigma,
        lambda t, xc: g_vals,
        sched,
        advection=advection,
        boundary_tol=1e-8,
    )
    rhos = [snap.values / pi_vals for _, snap in traj]
    w = pi_vals * pi.dx
    v0 = float(np.sum((rhos[0] - 1.0) ** 2 * w))
    v2 = float(np.sum((rhos[2] - 1.0) ** 2 * w))
    lhs = 0.5 * (v2 - v0) / (2 * h)
    rhs, _ = chi2_dissipation_terms(rhos[1], g_vals, pi_vals, pi.dx, sigma)
    return abs(lhs - rhs)


def chi2_cases(n_cells: int = 1024) -> dict:
    """Residuals of the chi-square balance on the three standard instances."""
    lo, hi = -8.0, 8.0
    pi = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x), lo, hi, n_cells)
    x = pi.centers
    tgt = QuadraticTarget(1.0)
    rho_shift = np.exp(-0.5 * ((x - 0.5) / 0.8) ** 2 + 0.5 * x * x) / 0.8
    return {
        "equilibrium": chi2_dissipation_residual(pi.with_values(np.ones_like(x)), lambda y: -y * y, pi),
        "ou_no_reaction": chi2_dissipation_residual(pi.with_values(rho_shift), lambda y: 0.0 * y, pi,
                                                           alpha=tgt.stiffness),
        "quadratic_reaction": chi2_dissipation_residual(
            pi.with_values(1.0 + 0.1 * x * np.exp(-x * x)), lambda y: -y * y, pi),
    }


# ---------------------------------------------------------------------------
# Transport, diffusion and reaction views of the same evolution
# ---------------------------------------------------------------------------


def _relative_interior_error(a: np.ndarray, b: np.ndarray, margin: int = 2) -> float:
    """``max |a - b| / max |b|`` over cells at least ``margin`` away from the edges."""
    inner = slice(margin, -margin)
    return float(np.max(np.abs(a[inner] - b[inner])) / np.max(np.abs(b[inner])))


def _solver_time_derivative(p: GridDensity, velocity, sigma: float, h: float) -> np.ndarray:
    """``d/dt p`` from solver steps: centered in time for pure transport, one-sided for heat flow.

    Heat flow cannot be run backward, but its explicit step is exactly
    ``h sigma^2/2`` times the centered second difference, so the one-sided
    quotient carries no time-discretization error.
    """
    sig = (lambda t: sigma)
    kw = dict(record_times=[h], advection="lax_wendroff", boundary_tol=1e-6)
    fwd = integrate_fk(p, velocity, sig, None, TimeSchedule(0.0, h, 1), **kw)
    if sigma > 0.0 or velocity is None:
        return (fwd[-1][1].values - p.values) / h
    bwd = integrate_fk(p, lambda t, x: -velocity(t, x), sig, None, TimeSchedule(0.0, h, 1), **kw)
    return (fwd[-1][1].values - bwd[-1][1].values) / (2 * h)


def heat_as_reaction_error(n_cells: int = 1024, lo: float = -8.0, hi: float = 8.0, var0: float = 0.5,
                           sigma: float = 1.0) -> float:
    """Relative error between the solver's heat-flow derivative and the reaction-rate form.

    Heat flow ``dmu/dt = sigma^2/2 mu''`` is compared with
    ``sigma^2/2 (Delta log mu + |grad log mu|^2) mu`` using the exact Gaussian score.
    """
    p = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x / var0), lo, hi, n_cells)
    x = p.centers
    h = 0.25 * p.dx**2 / sigma**2
    dmu = _solver_time_derivative(p, None, sigma, h)
    rate = correctors.diffusion_to_fr_rate((-x / var0)[:, None], np.full_like(x, -1.0 / var0), sigma)
    return _relative_interior_error(dmu, rate * p.values)


def transport_as_reaction_error(n_cells: int = 1024, lo: float = -8.0, hi: float = 8.0) -> float:
    """Relative error between the solver's continuity-equation derivative and the reaction-rate form.

    Uses ``mu = N(0.3, 0.8^2)`` transported by ``v(x) = 0.5 sin(x) - 0.2 x``.
    """
    m, s = 0.3, 0.8
    p = GridDensity.from_function(lambda x: np.exp(-0.5 * ((x - m) / s) ** 2), lo, hi, n_cells)
    x = p.centers
    vel = lambda y: 0.5 * np.sin(y) - 0.2 * y  # noqa: E731
    div_v = 0.5 * np.cos(x) - 0.2
    h = 0.05 * p.dx
    dmu = _solver_time_derivative(p, lambda t, y: vel(y), 0.0, h)
    rate = correctors.drift_to_fr_rate(vel(x)[:, None], div_v, (-(x - m) / s**2)[:, None])
    return _relative_interior_error(dmu, rate * p.values)


def heat_as_transport_error(n_cells: int = 1024, lo: float = -8.0, hi: float = 8.0, var0: float = 0.25,
                            sigma: float = 1.0, duration: float = 0.5) -> float:
    """L1 distance after transporting ``N(0, var0)`` by ``-sigma^2/2 grad log mu_t`` versus exact heat flow."""
    p0 = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x / var0), lo, hi, n_cells)

    def velocity(t, x):
        score = -x / (var0 + sigma**2 * t)
        return correctors.diffusion_to_drift(score, sigma)

    vmax = float(np.max(np.abs(velocity(0.0, p0.faces))))
    n_steps = int(math.ceil(duration * vmax / (0.5 * p0.dx)))
    traj = integrate_fk(p0, velocity, lambda t: 0.0, None, TimeSchedule(0.0, duration, n_steps),
                        record_times=[duration])
    var1 = var0 + sigma**2 * duration
    exact = GridDensity.from_function(lambda x: np.exp(-0.5 * x * x / var1), lo, hi, n_cells)
    return l1_distance(traj[-1][1], exact)


def write_grid_csv(path, trajectory) -> None:
    """Write ``(t, x_center, density)`` rows for a list of ``(t, GridDensity)``."""
    with open(path, "w", newline="") as fh:
        fh.write("t,x_center,density\n")
        for t, g in trajectory:
            for xc, val in zip(g.centers, g.values):
                fh.write(f"{float(t)!r},{float(xc)!r},{float(val)!r}\n")
