"""Geodesic interpolation between 1-D densities in four geometries.

Densities are either :class:`GaussianPoint` parameters ``(mu, sigma)`` or
:class:`~wfrsmc.oracle.GridDensity` values.  Kinds that keep Gaussians
Gaussian (Wasserstein, exponential, Fisher-Rao) are computed in the
parameter plane; the mixture path leaves the family and is returned on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .core import DomainError, InvalidArgumentError, NumericalFailureError
from .oracle import GridDensity


class GeodesicKind(str, Enum):
    WASSERSTEIN = "wasserstein"
    MIXTURE = "mixture"
    EXPONENTIAL = "exponential"
    FISHER_RAO = "fisher_rao"


@dataclass(frozen=True)
class GaussianPoint:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidArgumentError("Gaussian parameters must be finite")
        if not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * ((x - self.mu) / self.sigma) ** 2 - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def on_grid(self, lo: float, hi: float, n_cells: int) -> GridDensity:
        return GridDensity.from_log_function(self.log_density, lo, hi, n_cells)


Point = Union[GaussianPoint, GridDensity]


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t must lie in [0, 1], got {t}")
    return t


# ---------------------------------------------------------------------------
# Grid geodesics
# ---------------------------------------------------------------------------


def _quantiles(cdf: np.ndarray, faces: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Inverse of the piecewise-linear CDF given at the cell faces."""
    n = len(faces) - 1
    idx = np.clip(np.searchsorted(cdf, levels, side="right") - 1, 0, n - 1)
    lo, hi = cdf[idx], cdf[idx + 1]
    width = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(width > 0, (levels - lo) / width, 0.0)
    return faces[idx] + np.clip(frac, 0.0, 1.0) * (faces[idx + 1] - faces[idx])


def _wasserstein_grid(rho0: GridDensity, rho1: GridDensity, t: float) -> GridDensity:
    faces = rho0.faces
    f0, f1 = rho0.cdf_at_faces(), rho1.cdf_at_faces()
    levels = np.unique(np.concatenate([f0, f1]))
    q = (1 - t) * _quantiles(f0, faces, levels) + t * _quantiles(f1, faces, levels)
    cdf = np.interp(faces, q, levels, left=0.0, right=1.0)
    vals = np.maximum(np.diff(cdf), 0.0) / rho0.dx
    return rho0.with_values(vals).normalized()


def _require_positive(*rhos: GridDensity, kind: str):
    for r in rhos:
        if np.any(r.values <= 0):
            raise DomainError(f"{kind} interpolation needs strictly positive densities")


def fisher_rao_unnormalized(rho0: GridDensity, rho1: GridDensity, t: float) -> GridDensity:
    """Straight segment between square-root densities, before renormalization."""
    t = _check_t(t)
    _require_positive(rho0, rho1, kind="fisher_rao")
    root = (1 - t) * np.sqrt(rho0.values) + t * np.sqrt(rho1.values)
    return rho0.with_values(root * root)


def hellinger_distance(a: GridDensity, b: GridDensity) -> float:
    """``|| sqrt(a) - sqrt(b) ||_{L^2}`` on a common grid (no normalization applied)."""
    if not a.same_grid(b):
        raise InvalidArgumentError("densities live on different grids")
    return float(math.sqrt(np.sum((np.sqrt(a.values) - np.sqrt(b.values)) ** 2) * a.dx))


def grid_geodesic(rho0: GridDensity, rho1: GridDensity, t: float, kind) -> GridDensity:
    """Point at parameter ``t`` on the ``kind`` geodesic from ``rho0`` to ``rho1`` (normalized)."""
    t = _check_t(t)
    kind = GeodesicKind(kind)
    if not rho0.same_grid(rho1):
        raise InvalidArgumentError("densities live on different grids")
    if kind in (GeodesicKind.EXPONENTIAL, GeodesicKind.FISHER_RAO):
        _require_positive(rho0, rho1, kind=kind.value)
    if t == 0.0:
        return rho0.normalized()
    if t == 1.0:
        return rho1.normalized()
    if kind == GeodesicKind.MIXTURE:
        return rho0.with_values((1 - t) * rho0.values + t * rho1.values).normalized()
    if kind == GeodesicKind.EXPONENTIAL:
        lv = (1 - t) * np.log(rho0.values) + t * np.log(rho1.values)
        return rho0.with_values(np.exp(lv - logsumexp(lv) - math.log(rho0.dx)))
    if kind == GeodesicKind.FISHER_RAO:
        return fisher_rao_unnormalized(rho0, rho1, t).normalized()
    return _wasserstein_grid(rho0.normalized(), rho1.normalized(), t)


# ---------------------------------------------------------------------------
# Gaussian-family geodesics
# ---------------------------------------------------------------------------

FR_RK4_STEPS = 128


def _fr_rhs(y):
    mu, sig, dmu, dsig = y
    return np.stack([dmu, dsig, 2.0 * dmu * dsig / sig, (dsig * dsig - 0.5 * dmu * dmu) / sig])


def _fr_integrate_batch(y0: np.ndarray, t, n_steps: Optional[int] = None) -> np.ndarray:
    """RK4 for the Fisher-metric geodesic equations on a ``(4, m)`` batch of states.

    ``t`` may be a scalar or one end time per column; each column takes
    ``n_steps`` steps of its own size.  Columns that blow up or leave the
    half-plane come back as NaN.
    """
    n_steps = n_steps or FR_RK4_STEPS
    y = np.array(y0, dtype=float)
    h = np.broadcast_to(np.asarray(t, dtype=float), y.shape[1:]) / n_steps
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for _ in range(n_steps):
            k1 = _fr_rhs(y)
            k2 = _fr_rhs(y + 0.5 * h * k1)
            k3 = _fr_rhs(y + 0.5 * h * k2)
            k4 = _fr_rhs(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    bad = ~np.all(np.isfinite(y), axis=0) | ~(y[1] > 0)
    y[:, bad] = np.nan
    return y


def _fr_integrate(p0: GaussianPoint, velocity, t: float, n_steps: Optional[int] = None) -> np.ndarray:
    y0 = np.array([[p0.mu], [p0.sigma], [velocity[0]], [velocity[1]]], dtype=float)
    y = _fr_integrate_batch(y0, t, n_steps)[:, 0]
    if np.any(np.isnan(y)):
        raise NumericalFailureError("Fisher-Rao geodesic left the half-plane")
    return y


def _fr_newton(mu0, sig0, target, v, tol: float, max_iter: int):
    """Batched Newton on the endpoint mismatch; returns velocities and final mismatch sizes."""
    m = mu0.size

    def misses(vels):
        k = vels.shape[1] // m
        y0 = np.concatenate([np.tile(mu0, k)[None], np.tile(sig0, k)[None], vels])
        r = _fr_integrate_batch(y0, 1.0)[:2] - np.tile(target, k)
        return np.where(np.isnan(r), np.inf, r)

    def size(r):
        return np.max(np.abs(r), axis=0)

    r = misses(v)
    for _ in range(max_iter):
        todo = size(r) >= tol
        if not np.any(todo):
            break
        eps = 1e-7 * np.maximum(1.0, np.abs(v))
        pert = np.concatenate([v, v + np.array([[1.0], [0.0]]) * eps, v + np.array([[0.0], [1.0]]) * eps], axis=1)
        rr = misses(pert)
        r0, ra, rb = rr[:, :m], rr[:, m:2 * m], rr[:, 2 * m:]
        with np.errstate(invalid="ignore"):
            jac = np.stack([(ra - r0) / eps[0], (rb - r0) / eps[1]], axis=-1).transpose(1, 0, 2)
        ok = np.all(np.isfinite(jac), axis=(1, 2)) & np.all(np.isfinite(r0), axis=0)
        ok &= np.abs(np.linalg.det(np.where(ok[:, None, None], jac, np.eye(2)))) > 0
        jac = np.where(ok[:, None, None], jac, np.eye(2))
        step = np.linalg.solve(jac, np.where(np.isfinite(r0), -r0, 0.0).T[..., None])[..., 0].T
        step[:, ~ok] = 0.0
        lam = np.ones(m)
        accepted = ~todo | ~ok
        new_v, new_r = v.copy(), r.copy()
        for _ in range(30):
            cand = v + lam * step
            rc = misses(cand)
            better = (size(rc) < size(r)) & ~accepted
            new_v[:, better] = cand[:, better]
            new_r[:, better] = rc[:, better]
            accepted |= better
            if np.all(accepted):
                break
            lam = np.where(accepted, lam, 0.5 * lam)
        if np.array_equal(new_v, v):
            break
        v, r = new_v, new_r
    return v, size(r)


def fisher_rao_shoot_many(mu0, sig0, mu1, sig1, tol: float = 1e-12, max_iter: int = 40) -> np.ndarray:
    """Initial velocities ``(2, m)`` of Fisher-metric geodesics hitting each target at ``t = 1``.

    Batched Newton iteration with a finite-difference Jacobian and step
    halving, started from the straight segment in ``(mu, log sigma)``.
    Geodesics that fail are retried by continuation: the target slides
    from the start point to the true endpoint in stages, each stage warm
    started from the previous velocity.
    """
    mu0, sig0, mu1, sig1 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (mu0, sig0, mu1, sig1))
    target = np.stack([mu1, sig1])
    v0 = np.stack([mu1 - mu0, sig0 * np.log(sig1 / sig0)])
    v, err = _fr_newton(mu0, sig0, target, v0, tol, max_iter)
    for stages in (4, 16, 64):
        bad = np.flatnonzero(~(err < 1e-9))
        if bad.size == 0:
            break
        m0, s0 = mu0[bad], sig0[bad]
        vb = np.zeros((2, bad.size))
        for lam in np.linspace(0.0, 1.0, stages + 1)[1:]:
            mid = np.stack([(1 - lam) * m0 + lam * mu1[bad], s0 * (sig1[bad] / s0) ** lam])
            vb, eb = _fr_newton(m0, s0, mid, vb, tol, max_iter)
        v[:, bad], err[bad] = vb, eb
    worst = float(np.max(err))
    if not worst < 1e-9:
        raise NumericalFailureError(f"geodesic shooting did not converge (mismatch {worst:.3g})")
    return v


def fisher_rao_shoot(p0: GaussianPoint, p1: GaussianPoint, tol: float = 1e-12, max_iter: int = 60):
    """Initial velocity of the Fisher-metric geodesic from ``p0`` reaching ``p1`` at ``t = 1``."""
    return fisher_rao_shoot_many(p0.mu, p0.sigma, p1.mu, p1.sigma, tol, max_iter)[:, 0]


def fisher_rao_points(starts, ends, ts) -> list:
    """Points ``gamma(starts[k], ends[k], ts[k])`` on Fisher-Rao geodesics, computed as one batch."""
    mu0 = np.array([p.mu for p in starts])
    sig0 = np.array([p.sigma for p in starts])
    ts = np.asarray(ts, dtype=float)
    same = np.array([a == b for a, b in zip(starts, ends)])
    v = np.zeros((2, len(starts)))
    pairs = sorted({(a, b) for a, b, eq in zip(starts, ends, same) if not eq},
                   key=lambda ab: (ab[0].mu, ab[0].sigma, ab[1].mu, ab[1].sigma))
    if pairs:
        vel = fisher_rao_shoot_many([a.mu for a, _ in pairs], [a.sigma for a, _ in pairs],
                                    [b.mu for _, b in pairs], [b.sigma for _, b in pairs])
        lookup = {pair: vel[:, i] for i, pair in enumerate(pairs)}
        for k, (a, b) in enumerate(zip(starts, ends)):
            if not same[k]:
                v[:, k] = lookup[(a, b)]
    y = _fr_integrate_batch(np.concatenate([mu0[None], sig0[None], v]), ts)
    out = []
    for k, (a, t) in enumerate(zip(starts, ts)):
        if t == 0.0 or same[k]:
            out.append(a)
        else:
            out.append(GaussianPoint(float(y[0, k]), float(y[1, k])))
    return out


def fisher_rao_distance(p0: GaussianPoint, p1: GaussianPoint) -> float:
    """Closed-form Fisher-Rao distance on univariate Gaussians (scaled hyperbolic plane)."""
    du = (p1.mu - p0.mu) / math.sqrt(2.0)
    ds = p1.sigma - p0.sigma
    return math.sqrt(2.0) * math.acosh(1.0 + (du * du + ds * ds) / (2.0 * p0.sigma * p1.sigma))


def fisher_rao_speed(p: GaussianPoint, dmu: float, dsigma: float) -> float:
    return math.sqrt(dmu * dmu + 2.0 * dsigma * dsigma) / p.sigma


def _default_grid(*points, n_cells: int = 2048):
    lo, hi = math.inf, -math.inf
    for p in points:
        if isinstance(p, GridDensity):
            return p.lo, p.hi, p.n_cells
        lo = min(lo, p.mu - 10 * p.sigma)
        hi = max(hi, p.mu + 10 * p.sigma)
    return lo, hi, n_cells


def gaussian_geodesic(p0: GaussianPoint, p1: GaussianPoint, t: float, kind,
                      grid: Optional[tuple] = None) -> Point:
    """Geodesic point between two Gaussians; the mixture kind returns a grid density.

    ``grid = (lo, hi, n_cells)`` controls the grid of the mixture result.
    """
    t = _check_t(t)
    kind = GeodesicKind(kind)
    if kind == GeodesicKind.WASSERSTEIN:
        return GaussianPoint((1 - t) * p0.mu + t * p1.mu, (1 - t) * p0.sigma + t * p1.sigma)
    if kind == GeodesicKind.EXPONENTIAL:
        prec = (1 - t) / p0.sigma**2 + t / p1.sigma**2
        lin = (1 - t) * p0.mu / p0.sigma**2 + t * p1.mu / p1.sigma**2
        return GaussianPoint(lin / prec, 1.0 / math.sqrt(prec))
    if kind == GeodesicKind.FISHER_RAO:
        return fisher_rao_points([p0], [p1], [t])[0]
    lo, hi, n = grid or _default_grid(p0, p1)
    return grid_geodesic(p0.on_grid(lo, hi, n), p1.on_grid(lo, hi, n), t, kind)


def geodesic(a: Point, b: Point, t: float, kind, grid: Optional[tuple] = None) -> Point:
    """Dispatch to the parametric form when both ends are Gaussian points, else to the grid."""
    if isinstance(a, GaussianPoint) and isinstance(b, GaussianPoint):
        return gaussian_geodesic(a, b, t, kind, grid)
    lo, hi, n = grid or _default_grid(a, b)
    ga = a.on_grid(lo, hi, n) if isinstance(a, GaussianPoint) else a
    gb = b.on_grid(lo, hi, n) if isinstance(b, GaussianPoint) else b
    return grid_geodesic(ga, gb, t, kind)


def summarize(point: Point) -> tuple[float, float]:
    """``(mean, standard deviation)`` of a Gaussian point or grid density."""
    if isinstance(point, GaussianPoint):
        return point.mu, point.sigma
    return point.mean(), point.std()


def geodesic_many(starts, ends, ts, kind, grid: Optional[tuple] = None) -> list:
    """``[geodesic(a, b, t, kind) for a, b, t in ...]``, batching Fisher-Rao shots on Gaussian points."""
    kind = GeodesicKind(kind)
    starts, ends, ts = list(starts), list(ends), [float(t) for t in ts]
    for t in ts:
        _check_t(t)
    gaussian = all(isinstance(a, GaussianPoint) for a in starts + ends)
    if kind == GeodesicKind.FISHER_RAO and gaussian:
        return fisher_rao_points(starts, ends, ts)
    return [geodesic(a, b, t, kind, grid) for a, b, t in zip(starts, ends, ts)]


def median_trajectory(p: GaussianPoint, u: GaussianPoint, v: GaussianPoint, edge_kind_i, uv_kind_j,
                      n_samples: int, grid: Optional[tuple] = None) -> list:
    """Midpoints, in kind ``i``, between ``p`` and each point of the kind-``j`` geodesic from ``u`` to ``v``.

    This is one concrete reading of "projecting the u-v geodesic through p".
    Returns a list of ``(s, point)``.
    """
    if n_samples < 2:
        raise InvalidArgumentError("n_samples must be at least 2")
    grid = grid or _default_grid(p, u, v)
    ss = [float(s) for s in np.linspace(0.0, 1.0, n_samples)]
    base = geodesic_many([u] * n_samples, [v] * n_samples, ss, uv_kind_j, grid)
    mids = geodesic_many([p] * n_samples, base, [0.5] * n_samples, edge_kind_i, grid)
    return list(zip(ss, mids))


TRIANGLE_P = GaussianPoint(0.0, 2.0)
TRIANGLE_U = GaussianPoint(-2.0, 0.6)
TRIANGLE_V = GaussianPoint(2.0, 0.6)


def triangle_rows(p: GaussianPoint, u: GaussianPoint, v: GaussianPoint, edge_kind_i, uv_kind_j,
                  n_samples: int = 21, grid: Optional[tuple] = None) -> list:
    """Rows ``(curve, s, t, mu, sigma)`` tracing the surface ``gamma_i(gamma_j(u, v, s), p, t)``.

    Curves: ``base`` (t = 0, the kind-j u-v geodesic), ``collapse_u`` (s = 0)
    and ``collapse_v`` (s = 1, the kind-i geodesics toward p) and ``median``
    (t = 1/2).  Grid-valued points are reported by their mean and standard
    deviation.
    """
    grid = grid or _default_grid(p, u, v)
    ss = [float(s) for s in np.linspace(0.0, 1.0, n_samples)]
    base = geodesic_many([u] * n_samples, [v] * n_samples, ss, uv_kind_j, grid)
    rows = [("base", s, 0.0) + summarize(w) for s, w in zip(ss, base)]
    ends = [base[0]] * n_samples + [base[-1]] * n_samples
    collapse = geodesic_many(ends, [p] * (2 * n_samples), ss + ss, edge_kind_i, grid)
    for k, pt in enumerate(collapse):
        name, s = ("collapse_u", 0.0) if k < n_samples else ("collapse_v", 1.0)
        rows.append((name, s, ss[k % n_samples]) + summarize(pt))
    mids = geodesic_many([p] * n_samples, base, [0.5] * n_samples, edge_kind_i, grid)
    rows.extend(("median", s, 0.5) + summarize(m) for s, m in zip(ss, mids))
    return rows


def write_triangle_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("curve,s,t,mu,sigma\n")
        for curve, s, t, mu, sig in rows:
            fh.write(f"{curve},{float(s)!r},{float(t)!r},{float(mu)!r},{float(sig)!r}\n")


def write_geodesic_csv(path, samples) -> None:
    """Write ``(t, mu, sigma)`` rows for Gaussian points or ``(t, cell_center, density)`` rows for grids."""
    with open(path, "w", newline="") as fh:
        if all(isinstance(pt, GaussianPoint) for _, pt in samples):
            fh.write("t,mu,sigma\n")
            for t, pt in samples:
                fh.write(f"{float(t)!r},{float(pt.mu)!r},{float(pt.sigma)!r}\n")
            return
        fh.write("t,cell_center,density\n")
        for t, g in samples:
            for xc, val in zip(g.centers, g.values):
                fh.write(f"{float(t)!r},{float(xc)!r},{float(val)!r}\n")
