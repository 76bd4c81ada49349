"""Analytic density families with exact scores.

Gaussian mixtures with isotropic components stay Gaussian mixtures under
linear OU noising, so every noised marginal ``q_t`` and its score and
Laplacian-of-log are available in closed form.  The double well is a 1-D
metastability benchmark for plain Langevin sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .core import DiffusionSchedule, InvalidArgumentError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianComponent:
    mean: tuple
    var: float
    log_weight: float = 0.0

    def __post_init__(self):
        if not self.var > 0:
            raise InvalidArgumentError(f"component variance must be positive, got {self.var}")


def _points(x, dim: int):
    """Return ``(pts, shape, vshape)``.

    ``pts`` is ``(n, dim)``; ``shape`` is the output shape of scalar fields and
    ``vshape`` that of vector fields.  1-D models accept bare scalars/arrays.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if dim != 1:
            raise InvalidArgumentError(f"expected points of dimension {dim}")
        return x.reshape(1, 1), (), (1,)
    if dim == 1 and x.shape[-1] != 1:
        return x.reshape(-1, 1), x.shape, x.shape
    if x.shape[-1] != dim:
        raise InvalidArgumentError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x.reshape(-1, dim), x.shape[:-1], x.shape


class GaussianMixtureModel:
    """Mixture of isotropic Gaussians ``sum_j w_j N(mean_j, var_j I)``.

    Evaluation methods accept a single point, a ``(n, d)`` batch, or (for
    1-D models) any array of scalars.
    """

    def __init__(self, components: Sequence[GaussianComponent]):
        if not components:
            raise InvalidArgumentError("a mixture needs at least one component")
        means = np.array([np.atleast_1d(np.asarray(c.mean, dtype=float)) for c in components])
        if means.ndim != 2:
            raise InvalidArgumentError("all component means must share one dimension")
        self.means = means
        self.vars = np.array([float(c.var) for c in components])
        self.log_weights = np.array([float(c.log_weight) for c in components])
        total = float(np.sum(np.exp(self.log_weights)))
        if abs(total - 1.0) > 1e-10:
            raise InvalidArgumentError(f"mixture weights sum to {total}, expected 1")
        if not np.all(np.isfinite(self.means)):
            raise InvalidArgumentError("component means must be finite")

    @classmethod
    def from_triples(cls, triples, normalize: bool = True) -> "GaussianMixtureModel":
        """Build from ``(mean, var, weight)`` triples; weights are normalized by default."""
        triples = list(triples)
        if not triples:
            raise InvalidArgumentError("a mixture needs at least one component")
        weights = np.array([float(t[2]) for t in triples])
        if np.any(weights <= 0):
            raise InvalidArgumentError("mixture weights must be positive")
        if normalize:
            weights = weights / weights.sum()
        return cls(
            [GaussianComponent(tuple(np.atleast_1d(t[0]).tolist()), float(t[1]), math.log(w))
             for t, w in zip(triples, weights)]
        )

    @classmethod
    def gaussian(cls, mean, var: float = 1.0) -> "GaussianMixtureModel":
        return cls([GaussianComponent(tuple(np.atleast_1d(mean).tolist()), float(var), 0.0)])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[GaussianComponent]:
        return [
            GaussianComponent(tuple(m.tolist()), float(v), float(lw))
            for m, v, lw in zip(self.means, self.vars, self.log_weights)
        ]

    def _component_logpdf(self, pts):
        d = self.dim
        sq = np.sum((pts[:, None, :] - self.means[None]) ** 2, axis=-1)
        return self.log_weights - 0.5 * d * (LOG_2PI + np.log(self.vars)) - 0.5 * sq / self.vars

    def log_density(self, x):
        pts, shape, _ = _points(x, self.dim)
        out = logsumexp(self._component_logpdf(pts), axis=1)
        return out.reshape(shape) if shape else float(out[0])

    def density(self, x):
        return np.exp(self.log_density(x))

    def _score_parts(self, pts):
        r = softmax(self._component_logpdf(pts), axis=1)
        comp_scores = -(pts[:, None, :] - self.means[None]) / self.vars[None, :, None]
        return r, comp_scores

    def score(self, x) -> np.ndarray:
        pts, _, vshape = _points(x, self.dim)
        r, cs = self._score_parts(pts)
        return np.einsum("nc,ncd->nd", r, cs).reshape(vshape)

    def score_divergence(self, x):
        """Exact Laplacian of the log-density."""
        pts, shape, _ = _points(x, self.dim)
        r, cs = self._score_parts(pts)
        s = np.einsum("nc,ncd->nd", r, cs)
        # Delta q / q = sum_j r_j (|s_j|^2 + div s_j);  Delta log q = that - |s|^2
        per = np.sum(cs**2, axis=-1) - self.dim / self.vars[None]
        out = np.sum(r * per, axis=1) - np.sum(s**2, axis=1)
        return out.reshape(shape) if shape else float(out[0])

    def evaluate(self, pts: np.ndarray):
        """Score, Laplacian-of-log and log-density for a ``(n, d)`` batch in one pass."""
        lc = self._component_logpdf(pts)
        logq = logsumexp(lc, axis=1)
        r = np.exp(lc - logq[:, None])
        cs = -(pts[:, None, :] - self.means[None]) / self.vars[None, :, None]
        s = np.einsum("nc,ncd->nd", r, cs)
        per = np.sum(cs**2, axis=-1) - self.dim / self.vars[None]
        div = np.sum(r * per, axis=1) - np.sum(s**2, axis=1)
        return s, div, logq

    def sample(self, rng, k: int) -> np.ndarray:
        """Draw ``k`` points using particle-indexed draws of ``rng``."""
        u = rng.uniform(k, 1)[:, 0]
        z = rng.normal(k, 2 + self.dim)[:, 2:]
        cdf = np.cumsum(np.exp(self.log_weights))
        j = np.minimum(np.searchsorted(cdf / cdf[-1], u), len(cdf) - 1)
        return self.means[j] + np.sqrt(self.vars[j])[:, None] * z

    def mean(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return w @ self.means

    def variance(self) -> np.ndarray:
        """Per-coordinate variance."""
        w = np.exp(self.log_weights)
        m = self.mean()
        return w @ (self.vars[:, None] + self.means**2) - m**2

    def __repr__(self):
        parts = ", ".join(
            f"({m.tolist()}, {v:g}, {math.exp(lw):g})"
            for m, v, lw in zip(self.means, self.vars, self.log_weights)
        )
        return f"GaussianMixtureModel[{parts}]"


def log_density(m: GaussianMixtureModel, x):
    return m.log_density(x)


def score(m: GaussianMixtureModel, x):
    return m.score(x)


def score_divergence(m: GaussianMixtureModel, x):
    return m.score_divergence(x)


def ou_forward_marginal(
    m: GaussianMixtureModel, t: float, sched: DiffusionSchedule, t_from: float = 0.0
) -> GaussianMixtureModel:
    """Exact law at time ``t`` of the linear noising process started from ``m`` at ``t_from``."""
    if t < t_from:
        raise InvalidArgumentError("t must not precede t_from")
    sched._require_linear()
    a_t, a_s = sched.alpha(t), sched.alpha(t_from)
    a = a_t / a_s
    added = sched.noise_var(t) - a * a * sched.noise_var(t_from)
    out = GaussianMixtureModel.__new__(GaussianMixtureModel)
    out.means = m.means * a
    out.vars = m.vars * a * a + max(added, 0.0)
    out.log_weights = m.log_weights.copy()
    return out


# ---------------------------------------------------------------------------
# Langevin targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoubleWellTarget:
    """``V(x) = a (x^2 - m^2)^2`` in one dimension."""

    barrier_height: float = 1.0
    well_separation: float = 1.0

    def __post_init__(self):
        if self.barrier_height <= 0 or self.well_separation <= 0:
            raise InvalidArgumentError("barrier height and well separation must be positive")

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return self.barrier_height * (x * x - self.well_separation**2) ** 2

    def grad_potential(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * self.barrier_height * x * (x * x - self.well_separation**2)


@dataclass(frozen=True)
class QuadraticTarget:
    """``V(x) = stiffness |x|^2 / 2``; its Langevin diffusion is OU."""

    stiffness: float = 1.0

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.stiffness * np.sum(x * x, axis=-1)

    def grad_potential(self, x):
        return self.stiffness * np.asarray(x, dtype=float)


def langevin_drift(tgt, x):
    """``-grad V(x)``."""
    return -tgt.grad_potential(x)


# ---------------------------------------------------------------------------
# Field bundle consumed by the samplers and the grid oracle
# ---------------------------------------------------------------------------


class FieldSet:
    """Time-indexed drift, noise level, scores and score divergences of two models.

    Time ``t`` is diffusion time: ``t = 0`` is data, ``t = 1`` is (nearly) pure
    noise.  ``model2`` defaults to ``model1`` for single-model runs.
    """

    def __init__(
        self,
        model1: GaussianMixtureModel,
        model2: Optional[GaussianMixtureModel],
        schedule: DiffusionSchedule,
    ):
        model2 = model1 if model2 is None else model2
        if model1.dim != model2.dim:
            raise InvalidArgumentError("both models must share one dimension")
        self.model1 = model1
        self.model2 = model2
        self.schedule = schedule
        self._marginals = lru_cache(maxsize=64)(self._compute_marginals)

    @property
    def dim(self) -> int:
        return self.model1.dim

    def _compute_marginals(self, t: float):
        return (
            ou_forward_marginal(self.model1, t, self.schedule),
            ou_forward_marginal(self.model2, t, self.schedule),
        )

    def marginals(self, t: float):
        return self._marginals(float(t))

    def f(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.schedule.f(t, x)

    def sigma(self, t: float) -> float:
        return float(self.schedule.sigma(t))

    def evaluate(self, t: float, pts: np.ndarray):
        """``(s1, s2, div1, div2, logq1, logq2)`` at a ``(n, d)`` batch."""
        q1, q2 = self.marginals(t)
        s1, d1, l1 = q1.evaluate(pts)
        s2, d2, l2 = q2.evaluate(pts)
        return s1, s2, d1, d2, l1, l2

    def scores(self, t: float, x):
        q1, q2 = self.marginals(t)
        return q1.score(x), q2.score(x)

    def divergences(self, t: float, x):
        q1, q2 = self.marginals(t)
        return q1.score_divergence(x), q2.score_divergence(x)

    def log_ratio(self, t: float, x):
        """Exact ``log q2_t(x) - log q1_t(x)``."""
        q1, q2 = self.marginals(t)
        return q2.log_density(x) - q1.log_density(x)
