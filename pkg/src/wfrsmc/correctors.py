"""Closed-form guided scores and Feynman-Kac corrector potentials.

All functions are pointwise algebra on score values, vectorized over leading
axes: scores have shape ``(..., d)`` and scalar fields shape ``(...)``.  The
potentials returned here are *uncentered*; centering is a property of the
ensemble and is handled by self-normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .core import InvalidArgumentError


class InterpolationKind(str, Enum):
    GEOMETRIC = "geometric"
    MIXTURE = "mixture"
    FISHER_RAO = "fisher_rao"


@dataclass(frozen=True)
class InterpolationSpec:
    """Which interpolation between the two models to sample, and at what beta.

    ``beta = 0`` selects model 1 and ``beta = 1`` model 2 for every kind.
    """

    kind: InterpolationKind = InterpolationKind.GEOMETRIC
    beta: float = 0.5

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", InterpolationKind(self.kind))
        except ValueError:
            raise InvalidArgumentError(f"unknown interpolation kind {self.kind!r}") from None
        if not math.isfinite(self.beta):
            raise InvalidArgumentError("beta must be finite")
        if self.kind != InterpolationKind.GEOMETRIC and not 0.0 <= self.beta <= 1.0:
            raise InvalidArgumentError(f"beta must lie in [0, 1] for {self.kind.value}")

    @property
    def needs_ratio(self) -> bool:
        return self.kind != InterpolationKind.GEOMETRIC


@dataclass(frozen=True)
class GuidedEvaluation:
    guided_score: np.ndarray
    psi: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray


def _pair(s1, s2):
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if s1.ndim == 0:
        s1 = s1.reshape(1)
    if s2.ndim == 0:
        s2 = s2.reshape(1)
    if s1.shape != s2.shape:
        raise InvalidArgumentError(f"score shapes differ: {s1.shape} vs {s2.shape}")
    return s1, s2


def _sqnorm(v):
    return np.sum(v * v, axis=-1)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _ratio_weight(ell, beta: float, scale: float):
    """``beta e^{scale*ell} / ((1-beta) + beta e^{scale*ell})`` and its complement."""
    ell = np.asarray(ell, dtype=float)
    if beta <= 0.0:
        return np.ones_like(ell), np.zeros_like(ell)
    if beta >= 1.0:
        return np.zeros_like(ell), np.ones_like(ell)
    z = math.log(beta) - math.log1p(-beta) + scale * ell
    return expit(-z), expit(z)


def geometric_eval(s1, s2, beta: float, sigma_t: float) -> GuidedEvaluation:
    """Guided score ``(1-beta)s1 + beta s2`` and potential ``sigma^2/2 beta(beta-1)|s1-s2|^2``."""
    s1, s2 = _pair(s1, s2)
    if sigma_t < 0:
        raise InvalidArgumentError("sigma_t must be nonnegative")
    guided = (1.0 - beta) * s1 + beta * s2
    psi = 0.5 * sigma_t**2 * beta * (beta - 1.0) * _sqnorm(s1 - s2)
    shape = psi.shape
    return GuidedEvaluation(guided, psi, np.full(shape, 1.0 - beta), np.full(shape, float(beta)))


def fisher_rao_eval(s1, s2, ell, beta: float, sigma_t: float) -> GuidedEvaluation:
    """Hellinger-mixture guided score with weights rebuilt from the log-ratio ``ell``."""
    s1, s2 = _pair(s1, s2)
    if not 0.0 <= beta <= 1.0:
        raise InvalidArgumentError("beta must lie in [0, 1]")
    a1, a2 = _ratio_weight(ell, beta, 0.5)
    guided = a1[..., None] * s1 + a2[..., None] * s2
    psi = -0.25 * sigma_t**2 * a1 * a2 * _sqnorm(s1 - s2)
    return GuidedEvaluation(guided, psi, a1, a2)


def mixture_eval(s1, s2, ell, beta: float) -> GuidedEvaluation:
    """Linear-mixture score ``w1 s1 + w2 s2``; the potential is identically zero."""
    s1, s2 = _pair(s1, s2)
    if not 0.0 <= beta <= 1.0:
        raise InvalidArgumentError("beta must lie in [0, 1]")
    w1, w2 = _ratio_weight(ell, beta, 1.0)
    guided = w1[..., None] * s1 + w2[..., None] * s2
    return GuidedEvaluation(guided, np.zeros_like(w1), w1, w2)


def guided_eval(interp: InterpolationSpec, s1, s2, ell, sigma_t: float) -> GuidedEvaluation:
    if interp.kind == InterpolationKind.GEOMETRIC:
        return geometric_eval(s1, s2, interp.beta, sigma_t)
    if interp.kind == InterpolationKind.FISHER_RAO:
        return fisher_rao_eval(s1, s2, ell, interp.beta, sigma_t)
    return mixture_eval(s1, s2, ell, interp.beta)


def logratio_time_derivative(s1, s2, div_s1, div_s2, f_t_x, sigma_t: float):
    """Sampling-time derivative of ``log(q2/q1)`` at a fixed point.

    Follows from ``d/dtau log q = div f + <s, f> - sigma^2/2 (div s + |s|^2)``
    applied to both models; the ``div f`` terms cancel.
    """
    s1, s2 = _pair(s1, s2)
    f = np.asarray(f_t_x, dtype=float).reshape(s1.shape)
    grad = s2 - s1
    lap = np.asarray(div_s2, dtype=float) - np.asarray(div_s1, dtype=float)
    return _dot(f, grad) - 0.5 * sigma_t**2 * (lap + _sqnorm(s2) - _sqnorm(s1))


def logratio_drift(s1, s2, div_s1, div_s2, f_t_x, v_guided, sigma_t: float):
    """Drift of ``ell_t(X_t)`` along ``dX = v dt + sigma dW`` (Ito).

    The martingale part ``sigma <s2 - s1, dW>`` is added by the integrator with
    the same Brownian increment as the state.
    """
    s1, s2 = _pair(s1, s2)
    v = np.asarray(v_guided, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != s1.shape:
        raise InvalidArgumentError(f"drift shape {v.shape} does not match scores {s1.shape}")
    lap = np.asarray(div_s2, dtype=float) - np.asarray(div_s1, dtype=float)
    dt_ell = logratio_time_derivative(s1, s2, div_s1, div_s2, f_t_x, sigma_t)
    return dt_ell + _dot(v, s2 - s1) + 0.5 * sigma_t**2 * lap


def drift_to_fr_rate(v, div_v, score):
    """Log-growth rate ``-div v - <v, grad log mu>`` of a density transported by ``v``."""
    v = np.asarray(v, dtype=float)
    score = np.asarray(score, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if score.ndim == 0:
        score = score.reshape(1)
    return -np.asarray(div_v, dtype=float) - _dot(v, score)


def diffusion_to_fr_rate(score, score_div, sigma_t: float):
    """Log-growth rate ``sigma^2/2 (Delta log mu + |grad log mu|^2)`` of heat flow."""
    if sigma_t < 0:
        raise InvalidArgumentError("sigma_t must be nonnegative")
    score = np.asarray(score, dtype=float)
    if score.ndim == 0:
        score = score.reshape(1)
    return 0.5 * sigma_t**2 * (np.asarray(score_div, dtype=float) + _sqnorm(score))


def diffusion_to_drift(score, sigma_t: float):
    """Velocity ``-sigma^2/2 grad log mu`` whose transport reproduces heat flow."""
    if sigma_t < 0:
        raise InvalidArgumentError("sigma_t must be nonnegative")
    return -0.5 * sigma_t**2 * np.asarray(score, dtype=float)
