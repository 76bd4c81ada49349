"""Fisher-Rao reaction at ensemble level.

Two interchangeable realizations of the reaction term ``p (psi - E_p psi)``:
accumulate ``psi`` in log-weights and resample (SNIS / SMC), or run the
birth-death jump process whose rate is the negative part of the centered
potential and whose kernel clones particles with positive excess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import (
    PURPOSE_AUX,
    DegenerateEnsembleError,
    Ensemble,
    InvalidArgumentError,
    NoJumpTargetError,
    RngStream,
    StepSizeError,
    log_mean_weight,
    normalized_weights,
)

PsiLike = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ResampleScheme:
    """Resampling algorithm plus the rule deciding when to apply it.

    ``trigger`` is ``"ess_below"`` (``value`` is the ESS fraction of K),
    ``"every"`` (``value`` is the step cadence) or ``"never"``.
    """

    kind: str = "systematic"
    trigger: str = "ess_below"
    value: float = 0.5

    def __post_init__(self):
        if self.kind not in ("systematic", "multinomial"):
            raise InvalidArgumentError(f"unknown resampling kind {self.kind!r}")
        if self.trigger == "ess_below":
            if not 0.0 < self.value <= 1.0:
                raise InvalidArgumentError("ESS fraction must lie in (0, 1]")
        elif self.trigger == "every":
            if int(self.value) != self.value or self.value < 1:
                raise InvalidArgumentError("resampling cadence must be a positive integer")
        elif self.trigger != "never":
            raise InvalidArgumentError(f"unknown resampling trigger {self.trigger!r}")

    def should_resample(self, e: Ensemble, steps_done: int) -> bool:
        if self.trigger == "never":
            return False
        if self.trigger == "every":
            return steps_done % int(self.value) == 0
        return ess(e) < self.value * e.k or not np.all(e.alive)


def _values(e: Ensemble, phi: PsiLike) -> np.ndarray:
    vals = phi(e.x) if callable(phi) else phi
    vals = np.asarray(vals, dtype=float).reshape(e.k)
    return vals


def snis_expectation(e: Ensemble, phi: PsiLike) -> float:
    """Self-normalized weighted average of ``phi`` over the ensemble."""
    w = normalized_weights(e)
    vals = _values(e, phi)
    return float(np.sum(w[e.alive] * vals[e.alive]))


def snis_moments(e: Ensemble):
    """Weighted mean and per-coordinate variance of the positions."""
    w = normalized_weights(e)
    x = e.x[e.alive]
    w = w[e.alive]
    mean = w @ x
    var = w @ (x - mean) ** 2
    return mean, var


def log_normalizer_estimate(e: Ensemble) -> float:
    """``log (1/K) sum_k exp(log_w_k)`` plus the offset carried over past resampling."""
    return e.log_norm_offset + log_mean_weight(e)


def ess(e: Ensemble) -> float:
    w = normalized_weights(e)
    return float(1.0 / np.sum(w * w))


def resample_indices(weights: np.ndarray, kind: str, rng: RngStream) -> np.ndarray:
    k = len(weights)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    if kind == "systematic":
        u0 = rng.uniform(1, 1)[0, 0]
        pos = (np.arange(k) + u0) / k
    elif kind == "multinomial":
        pos = rng.uniform(k, 1)[:, 0]
    else:
        raise InvalidArgumentError(f"unknown resampling kind {kind!r}")
    return np.minimum(np.searchsorted(cdf, pos, side="right"), k - 1)


def resample(e: Ensemble, scheme: ResampleScheme, rng: RngStream) -> Ensemble:
    """Draw K offspring from the normalized weights; log-weights reset to 0."""
    w = normalized_weights(e)
    offset = e.log_norm_offset + log_mean_weight(e)
    idx = resample_indices(w, scheme.kind, rng)
    return Ensemble(
        x=e.x[idx].copy(),
        log_w=np.zeros(e.k),
        ell=e.ell[idx].copy(),
        alive=np.ones(e.k, dtype=bool),
        time=e.time,
        log_norm_offset=offset,
        track_ell=e.track_ell,
    )


def jump_kernel_sample(
    e: Ensemble,
    psi_values,
    rng: RngStream,
    mean_psi: Optional[float] = None,
    size: Optional[int] = None,
    uniforms: Optional[np.ndarray] = None,
):
    """Index (or ``size`` indices) drawn with probability proportional to ``p_k (psi_k - mean)^+``."""
    p = normalized_weights(e)
    psi = np.asarray(psi_values, dtype=float).reshape(e.k)
    if mean_psi is None:
        mean_psi = float(np.sum(p[e.alive] * psi[e.alive]))
    excess = np.where(e.alive, np.maximum(psi - mean_psi, 0.0) * p, 0.0)
    total = float(np.sum(excess))
    if not total > 0.0:
        raise NoJumpTargetError("no particle has positive excess potential")
    cdf = np.cumsum(excess) / total
    if uniforms is None:
        n = 1 if size is None else size
        uniforms = rng.uniform(n, 1)[:, 0]
    idx = np.minimum(np.searchsorted(cdf, uniforms, side="right"), e.k - 1)
    return int(idx[0]) if size is None and np.ndim(idx) == 1 and len(idx) == 1 else idx


def jump_rates(e: Ensemble, psi_values) -> tuple[np.ndarray, float]:
    """Per-particle rate ``(psi - E psi)^-`` and the plug-in mean."""
    p = normalized_weights(e)
    psi = np.asarray(psi_values, dtype=float).reshape(e.k)
    mean_psi = float(np.sum(p[e.alive] * psi[e.alive]))
    lam = np.where(e.alive, np.maximum(mean_psi - psi, 0.0), 0.0)
    return lam, mean_psi


def jump_step(e: Ensemble, psi: PsiLike, h: float, rng: RngStream) -> Ensemble:
    """One thinned step of the birth-death process over time ``h``.

    Each particle is replaced, with probability ``lambda_k h``, by a clone of a
    particle drawn from the jump kernel.  Dead particles are always replaced.
    """
    if not h > 0:
        raise InvalidArgumentError("step size must be positive")
    psi_vals = _values(e, psi)
    alive_vals = psi_vals[e.alive]
    if alive_vals.size == 0:
        raise DegenerateEnsembleError("no alive particle")
    out = e.copy()
    if np.ptp(alive_vals) == 0.0 and np.all(e.alive):
        return out
    lam, mean_psi = jump_rates(e, psi_vals)
    if np.max(lam) * h > 1.0:
        raise StepSizeError(f"jump probability {np.max(lam) * h:.3g} exceeds 1; shrink h")
    u = rng.uniform(e.k, 2)
    jump = (u[:, 0] < lam * h) | ~e.alive
    if not np.any(jump):
        return out
    targets = jump_kernel_sample(e, psi_vals, rng, mean_psi=mean_psi, uniforms=u[jump, 1])
    out.x[jump] = e.x[targets]
    out.ell[jump] = e.ell[targets]
    out.alive[jump] = True
    return out


def required_jump_substeps(e: Ensemble, psi_values, h: float) -> int:
    lam, _ = jump_rates(e, psi_values)
    return max(1, int(math.ceil(float(np.max(lam)) * h)))


def discrete_adjoint_check(p, psi) -> float:
    """Largest deviation between the jump-process forward operator and the reaction term.

    On a finite state space, builds ``lambda(x) = (psi(x) - E_p psi)^-`` and
    ``J(y|x) proportional to (psi(y) - E_p psi)^+ p(y)``, evaluates
    ``sum_y lambda(y) J(x|y) p(y) - p(x) lambda(x)`` and compares it with
    ``p(x) (psi(x) - E_p psi)``.
    """
    p = np.asarray(p, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if p.shape != psi.shape or p.ndim != 1:
        raise InvalidArgumentError("p and psi must be 1-D arrays of equal length")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError("p must be a strictly positive probability vector")
    centered = psi - p @ psi
    lam = np.maximum(-centered, 0.0)
    pos = np.maximum(centered, 0.0) * p
    z = pos.sum()
    n = len(p)
    # J[x, y] = J(y | x); the kernel does not depend on the current state
    jmat = np.tile(pos / z, (n, 1)) if z > 0 else np.zeros((n, n))
    inflow = np.array([sum(lam[y] * jmat[y, x] * p[y] for y in range(n)) for x in range(n)])
    adjoint = inflow - p * lam
    return float(np.max(np.abs(adjoint - p * centered)))


def random_adjoint_residual(seed: int, states: int, trials: int) -> dict:
    """Worst :func:`discrete_adjoint_check` residual over random ``(p, psi)`` instances."""
    worst = 0.0
    for trial in range(trials):
        rng = RngStream(seed, trial, PURPOSE_AUX)
        p = rng.uniform(states, 1)[:, 0] + 0.05
        p = p / p.sum()
        psi = RngStream(seed, trial, PURPOSE_AUX + 8).normal(states, 1)[:, 0]
        worst = max(worst, discrete_adjoint_check(p, psi))
    return {"states": states, "trials": trials, "max_residual": worst}
