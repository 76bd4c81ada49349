"""Time integration of weighted particle systems.

Sampling runs in reverse diffusion time, from ``t = 1`` (noise) down to
``t = 0`` (data).  Each Euler-Maruyama step moves the state with the guided
drift ``-f_t + sigma_t^2 s_guided``, adds ``psi * h`` to the log-weight and
advances the tracked log-ratio with the same Gaussian increment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import correctors
from .core import (
    PURPOSE_AUX,
    PURPOSE_JUMP,
    PURPOSE_RESAMPLE,
    PURPOSE_STATE,
    Ensemble,
    InvalidArgumentError,
    RngStream,
    TimeSchedule,
    chunked,
    make_ensemble,
    standard_normal_init,
)
from .correctors import InterpolationSpec
from .reaction import (
    ResampleScheme,
    ess,
    jump_kernel_sample,
    jump_rates,
    log_normalizer_estimate,
    resample,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepReport:
    t_before: float
    t_after: float
    max_abs_drift: float
    mean_log_w_increment: float


def _em_update(e: Ensemble, fields, interp: InterpolationSpec, h: float, rng: RngStream,
               accumulate: bool = True, threads: int = 1):
    if not h > 0:
        raise InvalidArgumentError("step size must be positive")
    if e.dim != fields.dim:
        raise InvalidArgumentError(f"ensemble dimension {e.dim} != field dimension {fields.dim}")
    t = e.time
    sigma = fields.sigma(t)
    sqrt_h = math.sqrt(h)
    out = e.copy(time=t - h)
    psi_pre = np.zeros(e.k)
    drift_max = np.zeros(e.k)

    def work(sl: slice):
        x = e.x[sl]
        s1, s2, d1, d2, _, _ = fields.evaluate(t, x)
        ev = correctors.guided_eval(interp, s1, s2, e.ell[sl], sigma)
        f = fields.f(t, x)
        v = -f + sigma * sigma * ev.guided_score
        xi = rng.normal(e.k, e.dim, particles=np.arange(sl.start, sl.stop))
        noise = sigma * sqrt_h * xi
        out.x[sl] = x + v * h + noise
        psi_pre[sl] = ev.psi
        drift_max[sl] = np.max(np.abs(v), axis=1)
        if accumulate:
            out.log_w[sl] = e.log_w[sl] + ev.psi * h
        if e.track_ell:
            dl = correctors.logratio_drift(s1, s2, d1, d2, f, v, sigma)
            out.ell[sl] = e.ell[sl] + dl * h + np.sum((s2 - s1) * noise, axis=1)

    with np.errstate(invalid="ignore", over="ignore"):
        chunked(work, e.k, threads)
        bad = ~np.all(np.isfinite(out.x), axis=1) | ~np.isfinite(out.log_w)
        if e.track_ell:
            bad |= ~np.isfinite(out.ell)
    out.alive &= ~bad
    alive = out.alive
    report = StepReport(
        t_before=t,
        t_after=out.time,
        max_abs_drift=float(np.max(drift_max[alive])) if np.any(alive) else float("nan"),
        mean_log_w_increment=float(np.mean(psi_pre[alive]) * h) if accumulate and np.any(alive) else 0.0,
    )
    return out, psi_pre, report


def weighted_em_step(e: Ensemble, fields, interp: InterpolationSpec, h: float, rng: RngStream,
                     threads: int = 1) -> Ensemble:
    """One reverse-time Euler-Maruyama step of state, log-weight and log-ratio.

    The potential is evaluated at the pre-step position and accumulated
    uncentered.  Particles whose state becomes non-finite are marked dead.
    """
    out, _, _ = _em_update(e, fields, interp, h, rng, threads=threads)
    return out


def ula_step(e: Ensemble, tgt, step: float, temperature: float, rng: RngStream) -> Ensemble:
    """Unadjusted Langevin step ``x - grad V(x) step + sqrt(2 T step) xi``; weights untouched."""
    if not step > 0:
        raise InvalidArgumentError("step must be positive")
    if temperature < 0:
        raise InvalidArgumentError("temperature must be nonnegative")
    xi = rng.normal(e.k, e.dim)
    out = e.copy(time=e.time + step)
    with np.errstate(invalid="ignore", over="ignore"):
        out.x = e.x - tgt.grad_potential(e.x) * step + math.sqrt(2.0 * temperature * step) * xi
        out.alive &= np.all(np.isfinite(out.x), axis=1)
    return out


def _jump_with_values(e: Ensemble, psi_vals: np.ndarray, h: float, rng: RngStream):
    """Jump step that also carries the potential values along with clones."""
    out = e.copy()
    vals = psi_vals.copy()
    alive_vals = psi_vals[e.alive]
    if alive_vals.size == 0 or (np.ptp(alive_vals) == 0.0 and np.all(e.alive)):
        return out, vals
    lam, mean_psi = jump_rates(e, psi_vals)
    u = rng.uniform(e.k, 2)
    jump = (u[:, 0] < lam * h) | ~e.alive
    if np.any(jump):
        targets = jump_kernel_sample(e, psi_vals, rng, mean_psi=mean_psi, uniforms=u[jump, 1])
        out.x[jump] = e.x[targets]
        out.ell[jump] = e.ell[targets]
        out.alive[jump] = True
        vals[jump] = psi_vals[targets]
    return out, vals


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)  # (t, Ensemble)
    reports: list = field(default_factory=list)
    ess_trace: list = field(default_factory=list)  # (t, ess)
    resample_times: list = field(default_factory=list)
    final: Optional[Ensemble] = None

    def snapshot(self, t: float) -> Ensemble:
        for ts, ens in self.snapshots:
            if abs(ts - t) < 1e-9:
                return ens
        raise KeyError(t)


def simulate(
    fields,
    interp: InterpolationSpec,
    schedule: TimeSchedule,
    k: int,
    seed: int,
    resample_scheme: Optional[ResampleScheme] = None,
    snapshot_times=(),
    mode: str = "reweight",
    threads: int = 1,
    init_sampler: Optional[Callable] = None,
) -> Trajectory:
    """Run the weighted sampler over ``schedule`` (which must run in reverse).

    ``mode="reweight"`` accumulates log-weights and resamples per
    ``resample_scheme``; ``mode="jump"`` keeps weights uniform and realizes
    the potential by birth-death jumps.
    """
    if schedule.direction != "reverse":
        raise InvalidArgumentError("sampling schedules must run from noise (t=1) toward data (t=0)")
    if mode not in ("reweight", "jump"):
        raise InvalidArgumentError(f"unknown reaction mode {mode!r}")
    scheme = resample_scheme or ResampleScheme()
    init_sampler = init_sampler or standard_normal_init(fields.dim)
    e = make_ensemble(k, init_sampler, seed, t_start=schedule.t_start)
    snap_idx = {schedule.index_of(t): float(t) for t in snapshot_times}
    traj = Trajectory()
    if 0 in snap_idx:
        traj.snapshots.append((snap_idx[0], e.copy()))
    traj.ess_trace.append((e.time, ess(e)))
    h = schedule.h
    for step in range(schedule.n_steps):
        e.time = schedule.time(step)
        accumulate = mode == "reweight"
        e, psi_pre, report = _em_update(
            e, fields, interp, h, RngStream(seed, step, PURPOSE_STATE), accumulate, threads
        )
        e.time = schedule.time(step + 1)
        traj.reports.append(report)
        last = step + 1 == schedule.n_steps
        if mode == "jump":
            lam, _ = jump_rates(e, psi_pre)
            n_sub = max(1, int(math.ceil(float(np.max(lam)) * h)))
            vals = psi_pre
            for sub in range(n_sub):
                rng = RngStream(seed, step, PURPOSE_JUMP + 8 * sub)
                e, vals = _jump_with_values(e, vals, h / n_sub, rng)
        if step + 1 in snap_idx:
            traj.snapshots.append((snap_idx[step + 1], e.copy()))
        traj.ess_trace.append((e.time, ess(e)))
        if mode == "reweight" and not last and scheme.should_resample(e, step + 1):
            e = resample(e, scheme, RngStream(seed, step, PURPOSE_RESAMPLE))
            traj.resample_times.append(e.time)
    traj.final = e
    log.debug("run finished: %d resampling events, log Z = %.6g",
              len(traj.resample_times), log_normalizer_estimate(e))
    return traj


def run(config, threads: int = 1) -> Trajectory:
    """Run the sampler described by a :class:`~wfrsmc.config.RunConfig`."""
    return simulate(
        config.fields(),
        config.interpolation,
        config.schedule,
        config.particles,
        config.seed,
        resample_scheme=config.resample,
        snapshot_times=config.snapshots,
        mode=config.mode,
        threads=threads,
    )


def bernoulli_mixture_baseline(fields, beta: float, schedule: TimeSchedule, k: int, seed: int,
                               threads: int = 1) -> Ensemble:
    """Reference sampler for the linear mixture: each particle follows one model.

    Particle ``k`` is assigned to model 2 with probability ``beta`` and then
    runs the plain reverse SDE of its model.  No weights, no ratio tracking.
    """
    if not 0.0 <= beta <= 1.0:
        raise InvalidArgumentError("beta must lie in [0, 1]")
    pick2 = RngStream(seed, 0, PURPOSE_AUX).uniform(k, 1)[:, 0] < beta
    n2 = int(np.sum(pick2))
    parts = []
    for b, n, sub_seed in ((0.0, k - n2, seed), (1.0, n2, seed + 1)):
        if n == 0:
            continue
        traj = simulate(fields, InterpolationSpec("geometric", b), schedule, n, sub_seed,
                        resample_scheme=ResampleScheme(trigger="never"), threads=threads)
        parts.append(traj.final)
    x = np.concatenate([p.x for p in parts])
    return Ensemble(x, np.zeros(k), np.zeros(k), np.ones(k, dtype=bool), parts[0].time, track_ell=False)
