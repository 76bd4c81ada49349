"""Shared domain types: time schedules, counter-based RNG, and the particle ensemble.

Ensembles are stored as flat numpy arrays (positions ``(K, d)``, log-weights,
log-ratios and an alive mask) so every per-particle update is a vectorized
expression.  :class:`Particle` is only a read-only view for inspection.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import logsumexp


class WFRError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class InvalidArgumentError(WFRError, ValueError):
    kind = "invalid-argument"


class DegenerateEnsembleError(WFRError):
    kind = "degenerate-ensemble"


class UnsupportedModelError(WFRError):
    kind = "unsupported-model"


class StepSizeError(WFRError):
    kind = "step-size"


class NumericalFailureError(WFRError):
    kind = "numerical-failure"


class NoJumpTargetError(WFRError):
    kind = "no-jump-target"


class DomainError(WFRError, ValueError):
    kind = "domain"


# ---------------------------------------------------------------------------
# Time schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeSchedule:
    """Uniform grid of ``n_steps + 1`` time points from ``t_start`` to ``t_end``."""

    t_start: float = 1.0
    t_end: float = 0.0
    n_steps: int = 500

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise InvalidArgumentError("schedule end points must be finite")
        if self.t_start == self.t_end:
            raise InvalidArgumentError("t_start and t_end must differ")

    @property
    def direction(self) -> str:
        return "reverse" if self.t_end < self.t_start else "forward"

    @property
    def h(self) -> float:
        return abs(self.t_end - self.t_start) / self.n_steps

    def time(self, k: int) -> float:
        # affine form keeps both end points exact
        if k == self.n_steps:
            return float(self.t_end)
        return float(self.t_start + (self.t_end - self.t_start) * (k / self.n_steps))

    def times(self) -> np.ndarray:
        return np.array([self.time(k) for k in range(self.n_steps + 1)])

    def index_of(self, t: float) -> int:
        """Index of the grid point equal to ``t`` up to rounding (1e-9)."""
        k = int(round((t - self.t_start) / (self.t_end - self.t_start) * self.n_steps))
        if k < 0 or k > self.n_steps or abs(self.time(k) - t) > 1e-9:
            raise InvalidArgumentError(f"time {t} is not on the schedule grid")
        return k


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise level ``sigma(t)`` and noising drift ``drift_base(t, x)``.

    When ``kappa`` is given the drift is the linear OU drift ``-kappa(t) x``
    and the noised marginals of Gaussian mixtures are available in closed form.
    ``alpha_fn`` / ``noise_var_fn`` may supply those closed forms; otherwise
    they are obtained by quadrature.
    """

    sigma: Callable[[float], float]
    drift_base: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    kappa: Optional[Callable[[float], float]] = None
    alpha_fn: Optional[Callable[[float], float]] = None
    noise_var_fn: Optional[Callable[[float], float]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.drift_base is None:
            if self.kappa is None:
                raise InvalidArgumentError("either drift_base or kappa is required")
            kappa = self.kappa
            object.__setattr__(self, "drift_base", lambda t, x: -kappa(t) * np.asarray(x))

    @property
    def is_linear(self) -> bool:
        return self.kappa is not None

    def f(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.drift_base(t, x)

    def alpha(self, t: float) -> float:
        """Mean contraction exp(-int_0^t kappa)."""
        self._require_linear()
        if self.alpha_fn is not None:
            return float(self.alpha_fn(t))
        val, _ = integrate.quad(self.kappa, 0.0, t, epsabs=1e-13, epsrel=1e-13)
        return math.exp(-val)

    def noise_var(self, t: float) -> float:
        """Variance injected by the noising process on [0, t] (for a point mass at 0)."""
        self._require_linear()
        if self.noise_var_fn is not None:
            return float(self.noise_var_fn(t))
        a_t = self.alpha(t)
        val, _ = integrate.quad(
            lambda s: self.sigma(s) ** 2 / self.alpha(s) ** 2, 0.0, t, epsabs=1e-13, epsrel=1e-12
        )
        return a_t * a_t * val

    def _require_linear(self):
        if not self.is_linear:
            raise UnsupportedModelError(
                "closed-form marginals need a linear drift f_t(x) = -kappa_t x"
            )


def vp_schedule(beta_min: float = 0.1, beta_max: float = 20.0, stationary_var: float = 1.0):
    """Variance-preserving schedule: kappa = b(t)/2, sigma^2 = b(t) * stationary_var."""
    if beta_min < 0 or beta_max < beta_min:
        raise InvalidArgumentError("need 0 <= beta_min <= beta_max")
    if stationary_var <= 0:
        raise InvalidArgumentError("stationary_var must be positive")

    def b(t):
        return beta_min + (beta_max - beta_min) * t

    def alpha(t):
        return math.exp(-0.5 * (beta_min * t + 0.5 * (beta_max - beta_min) * t * t))

    return DiffusionSchedule(
        sigma=lambda t: math.sqrt(b(t) * stationary_var),
        kappa=lambda t: 0.5 * b(t),
        alpha_fn=alpha,
        noise_var_fn=lambda t: stationary_var * (1.0 - alpha(t) ** 2),
        name="vp",
    )


def constant_schedule(kappa: float = 0.0, sigma: float = 1.0):
    """Time-homogeneous OU noising ``dx = -kappa x dt + sigma dW`` (kappa=0 is heat flow)."""
    if sigma < 0:
        raise InvalidArgumentError("sigma must be nonnegative")

    def noise_var(t):
        if kappa == 0.0:
            return sigma * sigma * t
        return sigma * sigma * (-math.expm1(-2.0 * kappa * t)) / (2.0 * kappa)

    return DiffusionSchedule(
        sigma=lambda t: sigma,
        kappa=lambda t: kappa,
        alpha_fn=lambda t: math.exp(-kappa * t),
        noise_var_fn=noise_var,
        name="constant",
    )


# ---------------------------------------------------------------------------
# Counter-based RNG (Philox4x32-10)
# ---------------------------------------------------------------------------

_MASK32 = np.uint64(0xFFFFFFFF)
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Vectorized Philox4x32 block function.

    ``counter`` has shape ``(..., 4)`` of 32-bit words, ``key`` is a pair of
    32-bit words.  Returns uint32 words of the same shape as ``counter``.
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _PHILOX_W0) & 0xFFFFFFFF
            k1 = (k1 + _PHILOX_W1) & 0xFFFFFFFF
        p0 = c0 * _PHILOX_M0
        p1 = c2 * _PHILOX_M1
        hi0, lo0 = p0 >> np.uint64(32), p0 & _MASK32
        hi1, lo1 = p1 >> np.uint64(32), p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


# draw purposes; each gets a disjoint counter lane
PURPOSE_INIT = 0
PURPOSE_STATE = 1
PURPOSE_RESAMPLE = 2
PURPOSE_JUMP = 3
PURPOSE_AUX = 4


@dataclass(frozen=True)
class RngStream:
    """Reproducible random draws keyed by (seed, step, purpose, particle, draw).

    ``stream_id(k)`` packs the particle index and step index into 64 bits; the
    value of any single draw depends only on the key and its own counter, so
    results are identical no matter how particles are split across workers.
    """

    seed: int
    step: int = 0
    purpose: int = PURPOSE_STATE

    def __post_init__(self):
        if not (0 <= self.step < 2**31):
            raise InvalidArgumentError("step index must be in [0, 2^31)")

    @property
    def key(self) -> tuple[int, int]:
        s = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        return s & 0xFFFFFFFF, s >> 32

    def stream_id(self, particle: int) -> int:
        return (int(particle) & 0xFFFFFFFF) | (self.step << 32)

    def at(self, step: int, purpose: Optional[int] = None) -> "RngStream":
        return replace(self, step=step, purpose=self.purpose if purpose is None else purpose)

    def _raw(self, particles: np.ndarray, n_blocks: int) -> np.ndarray:
        particles = np.asarray(particles, dtype=np.uint64)
        blocks = np.arange(n_blocks, dtype=np.uint64)
        ctr = np.empty(particles.shape + (n_blocks, 4), dtype=np.uint64)
        ctr[..., 0] = blocks
        ctr[..., 1] = np.uint64(self.purpose)
        ctr[..., 2] = particles[..., None]
        ctr[..., 3] = np.uint64(self.step)
        return philox4x32(ctr, self.key)

    def uniform(self, n_particles: int, n_draws: int = 1, particles=None) -> np.ndarray:
        """Uniforms on the open interval (0, 1), shape ``(n_particles, n_draws)``."""
        idx = np.arange(n_particles) if particles is None else np.asarray(particles)
        words = self._raw(idx, (n_draws + 1) // 2).astype(np.uint64)
        # two 53-bit doubles per block
        a = (words[..., 0::2] >> np.uint64(5)).astype(np.float64)
        b = (words[..., 1::2] >> np.uint64(6)).astype(np.float64)
        u = (a * 67108864.0 + b + 0.5) / 9007199254740992.0
        return u.reshape(idx.shape + (-1,))[..., :n_draws]

    def normal(self, n_particles: int, n_draws: int = 1, particles=None) -> np.ndarray:
        """Standard normals via Box-Muller, shape ``(n_particles, n_draws)``."""
        m = n_draws + (n_draws % 2)
        u = self.uniform(n_particles, m, particles)
        r = np.sqrt(-2.0 * np.log(u[..., 0::2]))
        theta = 2.0 * np.pi * u[..., 1::2]
        z = np.empty_like(u)
        z[..., 0::2] = r * np.cos(theta)
        z[..., 1::2] = r * np.sin(theta)
        return z[..., :n_draws]


# ---------------------------------------------------------------------------
# Ensemble
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Particle:
    x: np.ndarray
    log_w: float
    ell: float
    alive: bool


@dataclass
class Ensemble:
    """K weighted particles at a common time.

    ``log_norm_offset`` carries the log normalizer accumulated over past
    resampling events so the running estimate survives the weight reset.
    """

    x: np.ndarray
    log_w: np.ndarray
    ell: np.ndarray
    alive: np.ndarray
    time: float
    log_norm_offset: float = 0.0
    track_ell: bool = True

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        k = self.x.shape[0]
        if k < 1:
            raise InvalidArgumentError("an ensemble needs at least one particle")
        self.log_w = np.asarray(self.log_w, dtype=float).reshape(k)
        self.ell = np.asarray(self.ell, dtype=float).reshape(k)
        self.alive = np.asarray(self.alive, dtype=bool).reshape(k)

    @property
    def k(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(self.x[i].copy(), float(self.log_w[i]), float(self.ell[i]), bool(self.alive[i]))
            for i in range(self.k)
        ]

    def copy(self, **changes) -> "Ensemble":
        fields_ = dict(
            x=self.x.copy(),
            log_w=self.log_w.copy(),
            ell=self.ell.copy(),
            alive=self.alive.copy(),
            time=self.time,
            log_norm_offset=self.log_norm_offset,
            track_ell=self.track_ell,
        )
        fields_.update(changes)
        return Ensemble(**fields_)


def make_ensemble(
    k: int,
    init_sampler: Callable[[RngStream, int], np.ndarray],
    seed: int,
    t_start: float = 1.0,
    ell_init: float = 0.0,
    track_ell: bool = True,
) -> Ensemble:
    """Draw ``k`` particles with zero log-weight.

    ``init_sampler(rng, k)`` returns a ``(k, d)`` array; row ``i`` must use
    only the draws of particle ``i`` on ``rng``.
    """
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"particle count must be >= 1, got {k}")
    rng = RngStream(seed, step=0, purpose=PURPOSE_INIT)
    x = np.asarray(init_sampler(rng, int(k)), dtype=float)
    if x.ndim == 1:
        x = x.reshape(k, -1)
    if x.shape[0] != k:
        raise InvalidArgumentError("init_sampler returned the wrong number of particles")
    return Ensemble(
        x=x,
        log_w=np.zeros(k),
        ell=np.full(k, float(ell_init)),
        alive=np.ones(k, dtype=bool),
        time=float(t_start),
        track_ell=track_ell,
    )


def standard_normal_init(dim: int = 1, scale: float = 1.0):
    def sampler(rng: RngStream, k: int) -> np.ndarray:
        return scale * rng.normal(k, dim)

    return sampler


def point_init(x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def sampler(rng: RngStream, k: int) -> np.ndarray:
        return np.tile(x0, (k, 1))

    return sampler


def normalized_weights(e: Ensemble) -> np.ndarray:
    """Softmax of log-weights over alive particles; dead particles get 0."""
    lw = np.where(e.alive, e.log_w, -np.inf)
    if not np.any(np.isfinite(lw)):
        raise DegenerateEnsembleError("no alive particle with finite log-weight")
    m = np.max(lw)
    w = np.exp(lw - m)
    return w / np.sum(w)


def log_mean_weight(e: Ensemble) -> float:
    lw = np.where(e.alive, e.log_w, -np.inf)
    if not np.any(np.isfinite(lw)):
        raise DegenerateEnsembleError("no alive particle with finite log-weight")
    return float(logsumexp(lw) - math.log(e.k))


# ---------------------------------------------------------------------------
# Thread fan-out for per-particle work
# ---------------------------------------------------------------------------


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("WFR_THREADS")
        try:
            threads = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            raise InvalidArgumentError(f"WFR_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise InvalidArgumentError("threads must be >= 1")
    return int(threads)


def chunked(fn: Callable[[slice], None], n: int, threads: int = 1, min_chunk: int = 4096) -> None:
    """Run ``fn`` on contiguous particle slices, possibly in threads.

    ``fn`` must write only into its own slice; results therefore do not depend
    on the thread count.
    """
    n_chunks = max(1, min(threads, n // min_chunk))
    if n_chunks == 1:
        fn(slice(0, n))
        return
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        list(pool.map(fn, slices))
