"""Trajectory samplers: the lattice process, the free reference walk, and
a guided proposal whose up-jump rates steer the path along a target.

All randomness flows through counter-based Philox streams keyed by
(master_seed, replica_index), so replica k is reproducible in isolation and
results are independent of worker scheduling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import RateParams
from .paths import PiecewiseLinearPath, StepTrajectory, validate_target

__all__ = [
    "RngStream",
    "GuidedProposal",
    "simulate_xi",
    "simulate_zeta",
    "simulate_guided",
    "simulate_pulled",
    "guided_log_weight",
    "build_guided_proposal",
    "identity_proposal",
]

_U64_MAX = 2**64


@dataclass(frozen=True)
class RngStream:
    """Keyed random source: one independent Philox stream per replica."""

    master_seed: int
    replica_index: int = 0

    def __post_init__(self) -> None:
        for name in ("master_seed", "replica_index"):
            v = getattr(self, name)
            if not (0 <= v < _U64_MAX):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.replica_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def replica(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, index)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class GuidedProposal:
    """Piecewise-constant up-jump controls on a partition of [0, horizon].

    Segment k is (seg_end[k-1], seg_end[k]] with up rates alpha1[k] and
    alpha2[k]; down rates keep the original state dependence, which is what
    makes the likelihood ratio depend on the up-jumps alone. ``target`` is
    carried for bookkeeping and plotting and may be None.
    """

    horizon: float
    seg_end: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha_min: float
    target: PiecewiseLinearPath | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if not (self.alpha_min > 0.0):
            raise ValueError(f"alpha_min must be positive, got {self.alpha_min!r}")
        se = self.seg_end
        if se.ndim != 1 or len(se) == 0:
            raise ValueError("seg_end must be a non-empty 1-d array")
        if se.shape != self.alpha1.shape or se.shape != self.alpha2.shape:
            raise ValueError("seg_end, alpha1, alpha2 must have matching shapes")
        if np.any(np.diff(se) <= 0.0) or se[0] <= 0.0:
            raise ValueError("segment ends must be strictly increasing and positive")
        if se[-1] != self.horizon:
            raise ValueError("last segment must end exactly at the horizon")
        if np.any(self.alpha1 < self.alpha_min) or np.any(self.alpha2 < self.alpha_min):
            raise ValueError("all control rates must be at least alpha_min")
        if self.target is not None:
            violation = validate_target(self.target)
            if violation is not None:
                raise ValueError(f"inadmissible proposal target: {violation}")

    @property
    def n_segments(self) -> int:
        return int(len(self.seg_end))

    def scaled(self, factor: float) -> "GuidedProposal":
        """Same partition with all control rates multiplied by ``factor``.

        Used to probe estimator invariance: the weighted estimate must not
        move (beyond Monte Carlo error) when the proposal changes.
        """
        if not (factor > 0.0):
            raise ValueError(f"factor must be positive, got {factor!r}")
        return GuidedProposal(
            horizon=self.horizon,
            seg_end=self.seg_end,
            alpha1=self.alpha1 * factor,
            alpha2=self.alpha2 * factor,
            alpha_min=self.alpha_min * min(1.0, factor),
            target=self.target,
        )

    def up_rate_integral(self) -> float:
        """integral of alpha1 + alpha2 over [0, horizon], exact."""
        lengths = np.diff(np.concatenate(([0.0], self.seg_end)))
        return float(np.dot(self.alpha1 + self.alpha2, lengths))


def simulate_xi(params: RateParams, horizon: float, rng) -> StepTrajectory:
    """Sample the lattice process from the origin over [0, horizon].

    Exact event-by-event simulation: exponential holding at the current
    total intensity, then a categorical jump draw. The down and joint rates
    vanish on the axes, so the quadrant is never left.
    """
    if not (horizon > 0.0):
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    gen = _as_generator(rng)
    times, states = _kernels.sim_xi(
        params.lam_up1,
        params.lam_up2,
        params.lam_down1,
        params.lam_down2,
        params.lam_joint,
        float(horizon),
        gen,
    )
    return StepTrajectory(float(horizon), times, states)


def simulate_zeta(horizon: float, rng, stop_on_exit: bool = False) -> StepTrajectory:
    """Sample the free reference walk: unit holding rate, uniform jumps.

    The walk lives on the whole integer plane; ``exited`` records whether a
    coordinate ever went negative. With stop_on_exit the trajectory is
    truncated at the first exit instead of running to the horizon.
    """
    if not (horizon > 0.0):
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    gen = _as_generator(rng)
    times, states, exited = _kernels.sim_zeta(float(horizon), stop_on_exit, gen)
    return StepTrajectory(float(horizon), times, states, exited=bool(exited))


def simulate_guided(proposal: GuidedProposal, params: RateParams, rng):
    """Sample one guided trajectory; return it with its log importance weight.

    The weight is the log Radon-Nikodym derivative of the original law with
    respect to the proposal along the sampled path. Down-jump intensities
    coincide under both laws and cancel; what remains is log(lambda_up/alpha)
    at each up-jump plus the deterministic compensator integral of
    (alpha1 + alpha2 - lambda_up1 - lambda_up2).
    """
    gen = _as_generator(rng)
    times, states, logw = _kernels.sim_guided(
        params.lam_up1,
        params.lam_up2,
        params.lam_down1,
        params.lam_down2,
        params.lam_joint,
        proposal.horizon,
        proposal.seg_end,
        proposal.alpha1,
        proposal.alpha2,
        gen,
    )
    return StepTrajectory(proposal.horizon, times, states), float(logw)


def guided_log_weight(proposal: GuidedProposal, params: RateParams, traj: StepTrajectory) -> float:
    """Log likelihood ratio of the model law over the proposal on a fixed path.

    Pure function of the trajectory, independent of how it was sampled:
    each up-jump contributes log(lambda_up / alpha_k) from the segment k
    containing its jump time, down-jumps cancel, and the compensator
    integral of (alpha1 + alpha2 - lambda_up1 - lambda_up2) is closed-form
    over the control partition. The simulator accumulates the same quantity
    jump by jump; the two routes must agree to rounding.
    """
    if traj.horizon != proposal.horizon:
        raise ValueError(
            f"trajectory horizon {traj.horizon!r} differs from proposal horizon "
            f"{proposal.horizon!r}"
        )
    total = 0.0
    if traj.n_jumps:
        dz = traj.jumps()
        ds = dz.sum(axis=1)
        up1 = ds > 0
        up2 = up1 & (dz[:, 1] > 0)
        up1 &= dz[:, 0] > 0
        # jump times sit strictly inside half-open segments (prev, seg_end];
        # side="left" maps a time equal to a segment end to that segment
        seg = np.searchsorted(proposal.seg_end, traj.times, side="left")
        total += float(np.sum(np.log(params.lam_up1 / proposal.alpha1[seg[up1]])))
        total += float(np.sum(np.log(params.lam_up2 / proposal.alpha2[seg[up2]])))
    lengths = np.diff(np.concatenate(([0.0], proposal.seg_end)))
    c0_up = params.lam_up1 + params.lam_up2
    total += float(np.dot(proposal.alpha1 + proposal.alpha2 - c0_up, lengths))
    return total


# fixed internal stream for proposal calibration; estimation streams are
# keyed by the master seed and never collide with this
_CALIBRATION_SEED = 0x9E3779B97F4A7C15


def _control_grid(target: PiecewiseLinearPath, control_ds: float):
    """Subdivide the target's linear pieces into control segments.

    Returns scaled-time arrays: segment right endpoints, segment midpoints,
    per-segment slopes and midpoint levels of both components. Segment
    length never exceeds control_ds and piece breakpoints are hit exactly.
    """
    t, f1, f2 = target.t, target.f1, target.f2
    seg_end: list[float] = []
    s_mid: list[float] = []
    slope1: list[float] = []
    slope2: list[float] = []
    mid1: list[float] = []
    mid2: list[float] = []
    for i in range(len(t) - 1):
        length = t[i + 1] - t[i]
        d1 = (f1[i + 1] - f1[i]) / length
        d2 = (f2[i + 1] - f2[i]) / length
        pieces = max(1, math.ceil(length / control_ds))
        for j in range(1, pieces + 1):
            seg_end.append(t[i + 1] if j == pieces else t[i] + length * (j / pieces))
            sm = t[i] + length * ((j - 0.5) / pieces)
            s_mid.append(sm)
            slope1.append(d1)
            slope2.append(d2)
            mid1.append(f1[i] + d1 * (sm - t[i]))
            mid2.append(f2[i] + d2 * (sm - t[i]))
    return (
        np.asarray(seg_end, dtype=np.float64),
        np.asarray(s_mid, dtype=np.float64),
        np.asarray(slope1, dtype=np.float64),
        np.asarray(slope2, dtype=np.float64),
        np.asarray(mid1, dtype=np.float64),
        np.asarray(mid2, dtype=np.float64),
    )


def simulate_pulled(
    params: RateParams,
    target: PiecewiseLinearPath,
    horizon: float,
    pull: float,
    rng,
    alpha_min: float = 1e-3,
    control_ds: float = 0.02,
) -> StepTrajectory:
    """Sample one path from the state-feedback reference sampler.

    Up-rates follow the same drift-matching base as the guided proposal but
    add pull * (target_level - z_i/T) in unscaled rate units, a restoring
    force toward the target. No piecewise-constant-in-time control can damp
    the process's intrinsic O(sqrt(T)) component fluctuations, so narrow
    tubes are unreachable for the guided proposal at moderate T; this
    sampler reaches them by feeding the state back into the rate.

    Its likelihood ratio is state-dependent, so it is a conditioned path
    generator for checking per-path functional bounds inside a tube, not an
    importance-sampling proposal; no weight is returned.
    """
    violation = validate_target(target)
    if violation is not None:
        raise ValueError(f"inadmissible target: {violation}")
    if not (horizon > 0.0):
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if not (pull >= 0.0):
        raise ValueError(f"pull must be non-negative, got {pull!r}")
    if not (alpha_min > 0.0):
        raise ValueError(f"alpha_min must be positive, got {alpha_min!r}")
    gen = _as_generator(rng)
    seg_end, _, slope1, slope2, mid1, mid2 = _control_grid(target, control_ds)
    mid_min = np.minimum(mid1, mid2)
    base1 = slope1 + horizon * params.c1 * mid1 + horizon * params.c3 * mid_min
    base2 = slope2 + horizon * params.c2 * mid2 + horizon * params.c3 * mid_min
    times, states = _kernels.sim_pulled(
        params.lam_up1,
        params.lam_up2,
        params.lam_down1,
        params.lam_down2,
        params.lam_joint,
        float(horizon),
        seg_end * horizon,
        base1,
        base2,
        mid1,
        mid2,
        float(pull),
        float(alpha_min),
        gen,
    )
    return StepTrajectory(float(horizon), times, states)


def build_guided_proposal(
    params: RateParams,
    target: PiecewiseLinearPath,
    horizon: float,
    alpha_min: float = 1e-3,
    control_ds: float = 0.02,
    calibration_rounds: int = 2,
    calibration_replicas: int = 256,
) -> GuidedProposal:
    """Controls that make the proposal's mean path follow the target ray.

    The scaled path x(s) = z(sT)/T has mean drift (alpha_i - d_i(z))/T per
    unit of scaled time, where d_i is the state-dependent down intensity of
    component i. Setting

        alpha_i = df_i/ds + T * (c_i * f_i + c3 * E[min(x1, x2)])

    cancels the mean down flow at the target level and leaves exactly the
    target slope. Each linear piece of the target is subdivided into control
    segments of scaled length at most control_ds with the level taken at
    the segment midpoint, so the control tracks ramps instead of pinning a
    quasi-static level.

    E[min] is strictly below min of the means when the components fluctuate
    (the gap is O(sqrt(T)) in lattice units), so the plug-in value min(f1,f2)
    under-cancels the joint down flow and the mean overshoots. A short
    calibration loop measures that gap per segment under the current
    controls, from an internal fixed stream, and re-derives alpha; rounds=0
    keeps the analytic plug-in. Rates are floored at alpha_min; a warning
    reports how many segments the floor touched.
    """
    violation = validate_target(target)
    if violation is not None:
        raise ValueError(f"inadmissible target: {violation}")
    if not (horizon > 0.0):
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if not (alpha_min > 0.0):
        raise ValueError(f"alpha_min must be positive, got {alpha_min!r}")
    if not (control_ds > 0.0):
        raise ValueError(f"control_ds must be positive, got {control_ds!r}")
    if calibration_rounds < 0 or calibration_replicas < 1:
        raise ValueError("calibration_rounds must be >= 0 and calibration_replicas >= 1")

    seg_end, s_mid, slope1, slope2, mid1, mid2 = _control_grid(target, control_ds)
    mid_min = np.minimum(mid1, mid2)

    def controls(min_gap: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        joint = horizon * params.c3 * (mid_min + min_gap)
        raw1 = slope1 + horizon * params.c1 * mid1 + joint
        raw2 = slope2 + horizon * params.c2 * mid2 + joint
        floored = int(np.count_nonzero(raw1 < alpha_min) + np.count_nonzero(raw2 < alpha_min))
        return np.maximum(alpha_min, raw1), np.maximum(alpha_min, raw2), floored

    gap = np.zeros_like(mid_min)
    a1, a2, floored = controls(gap)
    cal = RngStream(_CALIBRATION_SEED)
    for _ in range(calibration_rounds):
        proposal = GuidedProposal(
            float(horizon), seg_end * horizon, a1, a2, float(alpha_min), target
        )
        acc = np.zeros((len(s_mid), 3), dtype=np.float64)
        for k in range(calibration_replicas):
            traj, _ = simulate_guided(proposal, params, cal.replica(k))
            vals = traj.scaled().value_at(s_mid)
            acc[:, 0] += vals[:, 0]
            acc[:, 1] += vals[:, 1]
            acc[:, 2] += np.minimum(vals[:, 0], vals[:, 1])
        acc /= calibration_replicas
        gap = acc[:, 2] - np.minimum(acc[:, 0], acc[:, 1])
        a1, a2, floored = controls(gap)
    if floored:
        warnings.warn(
            f"guided proposal floored {floored} control rate(s) at alpha_min={alpha_min:g}",
            stacklevel=2,
        )
    return GuidedProposal(
        horizon=float(horizon),
        seg_end=seg_end * horizon,
        alpha1=a1,
        alpha2=a2,
        alpha_min=float(alpha_min),
        target=target,
    )


def identity_proposal(params: RateParams, horizon: float) -> GuidedProposal:
    """The do-nothing proposal: controls equal to the original up rates.

    Sampling under it reproduces the original process draw for draw and its
    log weight is identically zero, which pins down the weight convention.
    """
    alpha_min = min(1e-3, params.lam_up1, params.lam_up2)
    return GuidedProposal(
        horizon=float(horizon),
        seg_end=np.array([float(horizon)]),
        alpha1=np.array([params.lam_up1]),
        alpha2=np.array([params.lam_up2]),
        alpha_min=alpha_min,
    )
