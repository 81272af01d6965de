"""Additive path functionals and the density against the free reference walk.

Everything here is a deterministic function of one realized trajectory.
Sums are accumulated in trajectory order so repeated evaluation is
bit-stable; the estimators rely on that when comparing nested events.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import RateParams
from .paths import PiecewiseLinearPath, StepTrajectory, count_up_down, uniform_distance

__all__ = [
    "a_functional",
    "b_functional",
    "log_density_wrt_zeta",
    "reference_log_weight",
    "PathFunctionals",
    "path_functionals",
    "lemma_bt_bound_check",
    "LN5",
]

LN5 = math.log(5.0)


def _holding_times(traj: StepTrajectory) -> np.ndarray:
    """The N+1 inter-event gaps, final one running to the horizon."""
    edges = np.concatenate(([0.0], traj.times, [traj.horizon]))
    return np.diff(edges)


def _total_rates(params: RateParams, states: np.ndarray) -> np.ndarray:
    z1 = states[:, 0].astype(np.float64)
    z2 = states[:, 1].astype(np.float64)
    # same summation order as the simulator's scalar path
    return params.c0 + z1 * params.c1 + z2 * params.c2 + np.minimum(z1, z2) * params.c3


def a_functional(params: RateParams, traj: StepTrajectory) -> float:
    """Time integral of the total jump intensity along the trajectory.

    The integrand is constant between events, so this is the dot product of
    the visited total rates with the holding times, including the final
    partial interval up to the horizon.
    """
    return float(np.dot(_total_rates(params, traj.states), _holding_times(traj)))


def b_functional(params: RateParams, traj: StepTrajectory) -> float:
    """Log intensities of the realized jumps plus the final-state total rate.

    The sum runs over the jumps, each evaluated at its pre-jump state, and
    closes with log h(final state); a no-jump trajectory contributes only
    that closing term. Returns -inf when some realized jump had zero
    intensity (the trajectory is then impossible under ``params``), which
    only happens for paths not produced by the lattice process itself.
    """
    z1f = float(traj.states[-1, 0])
    z2f = float(traj.states[-1, 1])
    h_final = (
        params.c0
        + z1f * params.c1
        + z2f * params.c2
        + min(z1f, z2f) * params.c3
    )
    if h_final <= 0.0:
        return -math.inf
    if traj.n_jumps == 0:
        return math.log(h_final)
    pre = traj.states[:-1]
    dz = traj.jumps()
    z1 = pre[:, 0].astype(np.float64)
    z2 = pre[:, 1].astype(np.float64)
    ds = dz.sum(axis=1)
    rate = np.where(
        ds > 0,
        np.where(dz[:, 0] > 0, params.lam_up1, params.lam_up2),
        np.where(
            ds == -2,
            np.minimum(z1, z2) * params.c3,
            np.where(dz[:, 0] < 0, z1 * params.c1, z2 * params.c2),
        ),
    )
    if np.any(rate <= 0.0):
        return -math.inf
    return float(np.sum(np.log(rate)) + math.log(h_final))


def log_density_wrt_zeta(params: RateParams, traj: StepTrajectory) -> float:
    """Log density of the lattice law against the free reference walk.

    Evaluated literally in the product form: with N jumps, holding gaps
    tau_1..tau_{N+1} (the last one censored at the horizon), visited total
    rates h_0..h_N and realized jump intensities lambda_1..lambda_N,

        N*log(5) - sum_i (h_i - 1) * tau_{i+1} + sum_i log(lambda_i) + log(h_N),

    where the last two sums together are exactly the jump-log functional
    with its closing final-rate term. Paths that leave the quadrant or use
    a zero-intensity jump have density zero, reported as -inf.

    The closing log(h_N) makes this the bookkeeping value used by the bound
    machinery, not the exact likelihood ratio: the last holding interval is
    censored at the horizon, so the true ratio carries only the survival
    factor there. Reweighting estimators need ``reference_log_weight``.
    """
    if np.any(traj.states < 0):
        return -math.inf
    b = b_functional(params, traj)
    if b == -math.inf:
        return -math.inf
    h = _total_rates(params, traj.states)
    tau = _holding_times(traj)
    return float(traj.n_jumps * LN5 - np.dot(h - 1.0, tau) + b)


def reference_log_weight(params: RateParams, traj: StepTrajectory) -> float:
    """Exact log likelihood ratio of the lattice law against the free walk.

    Equals ``log_density_wrt_zeta`` minus the closing final-rate log: the
    trajectory's last holding interval only survives to the horizon, it
    does not end in a jump, so the exact ratio has no rate factor there.
    This is the quantity that averages to 1 over reference replicas and is
    therefore the weight the reweighting estimators must use; the product
    form with the closing term averages to E[h(final state)] instead.
    """
    ld = log_density_wrt_zeta(params, traj)
    if ld == -math.inf:
        return ld
    return ld - math.log(float(_total_rates(params, traj.states[-1:])[0]))


@dataclass(frozen=True)
class PathFunctionals:
    a_value: float
    b_value: float
    n_jumps: int
    log_density: float


def path_functionals(params: RateParams, traj: StepTrajectory) -> PathFunctionals:
    return PathFunctionals(
        a_value=a_functional(params, traj),
        b_value=b_functional(params, traj),
        n_jumps=traj.n_jumps,
        log_density=log_density_wrt_zeta(params, traj),
    )


class BoundCheck(NamedTuple):
    ok: bool
    b_value: float
    bound: float


def lemma_bt_bound_check(
    params: RateParams,
    traj: StepTrajectory,
    target: PiecewiseLinearPath,
    epsilon: float,
) -> BoundCheck:
    """Verify the a-priori upper bound on the jump-log functional for
    trajectories whose scaled path stays within epsilon of the target.

    Each up-jump contributes at most log(c0); each down or joint jump
    happens from a state whose coordinates are at most T*(sup f + epsilon),
    so its intensity is at most T * max(c1,c2,c3) * (sup f + epsilon), and
    the extra (+1) factor of the same size covers the closing final-rate
    term:

        B <= K_plus * log(c0) + (K_minus + 1) * log(T * (c0 + cmax * (sup f + eps))).

    Raises if the trajectory is not actually inside the tube, since the
    bound is only claimed there.
    """
    dist = uniform_distance(traj, target)
    if not (dist < epsilon):
        raise ValueError(
            f"trajectory is outside the tube (distance {dist:g} >= {epsilon:g})"
        )
    k_plus, k_minus = count_up_down(traj)
    cmax = max(params.c1, params.c2, params.c3)
    level = target.sup_components() + epsilon
    bound = k_plus * math.log(params.c0) + (k_minus + 1) * math.log(
        traj.horizon * (params.c0 + cmax * level)
    )
    b = b_functional(params, traj)
    return BoundCheck(ok=bool(b <= bound), b_value=b, bound=bound)
