"""Target paths, the uniform metric, tube/strip events, and the rate functional.

Targets are piecewise linear: that keeps the rate functional exact (the
integrand is piecewise affine after splitting at min-crossings) and tube
membership exactly decidable per piece, while still being dense in the
admissible class under the uniform metric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import RateParams

__all__ = [
    "PiecewiseLinearPath",
    "StepTrajectory",
    "ScaledView",
    "EventSpec",
    "validate_target",
    "uniform_distance",
    "in_event",
    "rate_integral",
    "rate_functional",
    "strip_inf_rate",
    "count_up_down",
]


class PiecewiseLinearPath:
    """Piecewise-linear pair (f1, f2) given by breakpoints (t, f1, f2).

    Construction only checks that the data is non-empty, finite and has
    times inside [0,1]; admissibility (start at the origin, strictly
    positive interior values, strictly increasing times ending at 1) is the
    job of :func:`validate_target`, so invalid candidates remain
    representable and report a violation instead of failing to build.
    """

    __slots__ = ("t", "f1", "f2")

    def __init__(self, breakpoints):
        pts = [(float(t), float(a), float(b)) for t, a, b in breakpoints]
        if not pts:
            raise ValueError("breakpoint list is empty")
        arr = np.asarray(pts, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("breakpoints contain non-finite values")
        if np.any(arr[:, 0] < 0.0) or np.any(arr[:, 0] > 1.0):
            raise ValueError("breakpoint times must lie in [0, 1]")
        self.t = np.ascontiguousarray(arr[:, 0])
        self.f1 = np.ascontiguousarray(arr[:, 1])
        self.f2 = np.ascontiguousarray(arr[:, 2])

    @property
    def breakpoints(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(a), float(b)) for t, a, b in zip(self.t, self.f1, self.f2)]

    def value_at(self, s):
        """Componentwise linear interpolation; requires ordered times."""
        s = np.asarray(s, dtype=np.float64)
        return np.interp(s, self.t, self.f1), np.interp(s, self.t, self.f2)

    def sup_components(self) -> float:
        """sup over [0,1] of max(f1, f2); attained at a breakpoint."""
        return float(max(self.f1.max(), self.f2.max()))

    def __repr__(self) -> str:
        return f"PiecewiseLinearPath({self.breakpoints!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PiecewiseLinearPath)
            and self.t.shape == other.t.shape
            and bool(np.all(self.t == other.t))
            and bool(np.all(self.f1 == other.f1))
            and bool(np.all(self.f2 == other.f2))
        )


def validate_target(path: PiecewiseLinearPath) -> str | None:
    """Check admissibility; return None if ok, else the first violation.

    Checked in order: start at the origin, strictly positive values after
    time 0, strictly increasing times, terminal time exactly 1. Linear
    interpolation between positive values (or from the origin to a positive
    value) stays positive, so positivity at breakpoints is equivalent to
    positivity on (0, 1].
    """
    if path.t[0] != 0.0 or path.f1[0] != 0.0 or path.f2[0] != 0.0:
        return (
            "start violation: first breakpoint must be (0, 0, 0), got "
            f"({path.t[0]:g}, {path.f1[0]:g}, {path.f2[0]:g})"
        )
    for i in range(1, len(path.t)):
        if path.f1[i] <= 0.0 or path.f2[i] <= 0.0:
            return (
                "positivity violation: breakpoint at t="
                f"{path.t[i]:g} has non-positive value "
                f"({path.f1[i]:g}, {path.f2[i]:g})"
            )
    if np.any(np.diff(path.t) <= 0.0):
        return "time ordering violation: breakpoint times must be strictly increasing"
    if path.t[-1] != 1.0:
        return f"terminal time violation: last breakpoint at t={path.t[-1]:g}, expected 1"
    return None


@dataclass(frozen=True)
class StepTrajectory:
    """A realized jump path on [0, horizon].

    ``times`` holds the N jump times (strictly increasing, inside the open
    horizon interval); ``states`` the N+1 visited states with states[0] the
    initial state. Construction is unchecked for speed; :meth:`validate`
    asserts the structural invariants and is used by the tests.
    """

    horizon: float
    times: np.ndarray
    states: np.ndarray
    exited: bool = False

    @property
    def n_jumps(self) -> int:
        return int(self.times.shape[0])

    @property
    def final_state(self) -> tuple[int, int]:
        return int(self.states[-1, 0]), int(self.states[-1, 1])

    def jumps(self) -> np.ndarray:
        return np.diff(self.states, axis=0)

    def scaled(self) -> "ScaledView":
        return ScaledView(self)

    def validate(self) -> None:
        assert self.horizon > 0
        assert self.times.shape == (self.states.shape[0] - 1,)
        assert self.states.shape[1] == 2
        if self.n_jumps:
            assert 0.0 < self.times[0] and self.times[-1] < self.horizon
            assert np.all(np.diff(self.times) > 0.0)
            dz = self.jumps()
            legal = {(1, 0), (0, 1), (-1, 0), (0, -1), (-1, -1)}
            assert all((int(a), int(b)) in legal for a, b in dz)


@dataclass(frozen=True)
class ScaledView:
    """The diffusively scaled path x(s) = u(s*horizon)/horizon on [0,1]."""

    source: StepTrajectory
    times: np.ndarray = field(init=False)
    values: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", self.source.times / self.source.horizon)
        object.__setattr__(self, "values", self.source.states / self.source.horizon)

    def value_at(self, s):
        """Right-continuous evaluation at scaled times s."""
        s = np.asarray(s, dtype=np.float64)
        idx = np.searchsorted(self.times, s, side="right")
        return self.values[idx]


@dataclass(frozen=True)
class EventSpec:
    """A tube (strict uniform ball) or strip (two-sided componentwise band).

    Tube: uniform distance to the target strictly below epsilon.
    Strip: f_i - epsilon <= x_i <= bound_m componentwise, non-strict, where
    bound_m must exceed the largest target component.
    """

    kind: str
    target: PiecewiseLinearPath
    epsilon: float
    bound_m: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("tube", "strip"):
            raise ValueError(f"event kind must be 'tube' or 'strip', got {self.kind!r}")
        violation = validate_target(self.target)
        if violation is not None:
            raise ValueError(f"event target inadmissible: {violation}")
        if not (self.epsilon > 0.0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.kind == "strip":
            if self.bound_m is None:
                raise ValueError("strip event requires the upper bound M")
            sup = self.target.sup_components()
            if not (self.bound_m > sup):
                raise ValueError(
                    f"strip bound M={self.bound_m:g} must exceed the largest "
                    f"target component {sup:g}"
                )


def _as_trajectory(traj) -> StepTrajectory:
    if isinstance(traj, ScaledView):
        return traj.source
    return traj


def _target_arrays(target: PiecewiseLinearPath):
    t = target.t
    if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0.0):
        raise ValueError("target breakpoints must strictly increase from 0 to 1")
    return t, target.f1, target.f2


def uniform_distance(traj, target: PiecewiseLinearPath) -> float:
    """Exact sup-norm distance between the scaled path and the target.

    The scaled path is constant between jumps and the target is affine
    between breakpoints, so on every sub-interval of the merged grid the
    difference is affine and the Euclidean norm peaks at an endpoint. Both
    the pre-jump and the post-jump value are compared at each jump time,
    which realizes the genuine supremum including left limits.
    """
    tr = _as_trajectory(traj)
    bt, b1, b2 = _target_arrays(target)
    return float(_kernels.sup_distance(tr.times, tr.states, tr.horizon, bt, b1, b2))


def in_event(traj, event: EventSpec) -> bool:
    """Exact event membership of the scaled path (no time-grid sampling)."""
    tr = _as_trajectory(traj)
    bt, b1, b2 = _target_arrays(event.target)
    if event.kind == "tube":
        return uniform_distance(tr, event.target) < event.epsilon
    return bool(
        _kernels.strip_ok(
            tr.times, tr.states, tr.horizon, bt, b1, b2, event.epsilon, event.bound_m
        )
    )


def _affine_integral(params: RateParams, ta, tb, x1a, x1b, x2a, x2b) -> float:
    # integrand restricted to one affine branch of min; trapezoid is exact
    ga = params.c1 * x1a + params.c2 * x2a + params.c3 * min(x1a, x2a)
    gb = params.c1 * x1b + params.c2 * x2b + params.c3 * min(x1b, x2b)
    return 0.5 * (ga + gb) * (tb - ta)


def rate_integral(path, params: RateParams) -> float:
    """Exact integral of c1*x1 + c2*x2 + c3*min(x1, x2) along the path.

    Accepts a PiecewiseLinearPath (integrated over [0,1]), a ScaledView
    (step path; the integrand is piecewise constant), or a raw triple of
    arrays (times, x1, x2) interpreted piecewise linearly over its own time
    span. Component values must be non-negative.

    For piecewise-linear input the only non-smoothness of the integrand is
    where x1 - x2 changes sign; segments are split at those crossings,
    making the integrand affine piece by piece, and the trapezoid rule is
    then exact.
    """
    if isinstance(path, ScaledView):
        vals = path.values
        if np.any(vals < 0.0):
            raise ValueError("rate integrand requires non-negative components")
        g = (
            params.c1 * vals[:, 0]
            + params.c2 * vals[:, 1]
            + params.c3 * np.minimum(vals[:, 0], vals[:, 1])
        )
        lengths = np.diff(np.concatenate(([0.0], path.times, [1.0])))
        return float(np.dot(g, lengths))

    if isinstance(path, PiecewiseLinearPath):
        t, x1, x2 = _target_arrays(path)
    else:
        t, x1, x2 = (np.asarray(a, dtype=np.float64) for a in path)
        if t.ndim != 1 or t.shape != x1.shape or t.shape != x2.shape or len(t) < 2:
            raise ValueError("expected matching 1-d arrays (times, x1, x2)")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
    if np.any(x1 < 0.0) or np.any(x2 < 0.0):
        raise ValueError("rate integrand requires non-negative components")

    total = 0.0
    for i in range(len(t) - 1):
        ta, tb = t[i], t[i + 1]
        d_a = x1[i] - x2[i]
        d_b = x1[i + 1] - x2[i + 1]
        if d_a * d_b < 0.0:
            # interior min-crossing; both branches are affine on either side
            lam = d_a / (d_a - d_b)
            tc = ta + lam * (tb - ta)
            x1c = x1[i] + lam * (x1[i + 1] - x1[i])
            x2c = x2[i] + lam * (x2[i + 1] - x2[i])
            total += _affine_integral(params, ta, tc, x1[i], x1c, x2[i], x2c)
            total += _affine_integral(params, tc, tb, x1c, x1[i + 1], x2c, x2[i + 1])
        else:
            total += _affine_integral(params, ta, tb, x1[i], x1[i + 1], x2[i], x2[i + 1])
    return float(total)


def rate_functional(path: PiecewiseLinearPath, params: RateParams) -> float:
    """The excursion cost: rate_integral on admissible targets, inf off them.

    Discontinuous or otherwise inadmissible candidates carry infinite cost;
    infinity is a value here, not an error.
    """
    if validate_target(path) is not None:
        return math.inf
    return rate_integral(path, params)


def strip_inf_rate(target: PiecewiseLinearPath, bound_m: float, params: RateParams) -> float:
    """Infimum of the rate functional over the strip around ``target``.

    The integrand is non-decreasing in each pointwise component value, so
    the infimum over paths bounded below by the target and above by M is
    attained at the lower boundary, i.e. at the target itself.
    """
    violation = validate_target(target)
    if violation is not None:
        raise ValueError(f"inadmissible target: {violation}")
    sup = target.sup_components()
    if not (bound_m > sup):
        raise ValueError(
            f"strip bound M={bound_m:g} must exceed the largest target component {sup:g}"
        )
    return rate_functional(target, params)


def count_up_down(traj: StepTrajectory) -> tuple[int, int]:
    """Counts of coordinate-increasing vs coordinate-decreasing jumps."""
    if traj.n_jumps == 0:
        return 0, 0
    step = traj.jumps().sum(axis=1)
    k_plus = int(np.count_nonzero(step > 0))
    return k_plus, int(traj.n_jumps - k_plus)
