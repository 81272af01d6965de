"""Compiled inner loops for simulation and exact path checks.

Everything here works on plain floats and preallocated numpy arrays so the
jump loops run at machine speed. Random draws go exclusively through
``Generator.random()``; holding times use inverse-CDF exponentials, so the
draw stream is identical with and without numba and depends only on the
generator state.

Trajectory layout shared by all kernels: ``times`` is the (N,) array of
jump times in (0, horizon), ``states`` the (N+1, 2) int64 array of visited
states with ``states[0]`` the initial state.
"""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - plain-python fallback, same streams
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


LN5 = math.log(5.0)


@njit(cache=True, nogil=True)
def sim_xi(lu1, lu2, c1, c2, c3, horizon, gen):
    """One trajectory of the lattice process from (0,0) up to ``horizon``."""
    cap = 64
    times = np.empty(cap, np.float64)
    states = np.empty((cap + 1, 2), np.int64)
    states[0, 0] = 0
    states[0, 1] = 0
    z1 = 0
    z2 = 0
    n = 0
    t = 0.0
    while True:
        m = z1 if z1 < z2 else z2
        h = (lu1 + lu2) + z1 * c1 + z2 * c2 + m * c3
        t = t + (-math.log1p(-gen.random())) / h
        if t >= horizon:
            break
        u = gen.random() * h
        if u >= h:
            # one-ulp rounding corner of the product; push back inside so the
            # selection below always lands in a region of positive width
            u = np.nextafter(h, 0.0)
        acc = lu1
        if u < acc:
            z1 += 1
        else:
            acc += lu2
            if u < acc:
                z2 += 1
            else:
                acc += z1 * c1
                if u < acc:
                    z1 -= 1
                else:
                    acc += z2 * c2
                    if u < acc:
                        z2 -= 1
                    else:
                        z1 -= 1
                        z2 -= 1
        if n == cap:
            cap2 = 2 * cap
            t2 = np.empty(cap2, np.float64)
            t2[:n] = times[:n]
            times = t2
            s2 = np.empty((cap2 + 1, 2), np.int64)
            s2[: n + 1] = states[: n + 1]
            states = s2
            cap = cap2
        times[n] = t
        states[n + 1, 0] = z1
        states[n + 1, 1] = z2
        n += 1
    return times[:n].copy(), states[: n + 1].copy()


@njit(cache=True, nogil=True)
def sim_zeta(horizon, stop_on_exit, gen):
    """Reference walk on the full lattice: rate-1 holding, uniform jumps.

    Returns (times, states, exited); ``exited`` is True if the path left
    the non-negative quadrant at any recorded step. With ``stop_on_exit``
    the simulation ends at the first exit.
    """
    cap = 64
    times = np.empty(cap, np.float64)
    states = np.empty((cap + 1, 2), np.int64)
    states[0, 0] = 0
    states[0, 1] = 0
    z1 = 0
    z2 = 0
    n = 0
    t = 0.0
    exited = False
    while True:
        t = t + (-math.log1p(-gen.random()))
        if t >= horizon:
            break
        j = int(gen.random() * 5.0)
        if j > 4:
            j = 4
        if j == 0:
            z1 += 1
        elif j == 1:
            z2 += 1
        elif j == 2:
            z1 -= 1
        elif j == 3:
            z2 -= 1
        else:
            z1 -= 1
            z2 -= 1
        if n == cap:
            cap2 = 2 * cap
            t2 = np.empty(cap2, np.float64)
            t2[:n] = times[:n]
            times = t2
            s2 = np.empty((cap2 + 1, 2), np.int64)
            s2[: n + 1] = states[: n + 1]
            states = s2
            cap = cap2
        times[n] = t
        states[n + 1, 0] = z1
        states[n + 1, 1] = z2
        n += 1
        if z1 < 0 or z2 < 0:
            exited = True
            if stop_on_exit:
                break
    return times[:n].copy(), states[: n + 1].copy(), exited


@njit(cache=True, nogil=True)
def sim_guided(lu1, lu2, c1, c2, c3, horizon, seg_end, a1, a2, gen):
    """Guided proposal: piecewise-constant up-rates, model down-rates.

    ``seg_end`` holds the increasing control-segment right endpoints with
    ``seg_end[-1] == horizon``; ``a1[k]``, ``a2[k]`` are the up-rates on
    segment k. Exact within each segment (constant total rate between
    jumps); crossing a boundary re-draws the residual holding time, which
    is valid by memorylessness.

    Returns (times, states, log_weight) where log_weight is the log
    likelihood ratio of the model law over the proposal law on this
    trajectory. Down-jump factors cancel exactly, so only up-jumps and the
    deterministic holding-rate correction contribute.
    """
    cap = 256
    times = np.empty(cap, np.float64)
    states = np.empty((cap + 1, 2), np.int64)
    states[0, 0] = 0
    states[0, 1] = 0
    z1 = 0
    z2 = 0
    n = 0
    t = 0.0
    k = 0
    nseg = seg_end.shape[0]
    logw = 0.0
    while True:
        m = z1 if z1 < z2 else z2
        hq = (a1[k] + a2[k]) + z1 * c1 + z2 * c2 + m * c3
        tn = t + (-math.log1p(-gen.random())) / hq
        if tn >= seg_end[k]:
            if k == nseg - 1:
                break
            t = seg_end[k]
            k += 1
            continue
        t = tn
        u = gen.random() * hq
        if u >= hq:
            u = np.nextafter(hq, 0.0)
        acc = a1[k]
        if u < acc:
            logw += math.log(lu1 / a1[k])
            z1 += 1
        else:
            acc += a2[k]
            if u < acc:
                logw += math.log(lu2 / a2[k])
                z2 += 1
            else:
                acc += z1 * c1
                if u < acc:
                    z1 -= 1
                else:
                    acc += z2 * c2
                    if u < acc:
                        z2 -= 1
                    else:
                        z1 -= 1
                        z2 -= 1
        if n == cap:
            cap2 = 2 * cap
            t2 = np.empty(cap2, np.float64)
            t2[:n] = times[:n]
            times = t2
            s2 = np.empty((cap2 + 1, 2), np.int64)
            s2[: n + 1] = states[: n + 1]
            states = s2
            cap = cap2
        times[n] = t
        states[n + 1, 0] = z1
        states[n + 1, 1] = z2
        n += 1
    # holding-rate correction: the down-rates of model and proposal agree
    # pointwise, so the integrand reduces to the constant a1+a2-c0 per
    # control segment and the integral is deterministic
    prev = 0.0
    for i in range(nseg):
        logw += (a1[i] + a2[i] - (lu1 + lu2)) * (seg_end[i] - prev)
        prev = seg_end[i]
    return times[:n].copy(), states[: n + 1].copy(), logw


@njit(cache=True, nogil=True)
def sim_pulled(lu1, lu2, c1, c2, c3, horizon, seg_end, base1, base2, lvl1, lvl2, pull, floor, gen):
    """Conditioned reference sampler: state-feedback up-rates.

    Up-rate i on segment k is max(floor, base_i[k] + pull*(horizon*lvl_i[k]
    - z_i)), i.e. the piecewise-constant drift plus a linear restoring term
    toward the target level. Down-rates are the model's. This damps the
    fluctuations that a state-independent proposal cannot control, which
    makes it useful for generating tube-conditioned paths; it is not an
    importance-sampling proposal and no weight is returned.
    """
    cap = 256
    times = np.empty(cap, np.float64)
    states = np.empty((cap + 1, 2), np.int64)
    states[0, 0] = 0
    states[0, 1] = 0
    z1 = 0
    z2 = 0
    n = 0
    t = 0.0
    k = 0
    nseg = seg_end.shape[0]
    while True:
        a1 = base1[k] + pull * (horizon * lvl1[k] - z1)
        if a1 < floor:
            a1 = floor
        a2 = base2[k] + pull * (horizon * lvl2[k] - z2)
        if a2 < floor:
            a2 = floor
        m = z1 if z1 < z2 else z2
        hq = (a1 + a2) + z1 * c1 + z2 * c2 + m * c3
        tn = t + (-math.log1p(-gen.random())) / hq
        if tn >= seg_end[k]:
            if k == nseg - 1:
                break
            t = seg_end[k]
            k += 1
            continue
        t = tn
        u = gen.random() * hq
        if u >= hq:
            u = np.nextafter(hq, 0.0)
        acc = a1
        if u < acc:
            z1 += 1
        else:
            acc += a2
            if u < acc:
                z2 += 1
            else:
                acc += z1 * c1
                if u < acc:
                    z1 -= 1
                else:
                    acc += z2 * c2
                    if u < acc:
                        z2 -= 1
                    else:
                        z1 -= 1
                        z2 -= 1
        if n == cap:
            cap2 = 2 * cap
            t2 = np.empty(cap2, np.float64)
            t2[:n] = times[:n]
            times = t2
            s2 = np.empty((cap2 + 1, 2), np.int64)
            s2[: n + 1] = states[: n + 1]
            states = s2
            cap = cap2
        times[n] = t
        states[n + 1, 0] = z1
        states[n + 1, 1] = z2
        n += 1
    return times[:n].copy(), states[: n + 1].copy()


@njit(cache=True, nogil=True)
def sup_distance(times, states, horizon, bt, b1, b2):
    """Exact sup over [0,1] of the Euclidean gap between the scaled step
    path x(s) = states(s*horizon)/horizon and the piecewise-linear target.

    ``bt`` are the target breakpoint times with bt[0]=0, bt[-1]=1; ``b1``,
    ``b2`` the component values. On each constant piece of x intersected
    with a target segment the difference is affine, so the norm peaks at a
    sub-interval endpoint; both the pre-jump and post-jump values are
    checked at every jump time.
    """
    nj = times.shape[0]
    i = 0
    k = 1
    v1 = states[0, 0] / horizon
    v2 = states[0, 1] / horizon
    d1 = v1 - b1[0]
    d2 = v2 - b2[0]
    best = d1 * d1 + d2 * d2
    pos = 0.0
    while pos < 1.0:
        sj = times[i] / horizon if i < nj else 2.0
        sb = bt[k]
        e = sj if sj < sb else sb
        if e > 1.0:
            e = 1.0
        lam = (e - bt[k - 1]) / (bt[k] - bt[k - 1])
        f1 = b1[k - 1] + lam * (b1[k] - b1[k - 1])
        f2 = b2[k - 1] + lam * (b2[k] - b2[k - 1])
        d1 = v1 - f1
        d2 = v2 - f2
        d = d1 * d1 + d2 * d2
        if d > best:
            best = d
        if i < nj and sj <= e:
            i += 1
            v1 = states[i, 0] / horizon
            v2 = states[i, 1] / horizon
            d1 = v1 - f1
            d2 = v2 - f2
            d = d1 * d1 + d2 * d2
            if d > best:
                best = d
        if sb <= e and k < bt.shape[0] - 1:
            k += 1
        pos = e
    return math.sqrt(best)


@njit(cache=True, nogil=True)
def strip_ok(times, states, horizon, bt, b1, b2, eps, bound_m):
    """Non-strict strip membership of the scaled step path.

    Requires f_i(s) - eps <= x_i(s) <= bound_m for both coordinates and all
    s in [0,1]. The lower bound is checked at the endpoints of every
    constant piece of x intersected with target segments (f is affine
    there, so endpoint checks are exact); the upper bound only when the
    path value changes.
    """
    nj = times.shape[0]
    i = 0
    k = 1
    v1 = states[0, 0] / horizon
    v2 = states[0, 1] / horizon
    if v1 < b1[0] - eps or v2 < b2[0] - eps or v1 > bound_m or v2 > bound_m:
        return False
    pos = 0.0
    while pos < 1.0:
        sj = times[i] / horizon if i < nj else 2.0
        sb = bt[k]
        e = sj if sj < sb else sb
        if e > 1.0:
            e = 1.0
        lam = (e - bt[k - 1]) / (bt[k] - bt[k - 1])
        f1 = b1[k - 1] + lam * (b1[k] - b1[k - 1])
        f2 = b2[k - 1] + lam * (b2[k] - b2[k - 1])
        if v1 < f1 - eps or v2 < f2 - eps:
            return False
        if i < nj and sj <= e:
            i += 1
            v1 = states[i, 0] / horizon
            v2 = states[i, 1] / horizon
            if v1 < f1 - eps or v2 < f2 - eps or v1 > bound_m or v2 > bound_m:
                return False
        if sb <= e and k < bt.shape[0] - 1:
            k += 1
        pos = e
    return True


def warmup():
    """Force compilation of all kernels once; later calls hit the cache."""
    gen = np.random.Generator(np.random.Philox(key=np.array([0, 0], dtype=np.uint64)))
    sim_xi(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, gen)
    sim_zeta(0.5, True, gen)
    seg = np.array([0.5, 1.0])
    a = np.array([1.0, 2.0])
    sim_guided(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, seg, a, a, gen)
    sim_pulled(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, seg, a, a, a, a, 4.0, 1e-3, gen)
    t = np.array([0.25])
    s = np.array([[0, 0], [1, 0]], dtype=np.int64)
    bt = np.array([0.0, 1.0])
    bv = np.array([0.0, 1.0])
    sup_distance(t, s, 1.0, bt, bv, bv)
    strip_ok(t, s, 1.0, bt, bv, bv, 0.5, 2.0)
