"""Post-hoc checks on solved fields.

A field that iterated to numerical convergence can still be wrong — wrong
dynamics, wrong cost, a solver bug.  The checks here test the behaviour
that the unique bounded solution must actually exhibit, each through a
route the solver itself never uses: PDE residuals by central differences,
one-shot DPP consistency against RK4 trajectories, monotone decrease along
random integrated schedules, one-sided comparison against constructed
sub/super candidates, growth toward the domain boundary, and slope probes.

Every check returns a VerificationReport; failures carry replayable
witnesses (node indices, sample points and the exact schedule used), never
just a count.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .oracle import _check_budget, _enumerate
from .solver import interpolate
from .systems import ConfigError, closed_form_value
from .trajectories import ControlSchedule, integrate

_KINK_CELLS = 2  # exclusion margin around level-set / clamp kinks


@dataclass(frozen=True)
class VerificationReport:
    name: str
    passed: bool
    stats: dict
    witnesses: tuple = ()
    note: str = ""

    def __post_init__(self):
        if self.witnesses and self.passed:
            raise ValueError("a report holding failure witnesses cannot "
                             "have passed=True")


def _as_mask(mask, grid):
    arr = np.asarray(getattr(mask, "inside", mask), dtype=bool)
    if arr.shape != tuple(grid.counts):
        raise ConfigError("mask shaped %s but grid wants %s"
                          % (arr.shape, tuple(grid.counts)))
    return arr


def _interior(grid):
    keep = np.ones(tuple(grid.counts), dtype=bool)
    for k in range(grid.n_axes):
        sl = [slice(None)] * grid.n_axes
        sl[k] = 0
        keep[tuple(sl)] = False
        sl[k] = -1
        keep[tuple(sl)] = False
    return keep


def _deep_interior(grid, cells):
    """Nodes at least `cells` nodes away from the grid box faces."""
    keep = np.ones(tuple(grid.counts), dtype=bool)
    for k in range(grid.n_axes):
        sl = [slice(None)] * grid.n_axes
        sl[k] = slice(0, cells)
        keep[tuple(sl)] = False
        sl[k] = slice(-cells, None)
        keep[tuple(sl)] = False
    return keep


def _inf_residual(system, field):
    """inf over controls of  -Dv.f - g (1 - v)  at every node.

    Dv comes from np.gradient (central differences inside, one-sided on the
    faces — callers mask the faces off).  Zero for the exact solution at
    smooth points; v identically 1 annihilates it everywhere.
    """
    grid = field.grid
    v = field.values
    grads = np.gradient(v, *grid.axes, edge_order=2)
    if grid.n_axes == 1:
        grads = [grads]
    flat_grads = [gr.reshape(-1) for gr in grads]
    nodes = grid.node_coords().reshape(-1, grid.n_axes)
    one_minus_v = 1.0 - v.reshape(-1)
    best = None
    for a in system.control.points:
        fv = np.asarray(system.f(nodes, a), dtype=float)
        gv = np.broadcast_to(np.asarray(system.g(nodes, a), dtype=float),
                             (nodes.shape[0],))
        drift = sum(flat_grads[k] * fv[:, k] for k in range(grid.n_axes))
        cand = -drift - gv * one_minus_v
        best = cand if best is None else np.minimum(best, cand)
    return best.reshape(tuple(grid.counts))


def _level_band(values, level, cells):
    """Nodes within `cells` of the {values < level} boundary contour."""
    sub = values < level
    if sub.all() or not sub.any():
        return np.zeros(values.shape, dtype=bool)
    grown = ndimage.binary_dilation(sub, iterations=cells)
    shrunk = ndimage.binary_erosion(sub, iterations=cells)
    return grown & ~shrunk


def residual_stats(system, field, mask=None, *, eps0=0.01,
                   median_tol=0.02, p95_tol=0.05):
    """|PDE residual| statistics over the smooth part of the field."""
    if field.transform != "kruzhkov":
        raise ConfigError("residual_stats wants a kruzhkov field")
    if field.grid.n_axes != system.n_state:
        raise ConfigError("field dimension %d, system wants %d"
                          % (field.grid.n_axes, system.n_state))
    grid = field.grid
    residual = _inf_residual(system, field)
    keep = _interior(grid)
    keep &= ~_level_band(field.values, 1.0 - eps0, _KINK_CELLS)
    if mask is not None:
        keep &= ndimage.binary_erosion(_as_mask(mask, grid),
                                       iterations=_KINK_CELLS)
    if system.name.startswith("lift2d"):
        # the optimal control flips across x1 = -x2; the value folds there
        coords = grid.node_coords()
        seam = np.abs(coords[..., 0] + coords[..., 1])
        keep &= seam > _KINK_CELLS * float(np.max(grid.dx))
    picked = np.abs(residual[keep])
    if picked.size == 0:
        return VerificationReport("residual_stats", False,
                                  {"count": 0}, (),
                                  note="no nodes survive the carve-outs")
    stats = {
        "count": int(picked.size),
        "max": float(picked.max()),
        "median": float(np.median(picked)),
        "p95": float(np.percentile(picked, 95.0)),
    }
    passed = stats["median"] <= median_tol and stats["p95"] <= p95_tol
    witnesses = ()
    if not passed:
        flat = np.where(keep, np.abs(residual), -np.inf).reshape(-1)
        worst = np.argsort(flat)[-5:][::-1]
        witnesses = tuple(
            {"node": tuple(int(i) for i in
                           np.unravel_index(w, tuple(grid.counts))),
             "residual": float(residual.reshape(-1)[w])}
            for w in worst if np.isfinite(flat[w]))
    return VerificationReport("residual_stats", passed, stats, witnesses)


def dpp_defect(system, field, x, t, switch_dt, *, int_dt=0.01,
               budget=2_000_000):
    """v(x) minus the best enumerated one-shot continuation at horizon t.

    Positive and negative values of a few grid-cells' worth are
    discretization error; large positive ones mean the field claims more
    than any schedule achieves.
    """
    if field.transform != "kruzhkov":
        raise ConfigError("dpp_defect wants a kruzhkov field")
    if system.mode != "maximize":
        raise ConfigError("dpp_defect checks the worst-case route; "
                          "system mode is %r" % system.mode)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != field.grid.n_axes:
        raise ConfigError("point dimension %d, grid wants %d"
                          % (x.size, field.grid.n_axes))
    if np.any(x < field.grid.lo) or np.any(x > field.grid.hi):
        raise ConfigError("x must be a grid-interior point")
    depth = int(round(t / switch_dt))
    if depth < 1 or abs(depth * switch_dt - t) > 1e-9:
        raise ConfigError("t must be a positive multiple of switch_dt")
    _check_budget(system.control.size, depth, budget)
    z, _ = _enumerate(system, x, switch_dt, depth, 0.0, int_dt)
    disc = np.exp(-z[:, system.n_state + 1])
    cont = (1.0 - disc) + disc * interpolate(field, z[:, :system.n_state])
    return float(interpolate(field, x) - np.max(cont))


def check_lyapunov_decrease(system, field, samples=200, t=0.5, seed=0, *,
                            eps0=0.01, n_segments=4, dt=0.01, slack=1e-4):
    """Random points, random schedules: the field must not increase.

    The allowed increase is twice the local interpolation error estimate
    (cell diameter times the finite-difference gradient) plus an absolute
    `slack` floor: on stretches where the exact value is constant the
    gradient estimate vanishes, yet the discrete field still wobbles a few
    1e-6 along trajectories because solver feet and the RK4 replay sample
    it at different points.  Strict decrease is demanded only when the
    accumulated running cost clearly exceeds the combined floor —
    zero-cost trajectories (they exist; that is the point of the
    quasi-stability examples) legitimately hold the value flat.
    """
    if field.transform != "kruzhkov":
        raise ConfigError("decrease check wants a kruzhkov field")
    grid = field.grid
    if grid.n_axes != system.n_state:
        raise ConfigError("field dimension %d, system wants %d"
                          % (grid.n_axes, system.n_state))
    rng = np.random.default_rng(seed)
    pts = system.control.points
    cell = float(np.linalg.norm(grid.dx))
    carve = 10.0 * float(np.max(grid.dx))
    kept = []
    tries = 0
    while len(kept) < samples:
        tries += 1
        if tries > 1000 * samples:
            raise ConfigError("cannot draw enough samples from the "
                              "sublevel region")
        x = rng.uniform(grid.lo, grid.hi)
        if np.linalg.norm(x) <= carve:
            continue
        if interpolate(field, x) < 1.0 - eps0:
            kept.append(x)

    decreases = []
    witnesses = []
    for x in kept:
        v0 = interpolate(field, x)
        grad = np.zeros(grid.n_axes)
        for k in range(grid.n_axes):
            step = np.zeros(grid.n_axes)
            step[k] = grid.dx[k]
            grad[k] = (interpolate(field, x + step)
                       - interpolate(field, x - step)) / (2.0 * grid.dx[k])
        tol = slack + 2.0 * cell * float(np.linalg.norm(grad))
        picks = rng.integers(0, pts.shape[0], size=n_segments)
        sched = ControlSchedule([(t / n_segments, pts[i]) for i in picks])
        rec = integrate(system, x, sched, dt)
        v1 = interpolate(field, rec.final_state)
        cost = float(rec.running_g_integral[-1])
        decreases.append(v0 - v1)
        bad = v1 >= v0 + tol or (cost > 4.0 * tol and v1 >= v0)
        if bad:
            witnesses.append({"x": x, "schedule": sched, "v_before": v0,
                              "v_after": v1, "cost": cost, "tol": tol})
    dec = np.asarray(decreases)
    stats = {"samples": len(kept), "min_decrease": float(dec.min()),
             "median_decrease": float(np.median(dec)),
             "violations": len(witnesses)}
    return VerificationReport("lyapunov_decrease", not witnesses, stats,
                              tuple(witnesses))


def sandwich_check(system, reference, candidate, role, tol):
    """One-sided comparison of a candidate against a reference field.

    role='sub': candidate must sit below reference (+tol) at interior
    nodes and must hold the boundary at exactly 1; role='sup' mirrors it.
    A second, differential probe compares the two fields' PDE residuals
    away from the faces and away from saturated (0/1-clamped) nodes: a
    genuine one-sided perturbation shifts the residual one way only.
    Identical fields pass both probes with tol=0 because every difference
    is computed, not bounded.
    """
    if role not in ("sub", "sup"):
        raise ConfigError("role must be 'sub' or 'sup'")
    if not reference.grid.same_layout(candidate.grid):
        raise ConfigError("reference and candidate grids differ")
    if reference.transform != "kruzhkov" or candidate.transform != "kruzhkov":
        raise ConfigError("sandwich_check wants kruzhkov fields")
    grid = reference.grid
    boundary = ~_interior(grid)
    edge = candidate.values[boundary]
    if role == "sub":
        if np.max(np.abs(edge - 1.0)) > 1e-9:
            raise ConfigError("sub candidate must equal 1 on the boundary")
    elif np.min(edge) < 1.0 - 1e-9:
        raise ConfigError("sup candidate must be >= 1 on the boundary")

    inner = _interior(grid)
    diff = candidate.values - reference.values
    value_bad = (diff > tol) if role == "sub" else (diff < -tol)
    value_bad &= inner

    saturated = np.isin(candidate.values, (0.0, 1.0)) \
        | np.isin(reference.values, (0.0, 1.0))
    zone = _deep_interior(grid, 2) & ~ndimage.binary_dilation(
        saturated, iterations=_KINK_CELLS)
    delta_res = (_inf_residual(system, candidate)
                 - _inf_residual(system, reference))
    res_bad = (delta_res > tol) if role == "sub" else (delta_res < -tol)
    res_bad &= zone

    stats = {
        "max_diff": float(diff[inner].max()),
        "min_diff": float(diff[inner].min()),
        "value_violations": int(value_bad.sum()),
        "residual_violations": int(res_bad.sum()),
    }
    witnesses = []
    for bad, kind, val in ((value_bad, "value", diff),
                           (res_bad, "residual", delta_res)):
        idx = np.argwhere(bad)
        for node in idx[:3]:
            witnesses.append({"kind": kind,
                              "node": tuple(int(i) for i in node),
                              "delta": float(val[tuple(node)])})
    passed = not witnesses
    return VerificationReport("sandwich_%s" % role, passed, stats,
                              tuple(witnesses))


def check_boundary_blowup(system, field, mask, cap=10.0):
    """March rays from the origin: -ln(1-v) must climb toward the rim.

    Skipped (with a note) when the mask leaks onto the grid faces — then
    the box shows no domain boundary to blow up at.
    """
    if field.transform != "kruzhkov":
        raise ConfigError("blow-up check wants a kruzhkov field")
    if not cap > 0.0:
        raise ConfigError("cap must be positive")
    grid = field.grid
    inside = _as_mask(mask, grid)
    if not inside[grid.origin_index]:
        raise ConfigError("mask must contain the origin")
    if np.any(inside & ~_interior(grid)):
        note = ("mask touches the grid box; the box does not contain the "
                "domain boundary, check skipped")
        warnings.warn(note)
        return VerificationReport("boundary_blowup", True, {"rays": 0}, (),
                                  note=note)
    w = -np.log(np.maximum(1.0 - field.values, math.exp(-cap)))
    counts = tuple(grid.counts)
    origin = grid.origin_index
    ratios = []
    witnesses = []
    rays = 0
    for step in itertools.product((-1, 0, 1), repeat=grid.n_axes):
        if not any(step):
            continue
        idx = np.array(origin)
        profile = []
        while np.all(idx >= 0) and np.all(idx < counts) \
                and inside[tuple(idx)]:
            profile.append(float(w[tuple(idx)]))
            idx = idx + step
        if len(profile) < 4:
            continue
        rays += 1
        last3 = profile[-3:]
        monotone = (last3[0] <= last3[1] + 1e-12
                    and last3[1] <= last3[2] + 1e-12)
        quart = profile[len(profile) // 4]
        ratio = math.inf if quart <= 0.0 else profile[-1] / quart
        ratios.append(ratio)
        if not monotone or ratio < 2.0:
            witnesses.append({"direction": step, "last3": last3,
                              "quartile": quart, "ratio": ratio})
    if rays == 0:
        return VerificationReport("boundary_blowup", False,
                                  {"rays": 0}, (),
                                  note="every ray is too short to judge")
    stats = {"rays": rays, "min_ratio": float(min(ratios)),
             "failing": len(witnesses)}
    return VerificationReport("boundary_blowup", not witnesses, stats,
                              tuple(witnesses))


def lipschitz_probe(evaluator, points, delta=1e-6, kruzhkov_scale=1.0):
    """Symmetric difference quotients of 1 - exp(-scale * W) at points.

    `evaluator` is a closed-form name or a ValueField.  Steep cost spikes
    show up as large quotients; a constant field gives exactly 0.
    """
    if not delta > 0.0:
        raise ConfigError("delta must be positive")
    if not kruzhkov_scale > 0.0:
        raise ConfigError("kruzhkov_scale must be positive")

    if isinstance(evaluator, str):
        def w_of(x):
            return float(closed_form_value(
                evaluator, float(x[0]) if x.size == 1 else x))
    else:
        def w_of(x):
            v = interpolate(evaluator, x)
            if evaluator.transform == "kruzhkov":
                return -math.log(max(1.0 - v, math.exp(-50.0)))
            return v

    def probe(x):
        return 1.0 - math.exp(-kruzhkov_scale * w_of(x))

    out = []
    for point in points:
        x = np.asarray(point, dtype=float).reshape(-1)
        sq = 0.0
        for k in range(x.size):
            step = np.zeros(x.size)
            step[k] = delta
            sq += ((probe(x + step) - probe(x - step)) / (2.0 * delta)) ** 2
        out.append(math.sqrt(sq))
    return out
