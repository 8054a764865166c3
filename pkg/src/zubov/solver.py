"""Semi-Lagrangian value iteration for the grid dynamic-programming fixed point.

Two flavours share one sweep skeleton:

  * solve_zubov — Kružkov-transformed maximal cost.  Update at node x_i:
        v <- max_a (1 - beta) + beta * I[v](x_i + dt f(x_i,a)),
    beta = exp(-dt g).  Values live in [0, 1]; points whose foot leaves the
    box read `exterior_value` (default 1: "outside the robust domain").

  * solve_hjbe — raw running cost with discount rate h:
        v <- opt_a dt*ell*exp(-dt h/2) + exp(-dt h) * I[v](foot),
    opt = min or max per the system's mode.

Sweeps are Jacobi (double-buffered): every node reads the previous buffer,
so results are bitwise reproducible no matter how the sweep is scheduled.
Iteration starts from v ≡ 0 and, in Kružkov mode, increases monotonically.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .systems import ConfigError, ValueField
from .trajectories import rk4_step


@dataclass(frozen=True)
class SolverSettings:
    dt: float = 0.05
    tol: float = 1e-6
    max_iters: int = 2000
    exterior_value: float | None = None  # None: 1 in Kružkov mode, else 0
    pin_origin: bool = True
    rk4_feet: bool = False  # RK4 feet + integrated step costs (vs Euler)
    threads: int = 1  # accepted for interface compat; sweeps are vectorized

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("solver dt must be positive")
        if not self.tol > 0.0:
            raise ConfigError("solver tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")


class _FootTable:
    """Per-control interpolation stencil: which nodes each foot point reads."""

    __slots__ = ("inside", "idx", "w")

    def __init__(self, inside, idx, w):
        self.inside = inside
        self.idx = idx
        self.w = w


def _foot_points(system, nodes, a, dt, rk4_feet):
    """Feet plus, in RK4 mode, the accumulated step integrals.

    Returns ``(feet, slots)``.  Euler mode leaves ``slots = None`` (callers
    fall back to one-point quadrature at the node); RK4 mode rides the
    augmented integrator, so ``slots[:, 0] = int ell*exp(-int h)``,
    ``slots[:, 1] = int g`` and ``slots[:, 2] = int h`` over the step —
    the discount and stage cost then match the foot trajectory itself.
    """
    if not rk4_feet:
        return nodes + dt * np.asarray(system.f(nodes, a), dtype=float), None
    z = np.concatenate([nodes, np.zeros(nodes.shape[:-1] + (3,))], axis=-1)
    z1 = rk4_step(system, z, a, dt)
    return z1[..., : system.n_state], z1[..., system.n_state:]


def _stencil(grid, feet):
    """Multilinear weights/indices of each foot point; exterior feet flagged."""
    n = grid.n_axes
    inside = np.ones(feet.shape[0], dtype=bool)
    base = []
    frac = []
    for k in range(n):
        ax = feet[:, k]
        inside &= (ax >= grid.lo[k]) & (ax <= grid.hi[k])
        u = (ax - grid.lo[k]) / grid.dx[k]
        cell = np.clip(np.floor(u).astype(np.int64), 0, grid.counts[k] - 2)
        base.append(cell)
        frac.append(np.clip(u - cell, 0.0, 1.0))
    strides = np.ones(n, dtype=np.int64)
    for k in range(n - 2, -1, -1):
        strides[k] = strides[k + 1] * grid.counts[k + 1]
    corners = list(itertools.product((0, 1), repeat=n))
    idx = np.empty((feet.shape[0], len(corners)), dtype=np.int64)
    w = np.empty((feet.shape[0], len(corners)))
    for j, corner in enumerate(corners):
        flat = np.zeros(feet.shape[0], dtype=np.int64)
        weight = np.ones(feet.shape[0])
        for k, bit in enumerate(corner):
            flat += (base[k] + bit) * strides[k]
            weight = weight * (frac[k] if bit else 1.0 - frac[k])
        idx[:, j] = flat
        w[:, j] = weight
    return _FootTable(inside, idx, w)


def _apply(table, v_flat, exterior):
    vals = np.einsum("ij,ij->i", v_flat[table.idx], table.w)
    return np.where(table.inside, vals, exterior)


def _origin_flat(grid):
    return int(np.ravel_multi_index(grid.origin_index, tuple(grid.counts)))


def _sweep_loop(grid, update, settings, v0):
    v = v0
    origin = _origin_flat(grid)
    converged = False
    change = math.inf
    it = 0
    for it in range(1, settings.max_iters + 1):
        nxt = update(v)
        if settings.pin_origin:
            nxt[origin] = 0.0
        change = float(np.max(np.abs(nxt - v)))
        v = nxt
        if change < settings.tol:
            converged = True
            break
    if not converged:
        warnings.warn("value iteration hit max_iters=%d with sup-change "
                      "%.3e >= tol %.3e" % (settings.max_iters, change,
                                            settings.tol))
    return v, it, change, converged


def _field_metadata(settings, scheme, exterior, iterations, change, converged):
    return {
        "scheme": scheme,
        "dt": settings.dt,
        "tol": settings.tol,
        "max_iters": settings.max_iters,
        "exterior_value": exterior,
        "pin_origin": settings.pin_origin,
        "rk4_feet": settings.rk4_feet,
        "iterations": iterations,
        "final_change": change,
        "converged": converged,
    }


def solve_zubov(system, grid, settings=None):
    """Kružkov-transformed maximal-cost field on the grid (values in [0,1])."""
    settings = settings or SolverSettings()
    if system.mode != "maximize":
        raise ConfigError("solve_zubov wants a maximize-mode system; "
                          "use solve_hjbe for least-cost problems")
    if grid.n_axes != system.n_state:
        raise ConfigError("grid dimension %d, system wants %d"
                          % (grid.n_axes, system.n_state))
    exterior = 1.0 if settings.exterior_value is None else settings.exterior_value
    if not 0.0 <= exterior <= 1.0:
        raise ConfigError("exterior_value must lie in [0,1] in Kružkov mode")
    dt = settings.dt
    nodes = grid.node_coords().reshape(-1, grid.n_axes)
    tables = []
    for a in system.control.points:
        gv = np.asarray(system.g(nodes, a), dtype=float)
        if gv.min() < -1e-9:
            raise ConfigError("g < 0 on the grid (min %.3g); the maximal-cost "
                              "route needs g >= 0" % gv.min())
        feet, slots = _foot_points(system, nodes, a, dt, settings.rk4_feet)
        g_step = dt * gv if slots is None else slots[:, 1]
        beta = np.exp(-np.maximum(g_step, 0.0))
        tables.append((beta, _stencil(grid, feet)))

    def update(v):
        best = None
        for beta, table in tables:
            cand = (1.0 - beta) + beta * _apply(table, v, exterior)
            best = cand if best is None else np.maximum(best, cand)
        return best

    v, it, change, ok = _sweep_loop(grid, update, settings,
                                    np.zeros(nodes.shape[0]))
    meta = _field_metadata(settings, "zubov", exterior, it, change, ok)
    return ValueField(grid, v.reshape(tuple(grid.counts)), "kruzhkov", meta)


def solve_hjbe(system, grid, settings=None):
    """Raw optimal-cost field for J[ell,h]; direction follows system.mode."""
    settings = settings or SolverSettings()
    if system.guard is None:
        raise ConfigError("solve_hjbe needs a declared convergence guard "
                          "(nonneg_ell / nonpos_ell / case_a / case_b)")
    if grid.n_axes != system.n_state:
        raise ConfigError("grid dimension %d, system wants %d"
                          % (grid.n_axes, system.n_state))
    exterior = 0.0 if settings.exterior_value is None else settings.exterior_value
    dt = settings.dt
    nodes = grid.node_coords().reshape(-1, grid.n_axes)
    ell = system.ell if system.ell is not None else system.g
    tables = []
    for a in system.control.points:
        feet, slots = _foot_points(system, nodes, a, dt, settings.rk4_feet)
        if slots is None:
            lv = np.asarray(ell(nodes, a), dtype=float)
            hv = (np.asarray(system.h(nodes, a), dtype=float)
                  if system.h is not None else np.zeros(nodes.shape[0]))
            cost = dt * lv * np.exp(-0.5 * dt * hv)  # midpoint discount weight
            gamma = np.exp(-dt * hv)
        else:
            cost = slots[:, 0]
            gamma = np.exp(-slots[:, 2])
        tables.append((cost, gamma, _stencil(grid, feet)))
    pick = np.minimum if system.mode == "minimize" else np.maximum

    def update(v):
        best = None
        for cost, gamma, table in tables:
            cand = cost + gamma * _apply(table, v, exterior)
            best = cand if best is None else pick(best, cand)
        return best

    v, it, change, ok = _sweep_loop(grid, update, settings,
                                    np.zeros(nodes.shape[0]))
    meta = _field_metadata(settings, "hjbe", exterior, it, change, ok)
    return ValueField(grid, v.reshape(tuple(grid.counts)), "raw", meta)


def kruzhkov_transform(field):
    """Nodewise v = 1 - exp(-w); turns a raw field into a [0,1)-valued one."""
    if field.transform != "raw":
        raise ConfigError("field is already Kružkov-transformed")
    meta = dict(field.metadata)
    meta["exterior_value"] = 1.0 - math.exp(-meta.get("exterior_value", 0.0))
    return ValueField(field.grid, 1.0 - np.exp(-field.values), "kruzhkov",
                      meta)


def inverse_transform(field, cap):
    """Nodewise w = -ln(1 - v), clamped at `cap` as v approaches 1."""
    if field.transform != "kruzhkov":
        raise ConfigError("inverse transform wants a Kružkov field")
    if not cap > 0.0:
        raise ConfigError("cap must be positive")
    floor = math.exp(-cap)
    w = -np.log(np.maximum(1.0 - field.values, floor))
    meta = dict(field.metadata)
    meta["exterior_value"] = min(
        cap, -math.log(max(1.0 - meta.get("exterior_value", 1.0), floor)))
    return ValueField(field.grid, w, "raw", meta)


def interpolate(field, x, exterior=None):
    """Multilinear interpolation of the field; exterior points get the
    field's exterior value (metadata, else 1 for Kružkov / 0 for raw)."""
    if exterior is None:
        exterior = field.metadata.get(
            "exterior_value", 1.0 if field.transform == "kruzhkov" else 0.0)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != field.grid.n_axes:
        raise ConfigError("point dimension %d, grid wants %d"
                          % (pts.shape[-1], field.grid.n_axes))
    table = _stencil(field.grid, pts)
    out = _apply(table, field.values.reshape(-1), exterior)
    return float(out[0]) if np.ndim(x) == 1 else out
