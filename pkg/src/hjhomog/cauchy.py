"""Cauchy solves of the oscillatory equation and a-priori envelope checks.

Two independent backends compute the same solution:

* "rescaled": pass to cell variables, march the value-coupled equation on a
  cell-scale grid, and scale back.
* "composition": minimize fundamental fields over base points; fields for
  base points that differ by whole cells are shared through lattice
  equivariance when the initial data is periodic.

Agreement of the two backends is one of the package's main cross checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fundamental import solve_fundamental
from .marching import Domain, GridSpec, periodic_domain, run_marching
from .models import LagrangianView

__all__ = [
    "InitialData",
    "constant_data",
    "affine_data",
    "bump_data",
    "sine_data",
    "CauchyProblem",
    "SolutionField",
    "solve_cauchy",
    "envelope_check",
    "expansiveness_check",
    "sup_H_below",
    "cone_speed",
]


@dataclass(frozen=True)
class InitialData:
    """Lipschitz initial datum with the metadata the solvers need."""

    kind: str
    amplitude: float = 0.0
    frequency: int = 1
    lip: float = 0.0
    bound: Optional[float] = None
    period: Optional[float] = None
    fn: Optional[Callable] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            out = np.full_like(x, self.amplitude)
        elif self.kind == "affine":
            out = self.amplitude * x
        elif self.kind == "bump":
            out = self.amplitude * np.maximum(0.0, 1.0 - np.abs(x))
        elif self.kind == "neg-abs":
            out = -self.amplitude * np.abs(x)
        elif self.kind == "sine":
            out = self.amplitude * np.sin(2.0 * math.pi * self.frequency * x)
        elif self.kind == "custom":
            out = np.asarray(self.fn(x), dtype=float)
        else:
            raise ValueError(f"unknown initial datum kind {self.kind!r}")
        return float(out) if out.shape == () else out


def constant_data(a: float) -> InitialData:
    return InitialData("constant", a, lip=0.0, bound=abs(a), period=1.0)


def affine_data(slope: float) -> InitialData:
    return InitialData("affine", slope, lip=abs(slope))


def bump_data(height: float = 1.0) -> InitialData:
    return InitialData("bump", height, lip=abs(height), bound=abs(height))


def sine_data(amplitude: float, frequency: int = 1) -> InitialData:
    return InitialData(
        "sine",
        amplitude,
        frequency=frequency,
        lip=abs(amplitude) * 2.0 * math.pi * frequency,
        bound=abs(amplitude),
        period=1.0 / frequency,
    )


def cone_speed(view: LagrangianView, lip: float, v_scan: float = 64.0) -> float:
    """Base points that can matter for data of slope `lip` lie within this
    speed of the evaluation point: max_y |L(y,0,0)| + K1 + 2K, where K1 is
    the smallest constant with L(y,0,v) >= (1+lip)|v| - K1."""
    ys = np.linspace(0, 1, 64, endpoint=False)
    zero = (np.zeros_like(ys),) * (view.dim - 1)
    l00 = float(np.max(np.abs(np.asarray(view.L((ys,) + zero, 0.0, (np.zeros_like(ys),) + zero)))))
    k1 = 0.0
    for v in np.linspace(-v_scan, v_scan, 513):
        vt = (np.full_like(ys, v),) + zero
        lmin = float(np.min(np.asarray(view.L((ys,) + zero, 0.0, vt))))
        k1 = max(k1, (1.0 + lip) * abs(v) - lmin)
    return l00 + k1 + 2.0 * view.model.K


def sup_H_below(model, p_radius: float) -> float:
    """sup |H(y, r, p)| over the periodic cell and |p| <= p_radius."""
    ys = np.linspace(0, 1, 64, endpoint=False)
    rs = np.linspace(0, 1, 64, endpoint=False)
    worst = 0.0
    zero = (np.zeros_like(ys),) * (model.dim - 1)
    for p in np.linspace(-p_radius, p_radius, 65):
        pt = (np.full_like(ys, p),) + zero
        for r in rs:
            vals = np.asarray(model.H((ys,) + zero, r, pt))
            worst = max(worst, float(np.max(np.abs(vals))))
    return worst


@dataclass
class CauchyProblem:
    view: LagrangianView
    phi: InitialData
    epsilon: float
    T: float
    grid: GridSpec
    window: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.view.dim != 1:
            raise ValueError("Cauchy experiments are implemented in dimension 1")
        if not (self.epsilon > 0 and self.T > 0):
            raise ValueError("epsilon and T must be positive")
        if not np.isfinite(self.phi.lip):
            raise ValueError("initial datum needs a finite Lipschitz constant")


@dataclass
class SolutionField:
    """u on a space-time sample lattice, physical units."""

    xs: np.ndarray
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(xs))
    backend: str
    epsilon: float
    resolution: float
    problem: CauchyProblem = None
    periodic_period: Optional[float] = None

    def eval(self, x, t):
        ti = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[ti] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not sampled")
        row = self.values[ti]
        if self.periodic_period is not None:
            P = self.periodic_period
            s = (x - self.xs[0]) % P / (self.xs[1] - self.xs[0])
            i0 = int(math.floor(s)) % len(self.xs)
            th = s - math.floor(s)
            return (1 - th) * row[i0] + th * row[(i0 + 1) % len(self.xs)]
        s = (x - self.xs[0]) / (self.xs[1] - self.xs[0])
        i0 = int(math.floor(s))
        if s < -1e-9 or s > len(self.xs) - 1 + 1e-9:
            raise ValueError("x outside sampled range")
        i0 = min(max(i0, 0), len(self.xs) - 2)
        th = min(max(s - i0, 0.0), 1.0)
        return (1 - th) * row[i0] + th * row[i0 + 1]

    def slice_values(self, t):
        ti = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[ti] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not sampled")
        return self.values[ti]


def _time_indices(T, eps, dt_cell, t_store):
    """Map requested physical times to cell-time step indices."""
    n_steps = int(round((T / eps) / dt_cell))
    if abs(n_steps * dt_cell - T / eps) > 1e-9 * max(1.0, T / eps):
        raise ValueError("horizon must be a whole number of cell steps")
    if t_store is None:
        idx = list(range(n_steps + 1))
    else:
        idx = sorted({int(round((t / eps) / dt_cell)) for t in t_store} | {0, n_steps})
        for t in t_store:
            k = int(round((t / eps) / dt_cell))
            if abs(k * dt_cell - t / eps) > 1e-9 * max(1.0, t / eps):
                raise ValueError(f"monitor time {t} is not on the step lattice")
    return n_steps, idx


def solve_cauchy(prob: CauchyProblem, backend: str = "rescaled", t_store=None,
                 n_base_per_cell: int = 16, stencil_limit: float = 0.01) -> SolutionField:
    if backend == "rescaled":
        return _solve_rescaled(prob, t_store, stencil_limit)
    if backend == "composition":
        return _solve_composition(prob, t_store, n_base_per_cell, stencil_limit)
    raise ValueError(f"unknown backend {backend!r}")


def _solve_rescaled(prob: CauchyProblem, t_store, stencil_limit):
    view, eps, grid = prob.view, prob.epsilon, prob.grid
    n_steps, idx = _time_indices(prob.T, eps, grid.dt, t_store)

    def l_eval(foot, r, v):
        return np.asarray(view.L(foot, r, v))

    if prob.phi.period is not None:
        period_cells = prob.phi.period / eps
        if abs(period_cells - round(period_cells)) > 1e-9:
            raise ValueError("periodic datum requires the period to be a multiple of epsilon")
        dom = periodic_domain((max(int(round(period_cells)), 1),), grid.points_per_unit)
        ys = dom.axes[0]
        w0 = np.asarray(prob.phi(eps * ys)) / eps
        slices, frac = run_marching(dom, grid, l_eval, w0, n_steps, store=idx, stencil_limit=stencil_limit)
        xs = eps * ys
        times = np.array([k * grid.dt * eps for k in idx])
        vals = np.array([eps * slices[k] for k in idx])
        return SolutionField(
            xs, times, vals, "rescaled", eps, eps * grid.resolution(), prob,
            periodic_period=eps * len(ys) * dom.dx,
        )
    # truncated domain: pad the monitored window by the dependence cone
    m0 = cone_speed(view, prob.phi.lip)
    lo = (prob.window[0] - m0 * prob.T) / eps - grid.padding
    hi = (prob.window[1] + m0 * prob.T) / eps + grid.padding
    from .marching import box_domain

    dom = box_domain(lo, hi, grid.points_per_unit, anchor=(0.0,))
    ys = dom.axes[0]
    w0 = np.asarray(prob.phi(eps * ys)) / eps
    slices, frac = run_marching(dom, grid, l_eval, w0, n_steps, store=idx, stencil_limit=stencil_limit)
    keep = (ys >= prob.window[0] / eps - 1e-9) & (ys <= prob.window[1] / eps + 1e-9)
    xs = eps * ys[keep]
    times = np.array([k * grid.dt * eps for k in idx])
    vals = np.array([eps * slices[k][keep] for k in idx])
    return SolutionField(xs, times, vals, "rescaled", eps, eps * grid.resolution(), prob)


def _solve_composition(prob: CauchyProblem, t_store, n_base_per_cell, stencil_limit):
    view, eps, grid = prob.view, prob.epsilon, prob.grid
    n_steps, idx = _time_indices(prob.T, eps, grid.dt, t_store)
    # base points farther than the stencil reach carry unreached fields and
    # can never win the minimum, so the search radius is capped there
    m0 = min(cone_speed(view, prob.phi.lip), grid.vmax)
    h_y = eps / n_base_per_cell
    j_lo = int(math.floor((prob.window[0] - m0 * prob.T - eps) / h_y))
    j_hi = int(math.ceil((prob.window[1] + m0 * prob.T + eps) / h_y))

    reuse = None
    if prob.phi.period is not None:
        period_cells = prob.phi.period / eps
        if abs(period_cells - round(period_cells)) < 1e-9:
            reuse = n_base_per_cell * int(round(period_cells))  # j and j+reuse share a field

    tau_max = prob.T / eps
    radius = grid.vmax * tau_max + grid.padding
    fields = {}

    def field_for(j):
        jc = j % reuse if reuse is not None else j
        if jc not in fields:
            Y = jc * h_y / eps
            cval = float(prob.phi(eps * Y)) / eps
            sol = solve_fundamental(
                view, Y, cval, tau_max, grid, box=(Y - radius, Y + radius),
                store=idx, stencil_limit=stencil_limit,
            )
            fields[jc] = sol.field
        return fields[jc], (j - jc) * h_y / eps

    # sample lattice shared with the rescaled backend
    nx = int(round((prob.window[1] - prob.window[0]) * grid.points_per_unit / eps))
    xs = prob.window[0] + np.arange(nx + 1) * (eps / grid.points_per_unit)
    times = np.array([k * grid.dt * eps for k in idx])
    vals = np.full((len(idx), len(xs)), np.inf)
    argmin_j = np.full((len(idx), len(xs)), j_lo, dtype=int)
    cap = 0.4 * 1.0e6
    for j in range(j_lo, j_hi + 1):
        y_j = j * h_y
        fld, shift = field_for(j)
        ax = fld.domain.axes[0]
        X = xs / eps - shift
        inside = (X >= ax[0]) & (X <= ax[-1])
        for ti, k in enumerate(idx):
            if k == 0:
                continue
            t = times[ti]
            sel = inside & (np.abs(xs - y_j) <= m0 * t + eps)
            if not np.any(sel):
                continue
            cand = eps * np.interp(X[sel], ax, fld.slices[k])
            cand = np.where(cand > eps * (fld.base_value + cap), np.inf, cand)
            better = cand < vals[ti, sel]
            rows = np.nonzero(sel)[0]
            vals[ti, rows[better]] = cand[better]
            argmin_j[ti, rows[better]] = j
    vals[0] = np.asarray(prob.phi(xs))
    # the minimizing base must be interior to the searched range
    if np.any(argmin_j[1:] <= j_lo) or np.any(argmin_j[1:] >= j_hi):
        raise ArithmeticError("minimizing base point hit the search boundary; enlarge the window padding")
    res = eps * grid.resolution() + h_y * (1.0 + prob.phi.lip) * 0.5
    return SolutionField(xs, times, vals, "composition", eps, res, prob)


def envelope_check(fld: SolutionField):
    """Largest violation of phi - M t <= u <= phi + M t over the stored
    slices, with M = sup |H| over momenta up to the datum's slope.

    Returns (lower residual, upper residual, M); both residuals should stay
    within the scheme resolution.
    """
    prob = fld.problem
    M = sup_H_below(prob.view.model, prob.phi.lip)
    phi_vals = np.asarray(prob.phi(fld.xs))
    low = high = 0.0
    for ti, t in enumerate(fld.times):
        u = fld.values[ti]
        high = max(high, float(np.max(u - (phi_vals + M * t))))
        low = max(low, float(np.max((phi_vals - M * t) - u)))
    return low, high, M


def expansiveness_check(fld: SolutionField, s: float, t: float):
    """Ratio of the time-s oscillation at time t to its growth bound
    exp(K t) * M * s. The check is for the unit-scale problem (epsilon=1)
    where the bound has no epsilon in the exponent."""
    prob = fld.problem
    K = prob.view.model.K / fld.epsilon
    M = sup_H_below(prob.view.model, prob.phi.lip)
    u_t = fld.slice_values(t)
    u_ts = fld.slice_values(t + s)
    gap = float(np.max(np.abs(u_ts - u_t)))
    bound = math.exp(K * t) * M * s
    return gap / bound if bound > 0 else math.inf
