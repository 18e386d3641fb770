"""Shared semi-Lagrangian dynamic-programming core.

One time step of every solver in this package is the same update:

    W_new(x) = min over stencil velocities v of
               [ W(x - v dt) + dt * L(x - v dt, W(x - v dt), v) ]

where W(x - v dt) is read off by (multi)linear interpolation and the value
slot of L is evaluated at the interpolated previous-slice value (explicit
step for the value coupling). The stencil is a uniform velocity lattice of
spacing dv truncated at radius vmax; argmin ties break toward smaller |v|,
then lexicographically, so equivariance tests are exactly reproducible.

Domains are either periodic (feet wrap) or truncated boxes (feet outside
the box are excluded from the minimum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

BIG = 1e18  # exclusion sentinel for out-of-box feet


class SolverAccuracyError(RuntimeError):
    """Raised when the configured velocity stencil is demonstrably too small."""


class NumericError(ArithmeticError):
    """Raised on non-finite values inside a solve."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time resolution parameters.

    points_per_unit: gridpoints per unit cell and axis; dt: time step;
    dv: velocity lattice spacing; vmax: stencil radius; padding: extra box
    width (units) beyond the requested domain on truncated domains.
    """

    points_per_unit: int = 64
    dt: float = 1.0 / 32.0
    dv: float = 1.0 / 8.0
    vmax: float = 4.0
    padding: float = 1.0

    def __post_init__(self):
        if self.points_per_unit < 16:
            raise ValueError(
                f"under-resolved cell: {self.points_per_unit} points per unit period "
                "(need at least 16; 64+ recommended)"
            )
        if self.dt <= 0 or self.dv <= 0 or self.vmax <= 0:
            raise ValueError("dt, dv, vmax must be positive")

    @property
    def dx(self) -> float:
        return 1.0 / self.points_per_unit

    def refined(self, factor=2) -> "GridSpec":
        """Same stencil velocities, spacing halved in space and time."""
        return GridSpec(
            points_per_unit=self.points_per_unit * factor,
            dt=self.dt / factor,
            dv=self.dv,
            vmax=self.vmax,
            padding=self.padding,
        )

    def resolution(self) -> float:
        """First-order accuracy scale of one solve at this resolution."""
        return self.dx + self.dt + self.dv * self.dv / 8.0


def velocity_stencil(dim: int, dv: float, vmax: float):
    """Velocity lattice of spacing dv inside the ball |v| <= vmax, sorted by
    |v| then lexicographically. Returns (velocities, boundary mask)."""
    kmax = int(math.floor(vmax / dv + 1e-12))
    if kmax < 1:
        raise ValueError("vmax must admit at least one nonzero stencil velocity")
    rng = range(-kmax, kmax + 1)
    if dim == 1:
        vs = [(k * dv,) for k in rng]
    else:
        vs = [(i * dv, j * dv) for i in rng for j in rng if math.hypot(i * dv, j * dv) <= vmax + 1e-12]
    vs.sort(key=lambda v: (sum(c * c for c in v), v))
    norms = np.array([math.sqrt(sum(c * c for c in v)) for v in vs])
    top = norms.max()
    boundary = norms >= top - dv * 0.5
    return vs, boundary


def _shift_periodic(W, k, axis):
    return np.roll(W, k, axis=axis) if k else W


def _shift_box(W, k, axis, fill):
    if k == 0:
        return W
    out = np.full_like(W, fill)
    src = [slice(None)] * W.ndim
    dst = [slice(None)] * W.ndim
    if k > 0:
        dst[axis] = slice(k, None)
        src[axis] = slice(None, -k)
    else:
        dst[axis] = slice(None, k)
        src[axis] = slice(-k, None)
    out[tuple(dst)] = W[tuple(src)]
    return out


@dataclass
class Domain:
    """Uniform tensor grid, periodic or truncated, anchored at a base point.

    axes[d] holds the physical coordinates; on periodic domains the period
    along each axis is axes[d].size * dx.
    """

    axes: tuple
    dx: float
    periodic: bool

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(ax.size for ax in self.axes)

    def coordinate_arrays(self):
        """Broadcastable coordinate arrays (one per axis)."""
        n = self.dim
        out = []
        for d, ax in enumerate(self.axes):
            shape = [1] * n
            shape[d] = ax.size
            out.append(ax.reshape(shape))
        return tuple(out)

    def index_of(self, point):
        """Nearest-gridpoint index of a physical point (must be on-grid)."""
        idx = []
        for d, ax in enumerate(self.axes):
            i = int(round((point[d] - ax[0]) / self.dx))
            if self.periodic:
                i %= ax.size
            elif not 0 <= i < ax.size:
                raise ValueError("point outside domain")
            idx.append(i)
        return tuple(idx)

    def interpolate(self, W, point):
        """Multilinear interpolation of a slice at a physical point."""
        pt = point if isinstance(point, (tuple, list)) else (point,)
        weights = []
        bases = []
        for d, ax in enumerate(self.axes):
            s = (pt[d] - ax[0]) / self.dx
            i0 = math.floor(s)
            th = s - i0
            nd = ax.size
            if self.periodic:
                i0 %= nd
            else:
                if s < -1e-9 or s > nd - 1 + 1e-9:
                    raise ValueError("interpolation point outside domain")
                i0 = min(max(i0, 0), nd - 2) if nd > 1 else 0
                th = min(max(s - i0, 0.0), 1.0)
            bases.append(i0)
            weights.append(th)
        out = 0.0
        for corner in np.ndindex(*(2,) * self.dim):
            w = 1.0
            idx = []
            for d, c in enumerate(corner):
                w *= weights[d] if c else (1.0 - weights[d])
                i = bases[d] + c
                idx.append(i % self.axes[d].size if self.periodic else min(i, self.axes[d].size - 1))
            if w:
                out += w * W[tuple(idx)]
        return float(out)


def periodic_domain(periods, points_per_unit, origin=None):
    """Periodic tensor grid covering one period box."""
    periods = periods if isinstance(periods, (tuple, list)) else (periods,)
    origin = origin if origin is not None else (0.0,) * len(periods)
    axes = []
    for d, P in enumerate(periods):
        npts = int(round(P * points_per_unit))
        axes.append(origin[d] + np.arange(npts) / points_per_unit)
    return Domain(axes=tuple(axes), dx=1.0 / points_per_unit, periodic=True)


def box_domain(lo, hi, points_per_unit, anchor=None):
    """Truncated tensor grid; when an anchor point is given the grid is laid
    out so the anchor is exactly a gridpoint."""
    lo = lo if isinstance(lo, (tuple, list)) else (lo,)
    hi = hi if isinstance(hi, (tuple, list)) else (hi,)
    anchor = anchor if anchor is not None else lo
    anchor = anchor if isinstance(anchor, (tuple, list)) else (anchor,)
    dx = 1.0 / points_per_unit
    axes = []
    for d in range(len(lo)):
        i_lo = math.floor((lo[d] - anchor[d]) / dx)
        i_hi = math.ceil((hi[d] - anchor[d]) / dx)
        axes.append(anchor[d] + np.arange(i_lo, i_hi + 1) * dx)
    return Domain(axes=tuple(axes), dx=dx, periodic=False)


class _StencilPlan:
    """Precomputed interpolation layout and foot coordinates per velocity."""

    __slots__ = ("velocity", "ishift", "theta", "foot", "boundary", "speed")

    def __init__(self, domain: Domain, v, dt, boundary):
        self.velocity = v
        self.boundary = boundary
        self.speed = math.sqrt(sum(c * c for c in v))
        self.ishift = []
        self.theta = []
        for d in range(domain.dim):
            s = v[d] * dt / domain.dx
            i0 = math.floor(s)
            th = s - i0
            if th < 1e-12 or th > 1 - 1e-12:
                i0 = int(round(s))
                th = 0.0
            self.ishift.append(int(i0))
            self.theta.append(th)
        coords = domain.coordinate_arrays()
        self.foot = tuple(coords[d] - v[d] * dt for d in range(domain.dim))


def build_plans(domain: Domain, grid: GridSpec, dt=None):
    dt = grid.dt if dt is None else dt
    vs, boundary = velocity_stencil(domain.dim, grid.dv, grid.vmax)
    return [_StencilPlan(domain, v, dt, b) for v, b in zip(vs, boundary)]


def _foot_values(W, plan, periodic, cap=None):
    """Interpolate the slice at x - v dt for every gridpoint at once.

    With a cap, feet whose interpolation cell touches an unreached value
    (>= cap) are excluded outright: the start data is plus-infinity off the
    base point, and blending a finite stand-in into real values would leak
    sentinel mass into the solution.
    """
    out = W
    for d in range(len(plan.ishift)):
        i0, th = plan.ishift[d], plan.theta[d]
        shift = _shift_periodic if periodic else (lambda w, k, ax: _shift_box(w, k, ax, BIG))
        a = shift(out, i0, d)
        if th:
            b = shift(out, i0 + 1, d)
            if cap is None:
                out = (1.0 - th) * a + th * b
            else:
                out = np.where((a >= cap) | (b >= cap), BIG, (1.0 - th) * a + th * b)
        else:
            out = a if cap is None else np.where(a >= cap, BIG, a)
    return out


def interior_mask(domain: Domain, grid: GridSpec):
    """Points far enough from a box edge that one step never reads the
    exclusion fill; None on periodic domains (everything interior)."""
    if domain.periodic:
        return None
    band = int(math.ceil(grid.vmax * grid.dt / domain.dx)) + 1
    mask = np.ones(domain.shape, dtype=bool)
    for d in range(domain.dim):
        sl = [slice(None)] * domain.dim
        sl[d] = slice(0, band)
        mask[tuple(sl)] = False
        sl[d] = slice(-band, None)
        mask[tuple(sl)] = False
    return mask


def run_marching(
    domain: Domain,
    grid: GridSpec,
    l_eval,
    w0,
    n_steps: int,
    store="all",
    value_cap=None,
    r_fields=None,
    stencil_limit=0.01,
    dt=None,
    cone_filter=None,
    seed_slice1=None,
):
    """Run n_steps semi-Lagrangian updates from slice w0.

    l_eval(foot_coords, r_values, velocity) evaluates the running cost.
    store: "all", "last", or an iterable of step indices to keep.
    value_cap: values >= cap count as unreached (start sentinel); such
    points are excluded from the stencil-boundary statistic.
    r_fields: optional per-step value-slot overrides (fixed-field sweeps).
    cone_filter: optional (distance_array, speed); the boundary statistic
    then only counts points with distance <= speed * t, which excludes the
    racing front that legitimately uses extreme stencil velocities while a
    sentinel start is being filled in.

    Returns (slices dict {step: array}, worst boundary-attainment fraction).
    Raises SolverAccuracyError when boundary velocities win the minimum at
    more than `stencil_limit` of the counted points in some step.
    """
    dt = grid.dt if dt is None else dt
    plans = build_plans(domain, grid, dt)
    inner = interior_mask(domain, grid)
    keep = None if store in ("all", "last") else {int(k) for k in store}
    W = np.array(w0, dtype=float)
    out = {}
    if store == "all" or (keep is not None and 0 in keep):
        out[0] = W.copy()
    cap = value_cap
    eff_cap = BIG * 0.5 if cap is None else cap
    worst_frac = 0.0
    periodic = domain.periodic
    for k in range(1, n_steps + 1):
        if k == 1 and seed_slice1 is not None:
            W = np.array(seed_slice1, dtype=float)
            if store == "all" or (keep is not None and 1 in keep):
                out[1] = W.copy()
            continue
        prev_valid = W < eff_cap
        rf = r_fields[k - 1] if r_fields is not None else None
        best = np.full_like(W, BIG)
        from_boundary = np.zeros(W.shape, dtype=bool)
        for plan in plans:
            wf = _foot_values(W, plan, periodic, cap)
            rvals = wf if rf is None else _foot_values(rf, plan, periodic)
            cand = wf + dt * l_eval(plan.foot, rvals, plan.velocity)
            mask = cand < best
            if plan.boundary:
                from_boundary |= mask
            else:
                from_boundary &= ~mask
            best = np.where(mask, cand, best)
        counted = prev_valid & (best < eff_cap)
        if inner is not None:
            counted &= inner
        if cone_filter is not None:
            dist, speed = cone_filter
            counted &= dist <= speed * (k * dt)
        n_counted = int(np.count_nonzero(counted))
        if n_counted:
            worst_frac = max(worst_frac, float(np.count_nonzero(from_boundary & counted)) / n_counted)
        W = best
        if not np.all(np.isfinite(W)):
            raise NumericError(f"non-finite values at step {k}")
        if store == "all" or (keep is not None and k in keep):
            out[k] = W.copy()
    if store == "last":
        out[n_steps] = W
    if worst_frac > stencil_limit:
        raise SolverAccuracyError(
            f"velocity stencil too small: boundary velocities win at "
            f"{100 * worst_frac:.1f}% of interior points (> {100 * stencil_limit:.0f}%)"
        )
    return out, worst_frac
