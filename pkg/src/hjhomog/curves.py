"""Piecewise-linear curves and the value ODE along them.

Along a curve g the accumulated running cost solves

    xi'(s) = L(g(s), xi(s), g'(s)),    xi(0) = c,

integrated here with the classical 4th-order one-step method, substeps
aligned with the curve nodes so the velocity is constant on every substep.
The terminal value dominates the fundamental field: m(t, g(t), g(0), c)
never exceeds xi(t), which makes integrated paths an independent upper
oracle for the dynamic-programming solver.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .fundamental import FundamentalField
from .models import LagrangianView

__all__ = ["Curve", "HerglotzPath", "integrate_action", "upper_bound_check", "curve_to_csv", "curve_from_csv"]


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Curve:
    """Nodes (times, points); linear in between. times[0] must be 0."""

    times: np.ndarray
    points: np.ndarray  # shape (k,) in 1d or (k, n)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", x)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("need at least two nodes")
        if abs(t[0]) > 1e-15:
            raise ValueError("curves start at time 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("node times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise ValueError("non-finite nodes")

    @property
    def dim(self):
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    @property
    def duration(self):
        return float(self.times[-1])

    def node(self, i):
        p = self.points[i]
        return (float(p),) if self.points.ndim == 1 else tuple(float(c) for c in p)

    def segment_velocity(self, i):
        dt = self.times[i + 1] - self.times[i]
        if self.points.ndim == 1:
            return ((self.points[i + 1] - self.points[i]) / dt,)
        return tuple((self.points[i + 1, d] - self.points[i, d]) / dt for d in range(self.dim))

    @property
    def max_speed(self):
        speeds = []
        for i in range(len(self.times) - 1):
            v = self.segment_velocity(i)
            speeds.append(np.sqrt(sum(c * c for c in v)))
        return float(max(speeds))

    def position(self, t):
        t = float(t)
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        th = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        th = min(max(th, 0.0), 1.0)
        if self.points.ndim == 1:
            return ((1 - th) * self.points[i] + th * self.points[i + 1],)
        return tuple((1 - th) * self.points[i, d] + th * self.points[i + 1, d] for d in range(self.dim))


@dataclass
class HerglotzPath:
    curve: Curve
    ts: np.ndarray
    xi: np.ndarray
    c0: float

    @property
    def terminal(self):
        return float(self.xi[-1])


def integrate_action(view: LagrangianView, curve: Curve, c: float, dt: float = 1.0 / 256.0) -> HerglotzPath:
    """Integrate the value ODE along the curve from xi(0) = c.

    Substeps never straddle a node, so the right-hand side is smooth on
    every substep and the one-step method keeps its full order.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ts = [0.0]
    xs = [c]
    xi = c
    for i in range(len(curve.times) - 1):
        t0, t1 = float(curve.times[i]), float(curve.times[i + 1])
        v = curve.segment_velocity(i)
        nsub = max(1, int(np.ceil((t1 - t0) / dt - 1e-12)))
        h = (t1 - t0) / nsub
        x0 = curve.node(i)

        def rhs(s, val):
            pos = tuple(x0[d] + v[d] * (s - t0) for d in range(curve.dim))
            out = np.asarray(view.L(pos, val, v))
            if not np.all(np.isfinite(out)):
                raise ArithmeticError(f"non-finite running cost at time {s}")
            return float(out)

        s = t0
        for _ in range(nsub):
            k1 = rhs(s, xi)
            k2 = rhs(s + h / 2, xi + h * k1 / 2)
            k3 = rhs(s + h / 2, xi + h * k2 / 2)
            k4 = rhs(s + h, xi + h * k3)
            xi = xi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            s += h
            ts.append(s)
            xs.append(xi)
    return HerglotzPath(curve=curve, ts=np.array(ts), xi=np.array(xs), c0=c)


def upper_bound_check(field: FundamentalField, path: HerglotzPath, tol: float):
    """Check m(t, g(t), g(0), c) <= xi(t) + tol at the path's endpoint.

    Returns (ok, margin) with margin = m - xi; tol absorbs the field's
    discretization error. The margin for suboptimal curves is strictly
    negative and is reported, not bounded.
    """
    curve = path.curve
    start = curve.node(0)
    for d in range(field.domain.dim):
        if abs(start[d] - field.base_point[d]) > 1e-9:
            raise DomainError("path must start at the field's base point")
    if abs(path.c0 - field.base_value) > 1e-12:
        raise DomainError("path must start at the field's base value")
    end = curve.node(len(curve.times) - 1)
    for d, ax in enumerate(field.domain.axes):
        if not ax[0] - 1e-9 <= end[d] <= ax[-1] + 1e-9:
            raise DomainError("path endpoint lies outside the field domain")
    m_val = field.eval(curve.duration, end if field.domain.dim > 1 else end[0])
    margin = m_val - path.terminal
    return margin <= tol, margin


def curve_to_csv(curve: Curve) -> str:
    buf = io.StringIO()
    n = curve.dim
    buf.write("t," + ",".join(f"x{d + 1}" for d in range(n)) + "\n")
    pts = curve.points.reshape(len(curve.times), n)
    for i, t in enumerate(curve.times):
        buf.write(",".join([repr(float(t))] + [repr(float(pts[i, d])) for d in range(n)]) + "\n")
    return buf.getvalue()


def curve_from_csv(text: str) -> Curve:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    rows = [tuple(float(c) for c in ln.split(",")) for ln in lines[1:]]
    arr = np.array(rows)
    pts = arr[:, 1] if arr.shape[1] == 2 else arr[:, 1:]
    return Curve(times=arr[:, 0], points=pts)
