"""Hamiltonian model families, their convex duals, and assumption checks.

A model is a Hamiltonian H(y, r, p) on R^n x R x R^n that is Z^{n+1}-periodic
in (y, r), Lipschitz in r with constant K, and convex and superlinear in p.
Each built-in family also knows its Lagrangian L(y, r, v), the Legendre dual
of H in the momentum slot, in closed form; generic Hamiltonians fall back to
a tabulated numeric transform through :class:`LagrangianView`.

Points and momenta are scalars / arrays in dimension 1 and tuples of
coordinate arrays in dimension 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PeriodicFunction",
    "HamiltonianModel",
    "LagrangianView",
    "StaircaseSmoother",
    "AssumptionReport",
    "eval_H",
    "eval_L",
    "legendre_transform",
    "verify_assumptions",
    "build_dislocation",
    "lagrangian_view",
    "make_model",
    "zoo_models",
    "MODEL_ZOO",
]

TWO_PI = 2.0 * math.pi


class InvalidArgument(ValueError):
    """Raised on non-finite or out-of-contract inputs."""


class ConfigurationError(ValueError):
    """Raised on unusable solver / view configuration."""


# ---------------------------------------------------------------------------
# periodic scalar functions (1-periodic), used for potentials, obstacle
# fields c(y) and transport velocities F(r)


@dataclass(frozen=True)
class PeriodicFunction:
    """A named 1-periodic scalar function offset + amplitude * shape(freq * r).

    kinds: "constant", "sine", "cosine", "sine-squared" (sin^2(pi f r)),
    and "custom" carrying an arbitrary callable (not serializable).
    """

    kind: str = "constant"
    offset: float = 0.0
    amplitude: float = 0.0
    frequency: int = 1
    fn: Optional[Callable] = None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(np.float64(self.offset), r.shape).copy() if r.shape else float(self.offset)
        if self.kind == "sine":
            return self.offset + self.amplitude * np.sin(TWO_PI * self.frequency * r)
        if self.kind == "cosine":
            return self.offset + self.amplitude * np.cos(TWO_PI * self.frequency * r)
        if self.kind == "sine-squared":
            return self.offset + self.amplitude * np.sin(math.pi * self.frequency * r) ** 2
        if self.kind == "custom":
            return self.fn(r)
        raise ConfigurationError(f"unknown periodic function kind {self.kind!r}")

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(r)
        if self.kind == "sine":
            return self.amplitude * TWO_PI * self.frequency * np.cos(TWO_PI * self.frequency * r)
        if self.kind == "cosine":
            return -self.amplitude * TWO_PI * self.frequency * np.sin(TWO_PI * self.frequency * r)
        if self.kind == "sine-squared":
            w = math.pi * self.frequency
            return self.amplitude * 2.0 * w * np.sin(w * r) * np.cos(w * r)
        if self.kind == "custom":
            h = 1e-6
            return (self.fn(r + h) - self.fn(r - h)) / (2 * h)
        raise ConfigurationError(f"unknown periodic function kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"{self.offset}"
        if self.kind == "sine":
            return f"{self.offset} + {self.amplitude}*sin(2*pi*{self.frequency}*r)"
        if self.kind == "cosine":
            return f"{self.offset} + {self.amplitude}*cos(2*pi*{self.frequency}*r)"
        if self.kind == "sine-squared":
            return f"{self.offset} + {self.amplitude}*sin(pi*{self.frequency}*r)^2"
        return "custom"


def _axes(x, n):
    """Normalize a point/covector argument to a tuple of n float arrays."""
    if isinstance(x, (tuple, list)):
        if len(x) != n:
            raise InvalidArgument(f"expected {n} components, got {len(x)}")
        return tuple(np.asarray(c, dtype=float) for c in x)
    arr = np.asarray(x, dtype=float)
    if n == 1:
        return (arr,)
    raise InvalidArgument(f"dimension-{n} point must be a tuple of {n} components")


def _norm(comps):
    if len(comps) == 1:
        return np.abs(comps[0])
    return np.hypot(comps[0], comps[1])


def _dot(a, b):
    out = a[0] * b[0]
    for ca, cb in zip(a[1:], b[1:]):
        out = out + ca * cb
    return out


# ---------------------------------------------------------------------------
# staircase smoother used by the dislocation family


@dataclass(frozen=True)
class StaircaseSmoother:
    """Smooth increasing substitute for the half-integer staircase.

    value(r) = r + (1 - delta) * sin(2 pi r) / (2 pi), so value(r+1) =
    value(r) + 1 exactly, value is the identity at integer and half-integer
    nodes, and delta <= value' <= 2 - delta <= 1/delta.
    """

    delta: float = 0.25
    newton_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgument("delta must lie in (0, 1)")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = r + (1.0 - self.delta) * np.sin(TWO_PI * r) / TWO_PI
        return float(out) if out.shape == () else out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = 1.0 + (1.0 - self.delta) * np.cos(TWO_PI * r)
        return float(out) if out.shape == () else out

    def invert(self, u):
        """Solve value(r) = u by safeguarded Newton (derivative >= delta)."""
        u_arr = np.asarray(u, dtype=float)
        scalar = u_arr.shape == ()
        u_arr = np.atleast_1d(u_arr)
        # value maps [k - 1/2, k + 1/2] onto itself, so root brackets are known
        n = np.round(u_arr)
        lo = n - 0.5
        hi = n + 0.5
        r = u_arr.copy()
        for _ in range(100):
            f = np.asarray(self.value(r)) - u_arr
            if np.all(np.abs(f) <= self.newton_tol):
                break
            step = f / np.asarray(self.derivative(r))
            r_new = r - step
            # bisection fallback whenever Newton leaves the bracket
            bad = (r_new < lo) | (r_new > hi)
            if np.any(bad):
                f_bad = f[bad]
                lo_b, hi_b = lo[bad], hi[bad]
                r_b = r[bad]
                hi_b = np.where(f_bad > 0, r_b, hi_b)
                lo_b = np.where(f_bad > 0, lo_b, r_b)
                lo[bad], hi[bad] = lo_b, hi_b
                r_new[bad] = 0.5 * (lo_b + hi_b)
            r = r_new
        else:
            raise ArithmeticError("staircase inversion did not converge in 100 iterations")
        return float(r[0]) if scalar else r

    def force(self, r):
        """The periodic self-interaction term r - invert(r)."""
        r = np.asarray(r, dtype=float)
        out = r - np.asarray(self.invert(r))
        return float(out) if out.shape == () else out


# ---------------------------------------------------------------------------
# model base


class HamiltonianModel:
    """Base class; subclasses implement H and (optionally) the dual L.

    Metadata estimated at construction: K (Lipschitz constant in the value
    slot, numerically estimated and inflated by 5%), growth exponents q1 <=
    q2 as exact fractions, the uniform-oscillation constant alpha0 and the
    growth constant beta0, and a default velocity truncation radius vmax.
    """

    family = "custom-analytic"

    def __init__(self, dim=1):
        if dim not in (1, 2):
            raise InvalidArgument("spatial dimension must be 1 or 2")
        self.dim = dim
        self.params: dict = {}
        self.q1 = Fraction(2)
        self.q2 = Fraction(2)
        self.even_in_p = True
        self.has_analytic_dual = True

    # subclasses: H(self, y_tuple, r, p_tuple) and L(self, y_tuple, r, v_tuple)

    def _finalize(self, p_max=4.0):
        self.K = self._estimate_K(p_max)
        self.alpha0 = self._estimate_alpha0(p_max)
        self.beta0 = self._estimate_beta0(p_max)
        self.vmax = self.suggest_vmax(1.0)

    def _sample_grid(self, p_max, n_y=64, n_r=64, n_p=65):
        ys = np.linspace(0.0, 1.0, n_y, endpoint=False)
        rs = np.linspace(0.0, 1.0, n_r, endpoint=False)
        ps = np.linspace(-p_max, p_max, n_p)
        return ys, rs, ps

    def _estimate_K(self, p_max):
        ys, rs, ps = self._sample_grid(p_max)
        h = 1e-5
        worst = 0.0
        zero = (np.zeros(1),) * (self.dim - 1)
        for p in ps:
            pt = (np.full(1, p),) + zero
            for y in ys:
                yt = (np.full(1, y),) + zero
                dH = (np.asarray(self.H(yt, rs + h, pt)) - np.asarray(self.H(yt, rs - h, pt))) / (2 * h)
                worst = max(worst, float(np.max(np.abs(dH))))
        k = worst * 1.05
        return 0.0 if k < 1e-9 else k

    def _estimate_alpha0(self, p_max):
        ys, rs, ps = self._sample_grid(p_max, n_y=32, n_r=32, n_p=33)
        zero = (np.zeros(1),) * (self.dim - 1)
        h00 = {}
        worst = 0.0
        origin = (np.zeros(1),) + zero
        for p in ps:
            pt = (np.full(1, p),) + zero
            h00[p] = float(np.asarray(self.H(origin, 0.0, pt)))
        for p in ps:
            pt = (np.full(1, p),) + zero
            for y in ys:
                yt = (np.full(1, y),) + zero
                vals = np.asarray(self.H(yt, rs, pt))
                worst = max(worst, float(np.max(np.abs(vals - h00[p]))))
        return worst * 1.05 + 1e-12

    def _estimate_beta0(self, p_max):
        ps = np.linspace(-p_max, p_max, 257)
        zero = (np.zeros(1),) * (self.dim - 1)
        origin = (np.zeros(1),) + zero
        q1, q2 = float(self.q1), float(self.q2)
        beta = 0.5
        for p in ps:
            pt = (np.full(1, p),) + zero
            hval = float(np.asarray(self.H(origin, 0.0, pt)))
            beta = max(beta, hval / (abs(p) ** q2 + 1.0))
            # smallest beta with hval >= |p|^q1 / beta - beta
            disc = hval * hval + 4.0 * abs(p) ** q1
            beta = max(beta, 0.5 * (-hval + math.sqrt(disc)))
        return beta * 1.05

    def suggest_vmax(self, lip=1.0):
        """Velocity radius beyond which minimizers for data of slope `lip`
        cannot go: smallest V with min_y L(y,0,+-V)/V >= lip + 1, doubled."""
        zero = (np.zeros(8),) * (self.dim - 1)
        ys = (np.linspace(0, 1, 8, endpoint=False),) + zero
        v = 1.0
        for _ in range(40):
            ok = True
            for sign in (+1.0, -1.0):
                vt = (np.full(8, sign * v),) + (np.zeros(8),) * (self.dim - 1)
                lmin = float(np.min(np.asarray(self.L(ys, 0.0, vt))))
                if lmin / v < lip + 1.0:
                    ok = False
            if ok:
                return 2.0 * v
            v *= 1.25
        return 2.0 * v

    def L(self, y, r, v):
        raise ConfigurationError(f"{self.family} has no closed-form Lagrangian; use a tabulated view")

    def describe(self) -> str:
        lines = [f"family: {self.family}", f"dim: {self.dim}"]
        for k, v in self.params.items():
            lines.append(f"  {k}: {v.describe() if isinstance(v, PeriodicFunction) else v}")
        lines.append(f"K: {self.K:.6g}  q1: {self.q1}  q2: {self.q2}")
        lines.append(f"alpha0: {self.alpha0:.6g}  beta0: {self.beta0:.6g}  vmax: {self.vmax:.6g}")
        return "\n".join(lines)


class QuadraticFree(HamiltonianModel):
    """H = |p|^2 / 2, self-dual; no oscillation at all."""

    family = "quadratic-free"

    def __init__(self, dim=1):
        super().__init__(dim)
        self._finalize()

    def H(self, y, r, p):
        p = _axes(p, self.dim)
        return 0.5 * _norm(p) ** 2

    def L(self, y, r, v):
        v = _axes(v, self.dim)
        return 0.5 * _norm(v) ** 2

    def dL_dr(self, y, r, v):
        return np.zeros_like(np.asarray(r, dtype=float))


class QuadraticPotential(HamiltonianModel):
    """H = |p|^2 / 2 + V(y) with a 1-periodic potential, value-independent."""

    family = "quadratic-potential"

    def __init__(self, potential: PeriodicFunction | None = None, dim=1):
        super().__init__(dim)
        self.potential = potential if potential is not None else PeriodicFunction("cosine", 0.0, 1.0)
        self.params = {"potential": self.potential}
        self._finalize()

    def H(self, y, r, p):
        y = _axes(y, self.dim)
        p = _axes(p, self.dim)
        return 0.5 * _norm(p) ** 2 + self.potential(y[0])

    def L(self, y, r, v):
        y = _axes(y, self.dim)
        v = _axes(v, self.dim)
        return 0.5 * _norm(v) ** 2 - self.potential(y[0])

    def dL_dr(self, y, r, v):
        return np.zeros_like(np.asarray(r, dtype=float))


class SineGordon(HamiltonianModel):
    """H = |p|^2 / 2 - cos(2 pi r): the classical value-periodic pendulum
    coupling, rescaled to unit period in the value slot."""

    family = "sine-gordon"

    def __init__(self, dim=1):
        super().__init__(dim)
        self._finalize()

    def H(self, y, r, p):
        p = _axes(p, self.dim)
        r = np.asarray(r, dtype=float)
        return 0.5 * _norm(p) ** 2 - np.cos(TWO_PI * r)

    def L(self, y, r, v):
        v = _axes(v, self.dim)
        r = np.asarray(r, dtype=float)
        return 0.5 * _norm(v) ** 2 + np.cos(TWO_PI * r)

    def dL_dr(self, y, r, v):
        r = np.asarray(r, dtype=float)
        return -TWO_PI * np.sin(TWO_PI * r)


class TransportDerived(HamiltonianModel):
    """H = |p|^2 - F(r) for a positive 1-periodic F; the constant-data
    solutions reduce to the oscillatory transport ODE."""

    family = "transport-derived"

    def __init__(self, F: PeriodicFunction | None = None, dim=1):
        super().__init__(dim)
        self.F = F if F is not None else PeriodicFunction("sine", 2.0, 1.0)
        self.params = {"F": self.F}
        self._finalize()

    def H(self, y, r, p):
        p = _axes(p, self.dim)
        r = np.asarray(r, dtype=float)
        return _norm(p) ** 2 - self.F(r)

    def L(self, y, r, v):
        # dual of |p|^2 is |v|^2/4
        v = _axes(v, self.dim)
        r = np.asarray(r, dtype=float)
        return 0.25 * _norm(v) ** 2 + self.F(r)

    def dL_dr(self, y, r, v):
        return self.F.derivative(np.asarray(r, dtype=float))


class Dislocation(HamiltonianModel):
    """Level-set Hamiltonian for interacting line defects with an obstacle
    field c(y) and the smoothed self-force r - invert(r):

        H = (c(y) - g(r)) |p|                     for |p| <= R
        H = |p|^2/2 - R^2/2 + (c(y) - g(r)) R     for |p| >  R

    with g = StaircaseSmoother.force. Convex and coercive when c > 1/2,
    since |g| <= 1/2 always (and < (1-delta)/(2 pi) for this smoother).
    """

    family = "dislocation"

    def __init__(self, c_field: PeriodicFunction, delta=0.25, radius=4.0, dim=1):
        super().__init__(dim)
        if not radius > 0:
            raise InvalidArgument("radius must be positive")
        self.c_field = c_field
        self.smoother = StaircaseSmoother(delta=delta)
        self.radius = float(radius)
        self.params = {"c": c_field, "delta": delta, "radius": radius}
        self._finalize(p_max=max(4.0, 1.5 * self.radius))

    def _coeff(self, y, r):
        y = _axes(y, self.dim)
        r = np.asarray(r, dtype=float)
        return self.c_field(y[0]) - np.asarray(self.smoother.force(r))

    def H(self, y, r, p):
        p = _axes(p, self.dim)
        a = self._coeff(y, r)
        pn = _norm(p)
        R = self.radius
        inner = a * pn
        outer = 0.5 * pn**2 - 0.5 * R**2 + a * R
        return np.where(pn <= R, inner, outer)

    def L(self, y, r, v):
        # piecewise dual: zero well of width a, then a linear rim up to
        # speed R, then the quadratic tail
        v = _axes(v, self.dim)
        a = self._coeff(y, r)
        vn = _norm(v)
        R = self.radius
        rim = np.maximum(0.0, R * (vn - a))
        tail = 0.5 * vn**2 + 0.5 * R**2 - a * R
        return np.where(vn <= R, rim, tail)


class CustomAnalytic(HamiltonianModel):
    """Escape hatch for tests: explicit callables for H and optionally L.

    h_fn / l_fn signatures: (y_tuple, r_array, p_tuple) -> array.
    """

    family = "custom-analytic"

    def __init__(self, h_fn, l_fn=None, dl_dr_fn=None, dim=1, q1=2, q2=2, even_in_p=True):
        super().__init__(dim)
        self._h = h_fn
        self._l = l_fn
        self._dl_dr = dl_dr_fn
        self.q1 = Fraction(q1)
        self.q2 = Fraction(q2)
        self.even_in_p = even_in_p
        self.has_analytic_dual = l_fn is not None
        self._finalize()

    def H(self, y, r, p):
        return self._h(_axes(y, self.dim), np.asarray(r, dtype=float), _axes(p, self.dim))

    def L(self, y, r, v):
        if self._l is None:
            return super().L(y, r, v)
        return self._l(_axes(y, self.dim), np.asarray(r, dtype=float), _axes(v, self.dim))

    def dL_dr(self, y, r, v):
        if self._dl_dr is not None:
            return self._dl_dr(_axes(y, self.dim), np.asarray(r, dtype=float), _axes(v, self.dim))
        raise ConfigurationError("no dL/dr supplied")


# ---------------------------------------------------------------------------
# public evaluation helpers


def _check_finite(*vals):
    for v in vals:
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("non-finite input")


def eval_H(model: HamiltonianModel, y, r, p) -> float:
    """Evaluate H(y, r, p); pure and deterministic."""
    _check_finite(y if not isinstance(y, tuple) else np.array(y), r, p if not isinstance(p, tuple) else np.array(p))
    out = np.asarray(model.H(y, r, p), dtype=float)
    return float(out) if out.shape == () else out


def eval_L(view: "LagrangianView", y, r, v) -> float:
    """Evaluate the Lagrangian through a view (analytic or tabulated)."""
    _check_finite(y if not isinstance(y, tuple) else np.array(y), r, v if not isinstance(v, tuple) else np.array(v))
    out = np.asarray(view.L(y, r, v), dtype=float)
    return float(out) if out.shape == () else out


@dataclass
class LagrangianView:
    """Access point for L(y, r, v).

    mode "analytic" delegates to the model's closed-form dual; mode
    "tabulated" maximizes v.p - H(y, r, p) over a momentum grid with one
    local quadratic refinement, and reports the grid-resolution error bound.
    """

    model: HamiltonianModel
    mode: str = "analytic"
    p_grid: Optional[np.ndarray] = None
    resolution_bound: float = 0.0

    def __post_init__(self):
        if self.mode == "analytic" and not self.model.has_analytic_dual:
            raise ConfigurationError("model has no closed-form dual; use tabulated mode")
        if self.mode == "tabulated":
            if self.p_grid is None or len(self.p_grid) == 0:
                raise ConfigurationError("tabulated Lagrangian view needs a non-empty momentum grid")
            self.p_grid = np.asarray(self.p_grid, dtype=float)
            step = float(np.max(np.diff(self.p_grid)))
            self.resolution_bound = step * step  # refined parabola residual scale

    @property
    def dim(self):
        return self.model.dim

    def L(self, y, r, v):
        if self.mode == "analytic":
            return self.model.L(y, r, v)
        return self._tabulated(y, r, v)

    def dL_dr(self, y, r, v):
        if self.mode == "analytic" and hasattr(self.model, "dL_dr"):
            return self.model.dL_dr(y, r, v)
        h = 1e-6
        return (np.asarray(self.L(y, np.asarray(r) + h, v)) - np.asarray(self.L(y, np.asarray(r) - h, v))) / (2 * h)

    def _tabulated(self, y, r, v):
        if self.model.dim != 1:
            raise ConfigurationError("tabulated duals are implemented for dimension 1")
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        y_arr = np.broadcast_to(np.asarray(_axes(y, 1)[0], dtype=float), v_arr.shape)
        r_arr = np.broadcast_to(np.asarray(r, dtype=float), v_arr.shape)
        ps = self.p_grid
        out = np.empty_like(v_arr)
        for i in np.ndindex(v_arr.shape):
            hv = np.asarray(self.model.H((np.full_like(ps, y_arr[i]),), np.full_like(ps, r_arr[i]), (ps,)))
            g = v_arr[i] * ps - hv
            j = int(np.argmax(g))
            best = g[j]
            if 0 < j < len(ps) - 1:
                best = _parabolic_peak(ps[j - 1 : j + 2], g[j - 1 : j + 2])
            out[i] = best
        return out if np.asarray(v, dtype=float).shape or isinstance(v, tuple) else float(out[0])


def lagrangian_view(model: HamiltonianModel, mode: Optional[str] = None, p_grid=None) -> LagrangianView:
    if mode is None:
        mode = "analytic" if model.has_analytic_dual else "tabulated"
    if mode == "tabulated" and p_grid is None:
        p_grid = np.linspace(-16.0, 16.0, 2049)
    return LagrangianView(model=model, mode=mode, p_grid=p_grid)


def _parabolic_peak(xs, gs):
    """Peak value of the parabola through three points (max refinement)."""
    x0, x1, x2 = xs
    g0, g1, g2 = gs
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    if denom == 0:
        return g1
    a = (x2 * (g1 - g0) + x1 * (g0 - g2) + x0 * (g2 - g1)) / denom
    b = (x2 * x2 * (g0 - g1) + x1 * x1 * (g2 - g0) + x0 * x0 * (g1 - g2)) / denom
    if a >= 0:
        return max(g0, g1, g2)
    xs_peak = -b / (2 * a)
    if xs_peak < min(xs) or xs_peak > max(xs):
        return max(g0, g1, g2)
    c = g1 - a * x1 * x1 - b * x1
    return a * xs_peak * xs_peak + b * xs_peak + c


def legendre_transform(xs, values, slopes):
    """Discrete Legendre-Fenchel transform of samples (xs, values).

    Returns (transformed values at `slopes`, attained flags). The discrete
    maximum is exact for the convex hull of the samples; one parabolic
    refinement sharpens smooth maxima. A slope whose maximizer sits on the
    boundary of the sample range is flagged unattained rather than rejected.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != values.shape:
        raise InvalidArgument("samples must be matching 1-d arrays")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(values))):
        raise InvalidArgument("non-finite samples")
    slopes = np.atleast_1d(np.asarray(slopes, dtype=float))
    out = np.empty_like(slopes)
    attained = np.empty(slopes.shape, dtype=bool)
    for i, p in enumerate(slopes):
        g = p * xs - values
        j = int(np.argmax(g))
        attained[i] = 0 < j < len(xs) - 1
        out[i] = _parabolic_peak(xs[j - 1 : j + 2], g[j - 1 : j + 2]) if attained[i] else g[j]
    return out, attained


# ---------------------------------------------------------------------------
# assumption verification


@dataclass
class CheckResult:
    name: str
    residual: float
    threshold: float
    passed: bool
    note: str = ""


@dataclass
class AssumptionReport:
    model_family: str
    checks: dict = field(default_factory=dict)
    k_estimate: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def add(self, name, residual, threshold, passed, note=""):
        self.checks[name] = CheckResult(name, float(residual), float(threshold), bool(passed), note)

    def summary(self) -> str:
        lines = [f"model {self.model_family}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks.values():
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: residual {c.residual:.3g} (tol {c.threshold:.3g}) {c.note}")
        return "\n".join(lines)


def verify_assumptions(model: HamiltonianModel, sample_budget=20000, tol=1e-9, seed=0) -> AssumptionReport:
    """Sample-based verification of periodicity, value-Lipschitzness,
    midpoint convexity, and the growth bounds; failures are report entries,
    never exceptions."""
    if sample_budget < 100:
        raise InvalidArgument("sample_budget must be at least 100")
    rng = np.random.default_rng(seed)
    rep = AssumptionReport(model_family=model.family, k_estimate=model.K)
    n = model.dim
    m = max(100, sample_budget // 5)
    p_max = max(4.0, 1.2 * getattr(model, "radius", 0.0))

    def rand_pt(count):
        return tuple(rng.uniform(-2, 2, count) for _ in range(n))

    def rand_mom(count, scale=p_max):
        return tuple(rng.uniform(-scale, scale, count) for _ in range(n))

    # periodicity in (y, r) under integer shifts
    y = rand_pt(m)
    r = rng.uniform(-2, 2, m)
    p = rand_mom(m)
    zshift = tuple(rng.integers(-3, 4, m).astype(float) for _ in range(n))
    sshift = rng.integers(-3, 4, m).astype(float)
    h0 = np.asarray(model.H(y, r, p))
    h1 = np.asarray(model.H(tuple(a + b for a, b in zip(y, zshift)), r + sshift, p))
    res = float(np.max(np.abs(h1 - h0)))
    rep.add("periodicity", res, max(tol, 1e-10), res <= max(tol, 1e-10))

    # K-Lipschitz continuity in the value slot
    s2 = rng.uniform(-2, 2, m)
    lhs = np.abs(np.asarray(model.H(y, r, p)) - np.asarray(model.H(y, s2, p)))
    slack = float(np.max(lhs - model.K * np.abs(r - s2)))
    rep.add("value-lipschitz", slack, tol, slack <= tol, note=f"K={model.K:.4g}")

    # midpoint convexity in p on sampled triples
    p2 = rand_mom(m)
    mid = tuple(0.5 * (a + b) for a, b in zip(p, p2))
    gap = np.asarray(model.H(y, r, mid)) - 0.5 * (np.asarray(model.H(y, r, p)) + np.asarray(model.H(y, r, p2)))
    worst = float(np.max(gap))
    rep.add("midpoint-convexity", worst, tol, worst <= tol)

    # growth bounds through the origin fiber
    ps = np.linspace(-p_max, p_max, 201)
    origin = (np.zeros_like(ps),) * n
    pt = (ps,) + (np.zeros_like(ps),) * (n - 1)
    h00 = np.asarray(model.H(origin, np.zeros_like(ps), pt))
    q1, q2, b0 = float(model.q1), float(model.q2), model.beta0
    upper = float(np.max(h00 - b0 * (np.abs(ps) ** q2 + 1.0)))
    lower = float(np.max((np.abs(ps) ** q1) / b0 - b0 - h00))
    rep.add("growth-upper", upper, tol, upper <= tol, note=f"q2={model.q2}, beta0={b0:.3g}")
    rep.add("growth-lower", lower, tol, lower <= tol, note=f"q1={model.q1}")

    # uniform oscillation against the origin fiber
    osc = np.abs(np.asarray(model.H(y, r, p)) - np.asarray(model.H((np.zeros(m),) * n, np.zeros(m), p)))
    worst = float(np.max(osc - model.alpha0))
    rep.add("uniform-oscillation", worst, tol, worst <= tol, note=f"alpha0={model.alpha0:.4g}")

    # family-specific coercivity certificate for the dislocation model:
    # the worst-case self force has magnitude 1/2, so min c > 1/2 is the
    # convex-coercive margin
    if isinstance(model, Dislocation):
        ys = np.linspace(0, 1, 4096, endpoint=False)
        cmin = float(np.min(model.c_field(ys)))
        margin = cmin - 0.5
        rep.add("convex-coercive", -margin, 0.0, margin > 0.0, note=f"min c = {cmin:.4g}, needs > 1/2")
        # Lipschitz estimate stays below the crude radius * (1 + 1/delta) cap
        cap = model.radius * (1.0 + 1.0 / model.smoother.delta)
        rep.add("value-lipschitz-cap", model.K - cap, 0.0, model.K <= cap, note=f"K={model.K:.4g} <= {cap:.4g}")
    return rep


def build_dislocation(c_field: PeriodicFunction, delta: float, radius: float, dim=1, enforce=True) -> Dislocation:
    """Construct the dislocation model, checking min c > 1/2 and continuity
    of the two momentum branches across |p| = radius."""
    if not 0.0 < delta < 1.0:
        raise InvalidArgument("delta must lie in (0, 1)")
    ys = np.linspace(0, 1, 4096, endpoint=False)
    cmin = float(np.min(c_field(ys)))
    if enforce and cmin <= 0.5:
        raise InvalidArgument(
            f"obstacle field fails coercivity: min c = {cmin:.4g} <= 1/2, so the "
            "growth bounds cannot hold (the self force reaches magnitude 1/2)"
        )
    model = Dislocation(c_field, delta=delta, radius=radius, dim=dim)
    # seam check at |p| = radius from both branches
    rs = np.linspace(0, 1, 64, endpoint=False)
    a = model._coeff((ys[:64],), rs)
    inner = a * radius
    outer = 0.5 * radius**2 - 0.5 * radius**2 + a * radius
    if float(np.max(np.abs(inner - outer))) > 1e-9:
        raise ArithmeticError("momentum branches disagree at the seam")
    return model


# ---------------------------------------------------------------------------
# zoo


def _zoo_builders():
    return {
        "quadratic-free": lambda dim=1, **kw: QuadraticFree(dim=dim),
        "quadratic-potential": lambda dim=1, amplitude=1.0, **kw: QuadraticPotential(
            PeriodicFunction("cosine", 0.0, amplitude), dim=dim
        ),
        "sine-gordon": lambda dim=1, **kw: SineGordon(dim=dim),
        "dislocation": lambda dim=1, delta=0.25, radius=4.0, c_offset=0.75, c_amplitude=0.2, **kw: build_dislocation(
            PeriodicFunction("cosine", c_offset, c_amplitude), delta, radius, dim=dim
        ),
        "transport-derived": lambda dim=1, offset=2.0, amplitude=1.0, **kw: TransportDerived(
            PeriodicFunction("sine", offset, amplitude), dim=dim
        ),
    }


MODEL_ZOO = tuple(sorted(_zoo_builders().keys()))


def make_model(name: str, dim=1, **params) -> HamiltonianModel:
    builders = _zoo_builders()
    if name not in builders:
        raise ConfigurationError(f"unknown model {name!r}; available: {', '.join(MODEL_ZOO)}")
    return builders[name](dim=dim, **params)


def zoo_models(dim=1):
    """Fresh default instances of every built-in family."""
    return {name: make_model(name, dim=dim) for name in MODEL_ZOO}
