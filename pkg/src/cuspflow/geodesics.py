"""Closed-form geodesic oracles.

Hyperbolic geodesics of the upper half-plane (vertical lines and
semicircles centred on the real axis) with exact lengths, arc-length
parametrization and point-to-arc distances; and the quadrature of a cusp
excursion in the pure model metric (dx^2+dy^2)/y^3, whose conserved
horizontal momentum gives the excursion profile in closed integral form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .modular import hyperbolic_distance

__all__ = [
    "HyperbolicArc",
    "hyperbolic_closed_form",
    "distance_to_geodesic",
    "ModelExcursion",
    "model_quadrature",
]

_VERTICAL_TOL = 1e-13


@dataclass(frozen=True)
class HyperbolicArc:
    """Oriented hyperbolic geodesic segment from p to q.

    Either a vertical segment (`center` is the common x, `radius` is inf)
    or an arc of the semicircle |z - center| = radius.  Arc-length
    parametrization runs from 0 at p to `length` at q.
    """

    p: complex
    q: complex
    center: float
    radius: float
    length: float

    @property
    def vertical(self):
        return math.isinf(self.radius)

    def point_at(self, s):
        """Point at arc length s from p (s may lie outside [0, length])."""
        if self.vertical:
            sgn = 1.0 if self.q.imag > self.p.imag else -1.0
            return complex(self.p.real, self.p.imag * math.exp(sgn * s))
        # along the circle, arclength(phi) = log tan(phi/2); phi in (0, pi)
        u0 = self._logtan(self.p)
        u1 = self._logtan(self.q)
        sgn = 1.0 if u1 > u0 else -1.0
        u = u0 + sgn * s
        phi = 2.0 * math.atan(math.exp(u))
        return complex(self.center + self.radius * math.cos(phi),
                       self.radius * math.sin(phi))

    def _logtan(self, z):
        phi = math.atan2(z.imag, z.real - self.center)
        return math.log(math.tan(0.5 * phi))

    def initial_angle(self):
        """Euclidean angle of the unit tangent at p pointing toward q."""
        if self.vertical:
            return 0.5 * math.pi if self.q.imag > self.p.imag else -0.5 * math.pi
        u0 = self._logtan(self.p)
        u1 = self._logtan(self.q)
        # tangent along increasing phi is i*(z - center); flip for decreasing
        tang = 1j * (self.p - complex(self.center, 0.0))
        if u1 < u0:
            tang = -tang
        return math.atan2(tang.imag, tang.real)

    def apex_height(self):
        """Largest imaginary part on the full geodesic through p, q."""
        return math.inf if self.vertical else self.radius

    def sample(self, n):
        """n+1 points uniformly spaced in arc length from p to q."""
        return [self.point_at(s) for s in np.linspace(0.0, self.length, n + 1)]


def hyperbolic_closed_form(p, q):
    """Exact hyperbolic geodesic segment between distinct points p and q."""
    p, q = complex(p), complex(q)
    if p.imag <= 0.0 or q.imag <= 0.0:
        raise ValueError("both endpoints must lie in the upper half-plane")
    if p == q:
        raise ValueError("degenerate segment: p == q")
    length = hyperbolic_distance(p, q)
    if abs(p.real - q.real) <= _VERTICAL_TOL * max(1.0, abs(p.real)):
        return HyperbolicArc(p, q, p.real, math.inf, length)
    # center on the real axis equidistant (Euclidean) from p and q
    c = (abs(q) ** 2 - abs(p) ** 2) / (2.0 * (q.real - p.real))
    r = abs(p - c)
    return HyperbolicArc(p, q, c, r, length)


def distance_to_geodesic(z, arc, clamp=True):
    """Hyperbolic distance from z to the arc (or to its full geodesic).

    With ``clamp`` the distance is taken to the segment: if the closest
    point of the full geodesic falls outside the arc, the nearer endpoint
    is used.
    """
    z = complex(z)
    if arc.vertical:
        # distance to the vertical line x = c: cosh d = |z - c|_e / y scaled
        dx = z.real - arc.center
        s = math.hypot(dx, z.imag) / z.imag
        dist = math.acosh(max(s, 1.0))
        if clamp:
            foot = complex(arc.center, math.hypot(dx, z.imag))
            lo, hi = sorted((arc.p.imag, arc.q.imag))
            if not lo <= foot.imag <= hi:
                return min(hyperbolic_distance(z, arc.p), hyperbolic_distance(z, arc.q))
        return dist
    # map the circle's feet (c - r, c + r) to (inf, 0): w = (z-b)/(z-a)
    a = arc.center - arc.radius
    b = arc.center + arc.radius
    w = (z - b) / (z - a)
    s = abs(w) / w.imag if w.imag > 0 else math.inf
    dist = math.acosh(max(s, 1.0))
    if clamp:
        pa = (arc.p - b) / (arc.p - a)
        qa = (arc.q - b) / (arc.q - a)
        # on the image line, the foot of z is at radius |w|; the arc spans [|pa|, |qa|]
        lo, hi = sorted((abs(pa), abs(qa)))
        if not lo <= abs(w) <= hi:
            return min(hyperbolic_distance(z, arc.p), hyperbolic_distance(z, arc.q))
    return dist


@dataclass(frozen=True)
class ModelExcursion:
    """Ingoing half of a cusp excursion of the pure model metric.

    Entry at (0, 1) with horizontal momentum p_x; apex at y_max =
    p_x^(-2/3).  ``xs``/``ys`` tabulate the profile x(y) on the ingoing
    half; the outgoing half is its mirror image.
    """

    px: float
    y_max: float
    ys: np.ndarray
    xs: np.ndarray

    def x_of_y(self, y):
        return _model_x_of_y(self.px, self.y_max, y)

    def y_of_x(self, x):
        """Invert the (strictly monotone) ingoing profile by bisection."""
        if x <= 0.0:
            return 1.0
        x_top = _model_x_of_y(self.px, self.y_max, self.y_max)
        if x >= x_top:
            return self.y_max
        lo, hi = 1.0, self.y_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _model_x_of_y(self.px, self.y_max, mid) < x:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * hi:
                break
        return 0.5 * (lo + hi)

    def midrange_slope(self, y_lo=None, y_hi=None):
        """Log-log slope of y against x over a mid-range window."""
        if y_lo is None:
            y_lo = self.y_max ** 0.25
        if y_hi is None:
            y_hi = self.y_max ** 0.75
        grid = np.geomspace(y_lo, y_hi, 40)
        xs = np.array([self.x_of_y(y) for y in grid])
        slope, intercept = np.polyfit(np.log(xs), np.log(grid), 1)
        return slope, math.exp(intercept)


def _model_x_of_y(px, y_max, y):
    """x(y) = int_1^y px s^{3/2} / sqrt(1 - px^2 s^3) ds.

    Computed with the substitution s = y_max (1 - u^2), which removes the
    square-root singularity at the apex:

        x = 2 px y_max^{5/2} int (1-u^2)^{3/2} / sqrt(3 - 3u^2 + u^4) du.
    """
    if not 1.0 <= y <= y_max:
        raise ValueError(f"y must lie in [1, y_max] (got {y}, y_max={y_max})")
    u_hi = math.sqrt(max(0.0, 1.0 - 1.0 / y_max))
    u_lo = math.sqrt(max(0.0, 1.0 - y / y_max))

    def integrand(u):
        w = 1.0 - u * u
        return w * math.sqrt(w) / math.sqrt(3.0 - 3.0 * u * u + u ** 4)

    val, _ = quad(integrand, u_lo, u_hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * px * y_max ** 2.5 * val


def model_quadrature(px, n_samples=200):
    """Excursion profile of the model metric for horizontal momentum p_x.

    Requires 0 < p_x < 1 (so the apex lies above the entry height 1).
    Returns a :class:`ModelExcursion` with y_max = p_x^(-2/3) and the
    sampled ingoing profile; for 1 << y << y_max the profile follows
    x(y) ~ (2/5) p_x y^{5/2}.
    """
    if not 0.0 < px < 1.0:
        raise ValueError(f"horizontal momentum must lie in (0, 1) (got {px})")
    y_max = px ** (-2.0 / 3.0)
    ys = np.geomspace(1.0, y_max, n_samples)
    xs = np.array([_model_x_of_y(px, y_max, y) for y in ys])
    return ModelExcursion(px=px, y_max=y_max, ys=ys, xs=xs)
