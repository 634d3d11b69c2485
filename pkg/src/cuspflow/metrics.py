"""Conformal metric models on the upper half-plane.

Two metrics share one interface: the hyperbolic metric |dz|/y and the
Weil-Petersson model surrogate.  The surrogate is exactly the cusp model
y^{-3/2}|dz| wherever the invariant height equals y (in particular on the
whole region y >= 1) and is extended to the rest of the plane by
PSL(2,Z)-equivariance, which makes every quantity derived from it
invariant under the group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .modular import invariant_height, reduce_point

__all__ = [
    "MetricId",
    "MetricParams",
    "conformal_factor",
    "conformal_log_gradient",
    "delta_to_cusp",
    "wp_horocycle_height",
    "geodesic_rhs",
    "unit_speed_velocity",
]

TWO_PI = 2.0 * math.pi


class MetricId(Enum):
    HYPERBOLIC = "hyp"
    WP_MODEL = "wp"

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        for m in cls:
            if text in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown metric {text!r} (expected 'hyp' or 'wp')")


@dataclass(frozen=True)
class MetricParams:
    """Family parameters: horoball height h > 1, cusp floor y0 = 1."""

    h: float = 1.05
    y0: float = 1.0

    def __post_init__(self):
        if not self.h > self.y0:
            raise ValueError(f"horoball height {self.h} must exceed the cusp floor {self.y0}")
        if self.y0 != 1.0:
            raise ValueError("the model form is pinned to cusp floor y0 = 1")


DEFAULT_PARAMS = MetricParams()


def conformal_factor(metric, z):
    """Line-element factor F with ds = F(z)|dz|.

    HYPERBOLIC: 1/y.  WP_MODEL: H(z)^{-1/2}/y with H the invariant height;
    equals y^{-3/2} whenever z is its own fundamental-domain representative,
    and satisfies F(gz)|g'(z)| = F(z) for every group element g.
    """
    z = complex(z)
    if metric is MetricId.HYPERBOLIC:
        return 1.0 / z.imag
    return 1.0 / (z.imag * math.sqrt(invariant_height(z)))


def delta_to_cusp(z):
    """First-order Weil-Petersson distance to the cusp: sqrt(2*pi/H(z))."""
    return math.sqrt(TWO_PI / invariant_height(z))


def wp_horocycle_height(B):
    """Height of the horocycle at cusp distance B: h = 2*pi/B^2.

    Requires 0 < B < sqrt(2*pi) so the height exceeds 1.
    """
    if not 0.0 < B < math.sqrt(TWO_PI):
        raise ValueError(f"cusp distance must lie in (0, sqrt(2*pi)) (got {B})")
    return TWO_PI / (B * B)


def conformal_log_gradient(metric, z):
    """Gradient of log F at z, taken on the smooth piece through z.

    For the surrogate the factor is piecewise smooth: with g = (a,b,c,d)
    the reducing element, H = y/Q for Q = (cx+d)^2 + (cy)^2, and

        dH/dx = -2cy(cx+d)/Q^2,   dH/dy = ((cx+d)^2 - (cy)^2)/Q^2.
    """
    z = complex(z)
    x, y = z.real, z.imag
    if metric is MetricId.HYPERBOLIC:
        return 0.0, -1.0 / y
    _, g = reduce_point(z)
    c, d = g.c, g.d
    if c == 0:
        # strip piece: H = y, so log F = -(3/2) log y
        return 0.0, -1.5 / y
    u = c * x + d
    w = c * y
    q = u * u + w * w
    hval = y / q
    hx = -2.0 * c * y * u / (q * q)
    hy = (u * u - w * w) / (q * q)
    return -0.5 * hx / hval, -0.5 * hy / hval - 1.0 / y


def geodesic_rhs(metric, state):
    """Right-hand side of the geodesic equations in arc-length time.

    ``state`` is (x, y, vx, vy); returns (vx, vy, ax, ay) with

        ax = -px*(vx^2 - vy^2) - 2*py*vx*vy
        ay =  py*(vx^2 - vy^2) - 2*px*vx*vy

    where (px, py) is the gradient of log F.  On the region where
    F = y^{-k/2} this reduces to ax = (k/y) vx vy, ay = (k/(2y))(vy^2-vx^2)
    with k = 2 (hyperbolic) and k = 3 (model cusp region).
    """
    x, y, vx, vy = state
    px, py = conformal_log_gradient(metric, complex(x, y))
    diff = vx * vx - vy * vy
    ax = -px * diff - 2.0 * py * vx * vy
    ay = py * diff - 2.0 * px * vx * vy
    return vx, vy, ax, ay


def unit_speed_velocity(metric, z, angle):
    """Velocity of metric speed one at z pointing along the Euclidean angle."""
    f = conformal_factor(metric, z)
    return math.cos(angle) / f, math.sin(angle) / f
