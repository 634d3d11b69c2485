"""Exact arithmetic of PSL(2,Z) acting on the upper half-plane.

Group elements are integer 2x2 matrices modulo +-I.  Points of the upper
half-plane are Python complex numbers with positive imaginary part.  The
reduction algorithm (alternating integer shifts and inversions) supplies
the fundamental-domain representative, the invariant height and the cusp
label of any horoball, all with exact integer matrix bookkeeping.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "GroupElement",
    "Cusp",
    "HoroballDescriptor",
    "ReductionError",
    "IDENTITY",
    "SHIFT",
    "INVERSION",
    "apply_mobius",
    "mobius_derivative",
    "reduce_point",
    "invariant_height",
    "cusp_of",
    "horoball_at",
    "farey_neighbors",
]

REDUCE_CAP = 10 ** 6


class ReductionError(RuntimeError):
    """Reduction did not stabilize within the iteration cap.

    Signals numerically degenerate input (points exponentially close to
    the real axis); carries the partial result reached so far.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def _canonical_sign(a, b, c, d):
    for entry in (a, b, c, d):
        if entry > 0:
            return a, b, c, d
        if entry < 0:
            return -a, -b, -c, -d
    raise ValueError("zero matrix is not a group element")


class GroupElement:
    """An element of PSL(2,Z): integer matrix [[a,b],[c,d]] with ad-bc=1.

    The representative is normalized so the first nonzero entry of
    (a, b, c, d) is positive.
    """

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        a, b, c, d = int(a), int(b), int(c), int(d)
        if a * d - b * c != 1:
            raise ValueError(f"determinant is {a * d - b * c}, expected 1")
        a, b, c, d = _canonical_sign(a, b, c, d)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("GroupElement is immutable")

    def __repr__(self):
        return f"GroupElement({self.a}, {self.b}, {self.c}, {self.d})"

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return (self.a, self.b, self.c, self.d) == (other.a, other.b, other.c, other.d)

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    def __matmul__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self):
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def entries(self):
        return self.a, self.b, self.c, self.d

    @classmethod
    def shift(cls, n):
        """Translation z -> z + n."""
        return cls(1, int(n), 0, 1)

    def __call__(self, z):
        return apply_mobius(self, z)


IDENTITY = GroupElement(1, 0, 0, 1)
SHIFT = GroupElement(1, 1, 0, 1)
INVERSION = GroupElement(0, -1, 1, 0)


@dataclass(frozen=True, order=True)
class Cusp:
    """A cusp of the modular surface: a reduced fraction p/q, or infinity (q=0)."""

    p: int
    q: int

    def __post_init__(self):
        p, q = int(self.p), int(self.q)
        if q == 0:
            if p == 0:
                raise ValueError("0/0 is not a cusp")
            p = 1
        else:
            g = math.gcd(p, q)
            if q < 0:
                g = -g
            p //= g
            q //= g
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def is_infinity(self):
        return self.q == 0

    def value(self):
        """The cusp as a Fraction; raises for infinity."""
        if self.is_infinity:
            raise ZeroDivisionError("cusp at infinity has no finite value")
        return Fraction(self.p, self.q)

    def __repr__(self):
        return "Cusp(oo)" if self.is_infinity else f"Cusp({self.p}/{self.q})"


def _as_complex(z):
    z = complex(z)
    if not z.imag > 0:
        raise ValueError(f"point {z} is not in the upper half-plane")
    return z


def apply_mobius(g, z):
    """Apply z -> (az+b)/(cz+d).  Preserves the upper half-plane."""
    z = _as_complex(z)
    num = g.a * z + g.b
    den = g.c * z + g.d
    return num / den


def mobius_derivative(g, z):
    """d/dz of the Mobius action: 1/(cz+d)^2 (complex)."""
    z = complex(z)
    den = g.c * z + g.d
    return 1.0 / (den * den)


# The inversion step fires only while |z|^2 is strictly below 1; the guard
# keeps points that straddle the unit-circle wall to machine precision from
# cycling forever between the two boundary representatives.
_BOUNDARY_GUARD = 1.0 - 1e-15


def reduce_point(z, cap=REDUCE_CAP):
    """Fundamental-domain representative of z.

    Returns ``(zstar, g)`` with ``g(z) = zstar``, ``|Re zstar| <= 1/2`` and
    ``|zstar| >= 1`` (up to a machine-precision guard at the unit circle).
    The imaginary part of ``zstar`` is maximal over the whole orbit.
    """
    z = _as_complex(z)
    x, y = z.real, z.imag
    a, b, c, d = 1, 0, 0, 1
    for _ in range(cap):
        n = math.floor(x + 0.5)
        if n != 0:
            x -= n
            a -= n * c
            b -= n * d
        r2 = x * x + y * y
        if r2 < _BOUNDARY_GUARD:
            # z -> -1/z
            x, y = -x / r2, y / r2
            a, b, c, d = -c, -d, a, b
        else:
            a, b, c, d = _canonical_sign(a, b, c, d)
            return complex(x, y), GroupElement(a, b, c, d)
    raise ReductionError(
        f"reduction did not stabilize within {cap} iterations",
        partial=(complex(x, y), (a, b, c, d)),
    )


def invariant_height(z, cap=REDUCE_CAP):
    """Maximal imaginary part over the PSL(2,Z)-orbit of z.

    Continuous and invariant; the horoball family {height > h} realizes
    the invariant cusp neighbourhoods.
    """
    z = _as_complex(z)
    if z.imag >= 1.0:
        # For y >= 1 no other orbit point is higher: Im(gz) = y/|cz+d|^2
        # <= 1/y <= 1 whenever c != 0.
        return z.imag
    return reduce_point(z, cap=cap)[0].imag


def cusp_of(g):
    """The cusp g^{-1}(infinity) = -d/c, in lowest terms; infinity when c = 0."""
    if g.c == 0:
        return Cusp(1, 0)
    return Cusp(-g.d, g.c)


@dataclass(frozen=True)
class HoroballDescriptor:
    """A horoball of the invariant family at height h.

    At infinity this is the half-plane {y > height}; at a finite cusp p/q
    it is the Euclidean disk tangent to the real axis at p/q with diameter
    1/(q^2 h).
    """

    cusp: Cusp
    height: float

    @property
    def is_half_plane(self):
        return self.cusp.is_infinity

    @property
    def diameter(self):
        if self.is_half_plane:
            return math.inf
        return 1.0 / (self.cusp.q ** 2 * self.height)

    @property
    def center(self):
        """Euclidean center of the disk form (raises for the half-plane)."""
        if self.is_half_plane:
            raise ValueError("half-plane horoball has no disk center")
        return complex(self.cusp.p / self.cusp.q, self.diameter / 2.0)

    def contains(self, z):
        z = complex(z)
        if self.is_half_plane:
            return z.imag > self.height
        return abs(z - self.center) < self.diameter / 2.0


def horoball_at(cusp, h):
    """Descriptor of the horoball at ``cusp`` for family height ``h`` (> 1).

    Heights at or below 1 are rejected: the family would fail to be
    pairwise disjoint.
    """
    if not h > 1.0:
        raise ValueError(f"horoball height must exceed 1 (got {h})")
    if not isinstance(cusp, Cusp):
        cusp = Cusp(*cusp)
    return HoroballDescriptor(cusp, float(h))


def farey_neighbors(c1, c2):
    """True iff the two cusps are joined by an edge of the Farey tessellation."""
    if not isinstance(c1, Cusp):
        c1 = Cusp(*c1)
    if not isinstance(c2, Cusp):
        c2 = Cusp(*c2)
    return abs(c1.p * c2.q - c2.p * c1.q) == 1


def random_group_element(rng, word_length=12):
    """Random element as a word in the generators (for tests and sampling)."""
    g = IDENTITY
    for _ in range(word_length):
        if rng.random() < 0.5:
            g = g @ SHIFT if rng.random() < 0.5 else g @ SHIFT.inverse()
        else:
            g = g @ INVERSION
    return g


def hyperbolic_distance(z1, z2):
    """Ambient hyperbolic distance on the upper half-plane."""
    z1, z2 = complex(z1), complex(z2)
    d2 = (z1.real - z2.real) ** 2 + (z1.imag - z2.imag) ** 2
    u = d2 / (2.0 * z1.imag * z2.imag)
    # acosh(1+u), stable for both tiny and huge u
    if u > 1e8:
        return math.log(2.0 * u + 2.0)
    return math.log1p(u + math.sqrt(u * (u + 2.0)))
