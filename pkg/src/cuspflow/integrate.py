"""Geodesic integration and two-point geodesic solving.

`integrate_ray` drives the kernel (compiled or pure-Python) and wraps its
output in a `Trajectory`, which keeps samples in locally well-conditioned
coordinates together with the exact integer frame changes needed to
reconstruct base-frame positions.

`connect` solves the two-point problem.  The hyperbolic side delegates to
the closed form.  The model-metric side uses shooting over the initial
angle, seeded by the hyperbolic segment's angle: plain bisection on the
signed miss for short segments, and a multiple-shooting Newton solver for
long ones, where the endpoint's exponential sensitivity to the angle
exceeds what double precision can resolve in a single shot.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .geodesics import HyperbolicArc, hyperbolic_closed_form
from .metrics import DEFAULT_PARAMS, MetricId, MetricParams, conformal_factor
from .modular import (GroupElement, IDENTITY, apply_mobius, hyperbolic_distance,
                      mobius_derivative, reduce_point)

__all__ = [
    "Trajectory",
    "GeodesicState",
    "SegmentBV",
    "IntegrationError",
    "ConnectError",
    "integrate_ray",
    "connect",
]

_METRIC_CODE = {MetricId.HYPERBOLIC: K.METRIC_HYP, MetricId.WP_MODEL: K.METRIC_WP}

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-12
DEFAULT_BV_TOL = 1e-6
SINGLE_SHOT_MAX_LENGTH = 6.0


class IntegrationError(RuntimeError):
    """Integration stopped before the requested time; carries the partial result."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConnectError(RuntimeError):
    """Two-point solve missed its residual target; carries the best segment."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class GeodesicState:
    """One sample of a trajectory in base-frame coordinates."""

    t: float
    z: complex
    v: complex


def _mat_to_float(g):
    return float(g.a), float(g.b), float(g.c), float(g.d)


def _apply_inverse_float(g, x, y, vx, vy):
    """Base-frame position/velocity of a local sample under frame g."""
    a, b, c, d = _mat_to_float(g.inverse())
    den = complex(c * x + d, c * y)
    z = complex(a * x + b, a * y) / den
    dv = 1.0 / (den * den)
    v = complex(vx, vy) * dv
    return z, v


class Trajectory:
    """Time-ordered geodesic samples with conserved-quantity audit fields.

    Samples are stored in per-chunk local frames; ``frame_segments`` lists
    ``(start_index, G)`` with exact integer ``G`` such that the base-frame
    position of sample i is ``G^{-1}(z_local[i])`` for the last segment
    with ``start_index <= i``.
    """

    def __init__(self, metric, params, t, x, y, vx, vy, height,
                 frame_segments, events, audit):
        self.metric = metric
        self.params = params
        self.t = np.asarray(t, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.vx = np.asarray(vx, dtype=float)
        self.vy = np.asarray(vy, dtype=float)
        self.height = np.asarray(height, dtype=float)
        self.frame_segments = frame_segments
        self.events = events
        self.audit = audit

    @classmethod
    def from_raw(cls, metric, params, raw, base_frame=IDENTITY, audit_extra=None):
        segments = []
        cum = base_frame
        pairs = list(zip(raw["chunk_idx"], raw["chunk_mat"]))
        pos = 0
        if not pairs or pairs[0][0] != 0:
            segments.append((0, cum))
        while pos < len(pairs):
            idx = pairs[pos][0]
            while pos < len(pairs) and pairs[pos][0] == idx:
                g = GroupElement(*pairs[pos][1])
                cum = g @ cum
                pos += 1
            segments.append((idx, cum))
        events = list(zip(raw["event_kind"], raw["event_idx"]))
        audit = {
            "status": raw["status"],
            "steps": raw["steps"],
            "rejected": raw["rejected"],
            "n_excursions": raw["n_excursions"],
            "max_step_drift": raw["max_step_drift"],
            "drift_rate": raw["drift_rate"],
            "px_drift": raw["px_drift"],
            "reached_time": raw["reached_time"],
        }
        if audit_extra:
            audit.update(audit_extra)
        return cls(metric, params, raw["t"], raw["x"], raw["y"], raw["vx"],
                   raw["vy"], raw["height"], segments, events, audit)

    def __len__(self):
        return len(self.t)

    @property
    def status(self):
        return self.audit["status"]

    @property
    def duration(self):
        return float(self.t[-1]) if len(self.t) else 0.0

    def frame_at(self, i):
        """Exact cumulative frame G for sample i (base = G^{-1} local)."""
        out = IDENTITY
        for start, g in self.frame_segments:
            if start > i:
                break
            out = g
        return out

    def base_positions(self):
        """Base-frame positions as a complex array (float precision).

        Frames with astronomically large entries (very long rays) produce
        non-finite values here; invariant per-sample data (height, times)
        is unaffected.
        """
        out = np.empty(len(self.t), dtype=complex)
        n = len(self.t)
        starts = [s for s, _ in self.frame_segments] + [n]
        for k in range(len(self.frame_segments)):
            s, g = self.frame_segments[k]
            e = starts[k + 1]
            if s >= e:
                continue
            ginv = g.inverse()
            if max(abs(v) for v in ginv.entries()) > 1e150:
                out[s:e] = complex(math.nan, math.nan)
                continue
            a, b, c, d = _mat_to_float(ginv)
            zloc = self.x[s:e] + 1j * self.y[s:e]
            out[s:e] = (a * zloc + b) / (c * zloc + d)
        return out

    def base_velocities(self):
        out = np.empty(len(self.t), dtype=complex)
        n = len(self.t)
        starts = [s for s, _ in self.frame_segments] + [n]
        for k in range(len(self.frame_segments)):
            s, g = self.frame_segments[k]
            e = starts[k + 1]
            if s >= e:
                continue
            ginv = g.inverse()
            if max(abs(v) for v in ginv.entries()) > 1e150:
                out[s:e] = complex(math.nan, math.nan)
                continue
            a, b, c, d = _mat_to_float(ginv)
            zloc = self.x[s:e] + 1j * self.y[s:e]
            den = c * zloc + d
            out[s:e] = (self.vx[s:e] + 1j * self.vy[s:e]) / (den * den)
        return out

    def state(self, i) -> GeodesicState:
        i = int(i)
        if i < 0:
            i += len(self.t)
        g = self.frame_at(i)
        z, v = _apply_inverse_float(g, self.x[i], self.y[i], self.vx[i], self.vy[i])
        return GeodesicState(float(self.t[i]), z, v)

    def endpoint(self) -> GeodesicState:
        return self.state(len(self.t) - 1)

    @property
    def recurrence_times(self):
        """Times of returns to the thick part (horoball exit events)."""
        return [float(self.t[i]) for kind, i in self.events if kind == K.EV_EXIT]

    def distance_from(self, p, i):
        """Ambient hyperbolic distance from base point p to sample i.

        Overflow-safe for huge frames: works through logarithms of the
        exact integer frame entries.
        """
        p = complex(p)
        g = self.frame_at(i)
        x, y = float(self.x[i]), float(self.y[i])
        a, b, c, d = g.entries()
        mx = max(abs(a), abs(b), abs(c), abs(d))
        if mx < 1e100:
            w = apply_mobius(g, p)
            return hyperbolic_distance(w, complex(x, y))
        # log-space: shift entries so floats stay finite; the Mobius image
        # is scale-invariant in the entries, Im w needs the exact det = 1.
        shift = max(0, mx.bit_length() - 60)
        af, bf = float(a >> shift) if shift else float(a), float(b >> shift) if shift else float(b)
        cf, df = float(c >> shift) if shift else float(c), float(d >> shift) if shift else float(d)
        den = complex(cf * p.real + df, cf * p.imag)
        q_s = abs(den) ** 2
        num = complex(af * p.real + bf, af * p.imag)
        re_w = (num * den.conjugate()).real / q_s
        # ln Im w = ln y0 - ln |c p + d|^2 (unscaled)
        ln_imw = math.log(p.imag) - (math.log(q_s) + 2.0 * shift * math.log(2.0))
        dx = re_w - x
        ln_u = math.log(dx * dx + y * y) - math.log(2.0 * y) - ln_imw
        if ln_u < 30.0:
            u = math.exp(ln_u)
            return math.log1p(u + math.sqrt(u * (u + 2.0)))
        return ln_u + math.log(2.0)


def integrate_ray(metric, start, angle, T, params=DEFAULT_PARAMS,
                  rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_excursions=None,
                  max_dt=0.1, allow_partial=False):
    """Integrate a unit-speed geodesic ray to arc length T.

    ``angle`` is the Euclidean direction angle of the initial velocity at
    ``start`` (radians; pi/2 points straight up).  Events and recurrence
    times are recorded against the horoball family at ``params.h``.
    Raises :class:`IntegrationError` when the kernel stops early (step
    underflow reports the deepest state reached) unless ``allow_partial``.
    """
    z0 = complex(start)
    if not z0.imag > 0:
        raise ValueError("start must lie in the upper half-plane")
    if not T > 0:
        raise ValueError("T must be positive")
    zstar, g0 = reduce_point(z0)
    dv = mobius_derivative(g0, z0)
    v0 = cmath.exp(1j * float(angle)) * dv
    raw = K.integrate_ray_raw(
        _METRIC_CODE[metric], zstar.real, zstar.imag, v0.real, v0.imag,
        float(T), rtol, atol, params.h,
        -1 if max_excursions is None else int(max_excursions),
        max_dt=max_dt,
    )
    traj = Trajectory.from_raw(metric, params, raw, base_frame=g0)
    if not allow_partial and raw["status"] in (K.ST_UNDERFLOW, K.ST_MAXSTEPS, K.ST_OVERFLOW):
        names = {K.ST_UNDERFLOW: "step-size underflow",
                 K.ST_MAXSTEPS: "step budget exhausted",
                 K.ST_OVERFLOW: "frame bookkeeping overflow"}
        raise IntegrationError(
            f"{names[raw['status']]} at t={raw['reached_time']:.6g} "
            f"(deepest height {max(raw['height']):.6g})", trajectory=traj)
    return traj


@dataclass
class SegmentBV:
    """Two-point geodesic segment with its solve diagnostics."""

    metric: MetricId
    p: complex
    q: complex
    trajectory: Trajectory
    residual: float
    method: str
    iterations: int = 0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


def _closest_approach(traj, q):
    """(index, distance) of the sample closest to q in ambient distance."""
    pos = traj.base_positions()
    finite = np.isfinite(pos.real)
    d2 = np.where(
        finite,
        ((pos.real - q.real) ** 2 + (pos.imag - q.imag) ** 2)
        / (2.0 * np.where(finite, pos.imag, 1.0) * q.imag),
        np.inf,
    )
    i = int(np.argmin(d2))
    u = float(d2[i])
    dist = math.log1p(u + math.sqrt(u * (u + 2.0))) if math.isfinite(u) else math.inf
    return i, dist, pos


def _signed_miss(traj, q):
    i, dist, pos = _closest_approach(traj, q)
    vel = traj.base_velocities()
    v = vel[i]
    dz = q - pos[i]
    cross = v.real * dz.imag - v.imag * dz.real
    return math.copysign(dist, cross if cross != 0.0 else 1.0), i, dist


def _wp_length_along(arc, n=64):
    """Model-metric length of a hyperbolic arc (trapezoid in arc length)."""
    pts = arc.sample(n)
    vals = [conformal_factor(MetricId.WP_MODEL, z) * z.imag for z in pts]
    ds = arc.length / n
    return ds * (0.5 * vals[0] + sum(vals[1:-1]) + 0.5 * vals[-1])


def _shoot_single(p, q, params, tol, rtol, atol, max_iter=90):
    """Angle bisection on the signed closest-approach miss (monotone)."""
    arc = hyperbolic_closed_form(p, q)
    seed = arc.initial_angle()
    budget = 1.6 * _wp_length_along(arc) + 2.0

    def miss(angle):
        traj = integrate_ray(MetricId.WP_MODEL, p, angle, budget, params,
                             rtol=rtol, atol=atol, allow_partial=True)
        return _signed_miss(traj, q), traj

    (m0, i0, d0), traj0 = miss(seed)
    best = (d0, seed, traj0, i0)
    width = 0.05
    lo = hi = seed
    mlo = mhi = m0
    for _ in range(24):
        lo, hi = seed - width, seed + width
        (mlo, _, dlo), tlo = miss(lo)
        (mhi, _, dhi), thi = miss(hi)
        if dlo < best[0]:
            best = (dlo, lo, tlo, _signed_miss(tlo, q)[1])
        if dhi < best[0]:
            best = (dhi, hi, thi, _signed_miss(thi, q)[1])
        if mlo == 0.0 or mhi == 0.0 or (mlo < 0.0) != (mhi < 0.0):
            break
        width *= 2.0
        if width > math.pi:
            break
    else:
        pass
    iters = 0
    if (mlo < 0.0) == (mhi < 0.0):
        return best, iters, False
    for iters in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        (mm, im, dm), tm = miss(mid)
        if dm < best[0]:
            best = (dm, mid, tm, im)
        if dm <= tol and hi - lo < 1e-13:
            break
        if (mm < 0.0) == (mlo < 0.0):
            lo, mlo = mid, mm
        else:
            hi, mhi = mid, mm
        if hi - lo < 5e-16 * max(1.0, abs(seed)):
            break
    d_best, angle_best, traj_best, i_best = best
    t_cut = float(traj_best.t[i_best])
    if t_cut <= 0.0:
        t_cut = float(traj_best.t[min(i_best + 1, len(traj_best) - 1)])
    final = integrate_ray(MetricId.WP_MODEL, p, angle_best, t_cut, params,
                          rtol=rtol, atol=atol, allow_partial=True)
    _, dist, _ = _closest_approach(final, q)
    resid = min(dist, hyperbolic_distance(final.endpoint().z, q))
    return (resid, angle_best, final, i_best), iters, resid <= tol


class _Segment:
    """One shooting segment of the multiple-shooting solver."""

    __slots__ = ("frame", "seed_local", "dir_angle", "normal", "tau")

    def __init__(self, frame, seed_local, dir_angle, tau):
        self.frame = frame
        self.seed_local = seed_local
        self.dir_angle = dir_angle
        self.normal = cmath.exp(1j * (dir_angle + 0.5 * math.pi))
        self.tau = tau


def _integrate_local(p_local, angle, tau, params, rtol, atol):
    """Endpoint (position, velocity) in the segment's own frame."""
    v0 = cmath.exp(1j * angle)
    raw = K.integrate_ray_raw(
        K.METRIC_WP, p_local.real, p_local.imag, v0.real, v0.imag,
        float(tau), rtol, atol, params.h, -1,
    )
    g = IDENTITY
    for m in raw["chunk_mat"]:
        g = GroupElement(*m) @ g
    z, v = _apply_inverse_float(g, raw["x"][-1], raw["y"][-1],
                                raw["vx"][-1], raw["vy"][-1])
    return z, v


def _shoot_multiple(p, q, params, tol, rtol, atol, spacing=1.0, max_iter=40):
    """Multiple-shooting Newton solve seeded by the hyperbolic segment.

    Unknowns per segment: initial angle and arc length; interior nodes may
    slide along a transversal section through the seed.  The matching
    conditions (position continuity, direction continuity) are solved by a
    damped Newton iteration with finite-difference sensitivities; every
    sub-segment is short, so each sensitivity is well conditioned.
    """
    arc = hyperbolic_closed_form(p, q)
    k = max(2, int(math.ceil(arc.length / spacing)))
    nodes = [arc.point_at(arc.length * i / k) for i in range(k + 1)]
    frames = [reduce_point(z)[1] for z in nodes]
    locs = [apply_mobius(frames[i], nodes[i]) for i in range(k + 1)]
    trans = []
    for i in range(k):
        m = frames[i + 1] @ frames[i].inverse()
        if max(abs(v) for v in m.entries()) > 1e12:
            raise ConnectError("waypoint frames too far apart")
        trans.append(m)
    segs = []
    for i in range(k):
        # seed direction and model-length of the i-th hyperbolic sub-arc
        sub = hyperbolic_closed_form(nodes[i], nodes[i + 1])
        ang_base = sub.initial_angle()
        dv = mobius_derivative(frames[i], nodes[i])
        ang_local = ang_base + cmath.phase(dv)
        tau = _wp_length_along(sub, n=12)
        segs.append(_Segment(frames[i], locs[i], ang_local, tau))

    n_unk = 3 * k - 1
    theta = np.array([s.dir_angle for s in segs])
    tau = np.array([s.tau for s in segs])
    slide = np.zeros(k - 1)

    def node_local(i):
        # node i in frame i; endpoints are pinned
        if i == 0 or i == k:
            return locs[i]
        return locs[i] + slide[i - 1] * segs[i].normal

    def wrap(a):
        return (a + math.pi) % (2.0 * math.pi) - math.pi

    def residual_and_ends(th, ta, sl):
        ends = []
        r = np.zeros(n_unk)
        for i in range(k):
            start = locs[i] if i == 0 else locs[i] + sl[i - 1] * segs[i].normal
            z_e, v_e = _integrate_local(start, th[i], ta[i], params, rtol, atol)
            # transport into frame i+1
            m = trans[i]
            a, b, c, d = _mat_to_float(m)
            den = c * z_e + d
            z_t = (a * z_e + b) / den
            v_t = v_e / (den * den)
            ends.append((z_t, v_t))
            target = locs[i + 1] if i + 1 == k else locs[i + 1] + sl[i] * segs[i + 1].normal
            r[3 * i] = z_t.real - target.real
            r[3 * i + 1] = z_t.imag - target.imag
            if i < k - 1:
                r[3 * i + 2] = wrap(cmath.phase(v_t) - th[i + 1])
        return r, ends

    r, ends = residual_and_ends(theta, tau, slide)
    norm = float(np.max(np.abs(r)))
    iters = 0
    for iters in range(1, max_iter + 1):
        if norm <= 0.2 * tol:
            break
        J = np.zeros((n_unk, n_unk))
        eps = 1e-7
        # columns: theta_i, tau_i for each segment; slide_i for interior nodes
        for i in range(k):
            rp, _ = residual_and_ends(_bump(theta, i, eps), tau, slide)
            J[:, i] = (rp - r) / eps
            rp, _ = residual_and_ends(theta, _bump(tau, i, eps), slide)
            J[:, k + i] = (rp - r) / eps
        for i in range(k - 1):
            rp, _ = residual_and_ends(theta, tau, _bump(slide, i, eps))
            J[:, 2 * k + i] = (rp - r) / eps
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        lam = 1.0
        improved = False
        for _ in range(8):
            th_n = theta + lam * step[:k]
            ta_n = np.maximum(tau + lam * step[k:2 * k], 1e-6)
            sl_n = slide + lam * step[2 * k:]
            r_n, ends_n = residual_and_ends(th_n, ta_n, sl_n)
            norm_n = float(np.max(np.abs(r_n)))
            if norm_n < norm * (1.0 - 0.2 * lam) or norm_n < 0.2 * tol:
                theta, tau, slide, r, ends, norm = th_n, ta_n, sl_n, r_n, ends_n, norm_n
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    return segs, theta, tau, slide, norm, iters, frames, trans, locs


def _bump(vec, i, eps):
    out = vec.copy()
    out[i] += eps
    return out


def _assemble(metric, p, q, params, segs, theta, tau, slide, frames, rtol, atol):
    """Integrate converged segments with full sampling and concatenate."""
    k = len(segs)
    ts = []
    xs = []
    ys = []
    vxs = []
    vys = []
    hs = []
    frame_segments = []
    events = []
    t_off = 0.0
    audit = {"status": K.ST_TIME, "steps": 0, "rejected": 0, "n_excursions": 0,
             "max_step_drift": 0.0, "drift_rate": 0.0, "px_drift": 0.0}
    drift_weight = 0.0
    for i in range(k):
        start = segs[i].seed_local if i == 0 else segs[i].seed_local + slide[i - 1] * segs[i].normal
        v0 = cmath.exp(1j * theta[i])
        raw = K.integrate_ray_raw(
            K.METRIC_WP, start.real, start.imag, v0.real, v0.imag,
            float(tau[i]), rtol, atol, params.h, -1,
        )
        skip = 1 if i > 0 else 0
        base = len(ts) - skip
        cum = frames[i]
        pairs = list(zip(raw["chunk_idx"], raw["chunk_mat"]))
        pos = 0
        if not pairs or pairs[0][0] != 0:
            frame_segments.append((max(base, 0), cum))
        while pos < len(pairs):
            idx = pairs[pos][0]
            while pos < len(pairs) and pairs[pos][0] == idx:
                cum = GroupElement(*pairs[pos][1]) @ cum
                pos += 1
            frame_segments.append((max(base + idx, 0), cum))
        ts.extend(t_off + t for t in raw["t"][skip:])
        xs.extend(raw["x"][skip:])
        ys.extend(raw["y"][skip:])
        vxs.extend(raw["vx"][skip:])
        vys.extend(raw["vy"][skip:])
        hs.extend(raw["height"][skip:])
        events.extend((kind, base + idx) for kind, idx in
                      zip(raw["event_kind"], raw["event_idx"]))
        t_off += raw["t"][-1]
        audit["steps"] += raw["steps"]
        audit["rejected"] += raw["rejected"]
        audit["n_excursions"] += raw["n_excursions"]
        audit["max_step_drift"] = max(audit["max_step_drift"], raw["max_step_drift"])
        audit["px_drift"] = max(audit["px_drift"], raw["px_drift"])
        drift_weight += raw["drift_rate"] * raw["reached_time"]
        if raw["status"] != K.ST_TIME:
            audit["status"] = raw["status"]
    audit["drift_rate"] = drift_weight / max(t_off, 1e-300)
    audit["reached_time"] = t_off
    # de-duplicate frame segments sharing a start index (keep the last)
    dedup = {}
    for s, g in frame_segments:
        dedup[s] = g
    frame_segments = sorted(dedup.items())
    return Trajectory(metric, params, ts, xs, ys, vxs, vys, hs,
                      frame_segments, events, audit)


def connect(metric, p, q, tol=DEFAULT_BV_TOL, params=DEFAULT_PARAMS,
            rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Geodesic segment from p to q in the given metric.

    Raises ValueError for p == q and :class:`ConnectError` (carrying the
    best attempt) when the residual target cannot be met.
    """
    p, q = complex(p), complex(q)
    if p == q:
        raise ValueError("degenerate segment: p == q")
    if metric is MetricId.HYPERBOLIC:
        arc = hyperbolic_closed_form(p, q)
        traj = integrate_ray(metric, p, arc.initial_angle(), arc.length,
                             params, rtol=rtol, atol=atol)
        resid = hyperbolic_distance(traj.endpoint().z, q)
        return SegmentBV(metric, p, q, traj, resid, "closed_form",
                         converged=resid <= max(tol, 1e-6))
    d = hyperbolic_distance(p, q)
    if d <= SINGLE_SHOT_MAX_LENGTH:
        (resid, angle, traj, _), iters, ok = _shoot_single(
            p, q, params, tol, rtol, atol)
        seg = SegmentBV(metric, p, q, traj, resid, "shooting", iters, ok,
                        {"angle": angle})
        if not ok:
            raise ConnectError(
                f"single shooting stalled at residual {resid:.3g}", best=seg)
        return seg
    segs, theta, tau, slide, norm, iters, frames, trans, locs = _shoot_multiple(
        p, q, params, tol, rtol, atol)
    traj = _assemble(metric, p, q, params, segs, theta, tau, slide, frames,
                     rtol, atol)
    resid = hyperbolic_distance(traj.endpoint().z, q)
    ok = resid <= tol
    seg = SegmentBV(metric, p, q, traj, resid, "multiple_shooting", iters, ok,
                    {"segments": len(segs), "match_norm": norm})
    if not ok:
        raise ConnectError(
            f"multiple shooting stalled at residual {resid:.3g}", best=seg)
    return seg
