"""Pure-Python geodesic integration kernel.

Reference implementation of the hot loop; `cuspflow._kernels._core` is a
compiled twin with identical arithmetic (same operations in the same
order), selected at import time by `cuspflow._kernels`.

The integrator is an adaptive Dormand-Prince 5(4) scheme in arc-length
time on the state (x, y, vx, vy).  Three kinds of events force step
endpoints and are recorded against sample indices:

* horoball boundary crossings (invariant height through h), which open
  and close cusp excursions,
* the apex of an excursion (vy = 0), where the depth is read off,
* crossings of the non-smooth wall of the equivariant factor (the
  reducing element changes beyond a translation), so every accepted step
  integrates a single smooth piece.

To keep coordinates well conditioned forever, the kernel re-expresses the
state in a new PSL(2,Z)-frame at excursion entry (cusp moved to infinity),
at excursion exit, and whenever the thick flow drifts; each change is
emitted as an integer matrix chunk so callers can reconstruct base-frame
coordinates exactly.
"""

import math

__all__ = ["BACKEND_NAME", "local_reduce", "integrate_ray_raw"]

BACKEND_NAME = "python"

# metric codes
METRIC_HYP = 0
METRIC_WP = 1

# event kinds
EV_ENTER = 1
EV_APEX = 2
EV_EXIT = 3
EV_CUT = 4

# status codes
ST_TIME = 0
ST_EXCURSIONS = 1
ST_UNDERFLOW = 2
ST_MAXSTEPS = 3
ST_OVERFLOW = 4

_GUARD = 1.0 - 1e-15          # unit-circle guard in the reduction loop
_ENTRY_LIMIT = 4.5e15         # matrix entries stay exactly representable
_REDUCE_CAP = 1000000

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def local_reduce(x, y, cap=_REDUCE_CAP):
    """Fundamental-domain reduction with bounded integer bookkeeping.

    Returns (xstar, ystar, a, b, c, d) with g(x+iy) = xstar + i*ystar.
    Raises OverflowError when matrix entries leave the exactly
    representable range, ValueError on a non-terminating reduction.
    """
    a, b, c, d = 1, 0, 0, 1
    for _ in range(cap):
        n = math.floor(x + 0.5)
        if abs(n) > _ENTRY_LIMIT:
            raise OverflowError("reduction matrix entries out of range")
        if n != 0:
            x -= n
            a -= n * c
            b -= n * d
            if abs(a) > _ENTRY_LIMIT or abs(b) > _ENTRY_LIMIT:
                raise OverflowError("reduction matrix entries out of range")
        r2 = x * x + y * y
        if r2 < _GUARD:
            x = -x / r2
            y = y / r2
            a, b, c, d = -c, -d, a, b
        else:
            return x, y, a, b, c, d
    raise ValueError("fundamental-domain reduction did not stabilize")


def _apply_frame(a, b, c, d, x, y, vx, vy):
    """Mobius action on position and velocity, in explicit real arithmetic.

    The imaginary part uses the exact det = 1 identity Im(gz) = y/|cz+d|^2,
    which avoids the cancellation of the naive formula.
    """
    dr = c * x + d
    di = c * y
    q = dr * dr + di * di
    nx = ((a * x + b) * dr + (a * y) * di) / q
    ny = y / q
    wre = dr * dr - di * di
    wim = 2.0 * dr * di
    q2 = q * q
    nvx = (vx * wre + vy * wim) / q2
    nvy = (vy * wre - vx * wim) / q2
    return nx, ny, nvx, nvy


def _rhs(x, y, vx, vy, metric, frc, frd):
    """Geodesic acceleration on the smooth piece with reducing row (frc, frd)."""
    if metric == METRIC_HYP:
        px = 0.0
        py = -1.0 / y
    elif frc == 0.0:
        px = 0.0
        py = -1.5 / y
    else:
        u = frc * x + frd
        w = frc * y
        q = u * u + w * w
        q2 = q * q
        hval = y / q
        hx = -2.0 * frc * y * u / q2
        hy = (u * u - w * w) / q2
        px = -0.5 * hx / hval
        py = -0.5 * hy / hval - 1.0 / y
    diff = vx * vx - vy * vy
    ax = -px * diff - 2.0 * py * vx * vy
    ay = py * diff - 2.0 * px * vx * vy
    return ax, ay


def _dp_step(x, y, vx, vy, dt, metric, frc, frd):
    """One Dormand-Prince step.  Returns the new state and the error estimate."""
    a1x, a1y = _rhs(x, y, vx, vy, metric, frc, frd)

    x2 = x + dt * (_A21 * vx)
    y2 = y + dt * (_A21 * vy)
    vx2 = vx + dt * (_A21 * a1x)
    vy2 = vy + dt * (_A21 * a1y)
    if y2 <= 0.0:
        return None
    a2x, a2y = _rhs(x2, y2, vx2, vy2, metric, frc, frd)

    x3 = x + dt * (_A31 * vx + _A32 * vx2)
    y3 = y + dt * (_A31 * vy + _A32 * vy2)
    vx3 = vx + dt * (_A31 * a1x + _A32 * a2x)
    vy3 = vy + dt * (_A31 * a1y + _A32 * a2y)
    if y3 <= 0.0:
        return None
    a3x, a3y = _rhs(x3, y3, vx3, vy3, metric, frc, frd)

    x4 = x + dt * (_A41 * vx + _A42 * vx2 + _A43 * vx3)
    y4 = y + dt * (_A41 * vy + _A42 * vy2 + _A43 * vy3)
    vx4 = vx + dt * (_A41 * a1x + _A42 * a2x + _A43 * a3x)
    vy4 = vy + dt * (_A41 * a1y + _A42 * a2y + _A43 * a3y)
    if y4 <= 0.0:
        return None
    a4x, a4y = _rhs(x4, y4, vx4, vy4, metric, frc, frd)

    x5 = x + dt * (_A51 * vx + _A52 * vx2 + _A53 * vx3 + _A54 * vx4)
    y5 = y + dt * (_A51 * vy + _A52 * vy2 + _A53 * vy3 + _A54 * vy4)
    vx5 = vx + dt * (_A51 * a1x + _A52 * a2x + _A53 * a3x + _A54 * a4x)
    vy5 = vy + dt * (_A51 * a1y + _A52 * a2y + _A53 * a3y + _A54 * a4y)
    if y5 <= 0.0:
        return None
    a5x, a5y = _rhs(x5, y5, vx5, vy5, metric, frc, frd)

    x6 = x + dt * (_A61 * vx + _A62 * vx2 + _A63 * vx3 + _A64 * vx4 + _A65 * vx5)
    y6 = y + dt * (_A61 * vy + _A62 * vy2 + _A63 * vy3 + _A64 * vy4 + _A65 * vy5)
    vx6 = vx + dt * (_A61 * a1x + _A62 * a2x + _A63 * a3x + _A64 * a4x + _A65 * a5x)
    vy6 = vy + dt * (_A61 * a1y + _A62 * a2y + _A63 * a3y + _A64 * a4y + _A65 * a5y)
    if y6 <= 0.0:
        return None
    a6x, a6y = _rhs(x6, y6, vx6, vy6, metric, frc, frd)

    nx = x + dt * (_B1 * vx + _B3 * vx3 + _B4 * vx4 + _B5 * vx5 + _B6 * vx6)
    ny = y + dt * (_B1 * vy + _B3 * vy3 + _B4 * vy4 + _B5 * vy5 + _B6 * vy6)
    nvx = vx + dt * (_B1 * a1x + _B3 * a3x + _B4 * a4x + _B5 * a5x + _B6 * a6x)
    nvy = vy + dt * (_B1 * a1y + _B3 * a3y + _B4 * a4y + _B5 * a5y + _B6 * a6y)
    if ny <= 0.0:
        return None
    a7x, a7y = _rhs(nx, ny, nvx, nvy, metric, frc, frd)

    ex = dt * (_E1 * vx + _E3 * vx3 + _E4 * vx4 + _E5 * vx5 + _E6 * vx6 + _E7 * nvx)
    ey = dt * (_E1 * vy + _E3 * vy3 + _E4 * vy4 + _E5 * vy5 + _E6 * vy6 + _E7 * nvy)
    evx = dt * (_E1 * a1x + _E3 * a3x + _E4 * a4x + _E5 * a5x + _E6 * a6x + _E7 * a7x)
    evy = dt * (_E1 * a1y + _E3 * a3y + _E4 * a4y + _E5 * a5y + _E6 * a6y + _E7 * a7y)
    return nx, ny, nvx, nvy, ex, ey, evx, evy


def _height_row(x, y):
    """Invariant height and reducing row at (x, y); strip shortcut for y >= 1.

    For y >= 1 no translate can be higher and the x-shift reducer has the
    bottom row (0, 1), the same row as the identity.
    """
    if y >= 1.0:
        return y, 0.0, 1.0, 0, 1
    xs, ys, a, b, c, d = local_reduce(x, y)
    return ys, float(c), float(d), c, d


def integrate_ray_raw(metric, x0, y0, vx0, vy0, tmax, rtol, atol, hball,
                      max_excursions=-1, max_steps=20000000, max_dt=0.1,
                      speed_tol=1e-6):
    """Integrate a unit-speed geodesic; see the module docstring.

    The start must be moderately conditioned (callers pre-reduce).  The
    initial velocity is normalized to metric speed one.  Returns a dict of
    sample lists, chunk/event tables and audit numbers.
    """
    ts = []
    xs = []
    ys = []
    vxs = []
    vys = []
    hs = []
    chunk_idx = []
    chunk_mat = []
    event_kind = []
    event_idx = []

    x, y, vx, vy = float(x0), float(y0), float(vx0), float(vy0)
    if y <= 0.0:
        raise ValueError("start point must have y > 0")
    t = 0.0
    status = ST_TIME
    steps = 0
    rejected = 0
    max_drift = 0.0
    drift_sum = 0.0
    px_drift = 0.0
    n_exc = 0

    # initial reduction: height, frame and frozen row
    try:
        rxs, rys, ra, rb, rc, rd = local_reduce(x, y)
    except (OverflowError, ValueError):
        raise ValueError("start point is too degenerate to reduce in the kernel")
    hcur = rys
    inside = hcur > hball
    if inside and (ra, rb, rc, rd) != (1, 0, 0, 1):
        # start mid-excursion: move the horoball to infinity right away
        x, y, vx, vy = _apply_frame(float(ra), float(rb), float(rc), float(rd),
                                    x, y, vx, vy)
        chunk_idx.append(0)
        chunk_mat.append((ra, rb, rc, rd))
        hcur = y
    frc, frd = (0.0, 1.0) if inside else (float(rc), float(rd))
    row_c, row_d = (0, 1) if inside else (abs(rc), rd if rc >= 0 else -rd)

    # normalize to unit metric speed (setup, not drift)
    speed = math.sqrt(vx * vx + vy * vy)
    if speed <= 0.0:
        raise ValueError("zero initial velocity")
    finv = y if metric == METRIC_HYP else y * math.sqrt(hcur)
    scale = finv / speed
    vx *= scale
    vy *= scale

    px_ref = vx / (y * y * y) if inside else 0.0

    ts.append(t)
    xs.append(x)
    ys.append(y)
    vxs.append(vx)
    vys.append(vy)
    hs.append(hcur)

    dt = 1e-4
    t_eps = 1e-12 * max(1.0, tmax)

    def substate(dtau):
        if dtau <= 0.0:
            return x, y, vx, vy
        r = _dp_step(x, y, vx, vy, dtau, metric, frc, frd)
        if r is None:
            return None
        return r[0], r[1], r[2], r[3]

    while True:
        if tmax - t <= t_eps:
            status = ST_TIME
            break
        if steps >= max_steps:
            status = ST_MAXSTEPS
            break
        if dt > max_dt:
            dt = max_dt
        if dt > tmax - t:
            dt = tmax - t
        if dt < 1e-14:
            status = ST_UNDERFLOW
            break

        res = _dp_step(x, y, vx, vy, dt, metric, frc, frd)
        steps += 1
        if res is None:
            dt *= 0.25
            rejected += 1
            continue
        nx, ny, nvx, nvy, ex, ey, evx, evy = res

        scx = atol + rtol * max(abs(x), abs(nx))
        scy = atol + rtol * max(abs(y), abs(ny))
        sp0 = math.sqrt(vx * vx + vy * vy)
        sp1 = math.sqrt(nvx * nvx + nvy * nvy)
        scv = atol + rtol * max(sp0, sp1)
        e0 = ex / scx
        e1 = ey / scy
        e2 = evx / scv
        e3 = evy / scv
        err = math.sqrt(0.25 * (e0 * e0 + e1 * e1 + e2 * e2 + e3 * e3))
        if err > 1.0:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            dt *= fac
            rejected += 1
            continue

        # ---- event detection on the accepted trial step ----
        event = 0
        if inside:
            if vy > 0.0 and nvy <= 0.0:
                event = EV_APEX
            elif ny < hball:
                event = EV_EXIT
        else:
            try:
                nh, nfrc, nfrd, nrc, nrd = _height_row(nx, ny)
            except (OverflowError, ValueError):
                status = ST_OVERFLOW
                break
            if metric == METRIC_WP and (abs(nrc), nrd if nrc >= 0 else -nrd) != (row_c, row_d):
                event = EV_CUT
            elif nh > hball:
                event = EV_ENTER

        if event == 0:
            t += dt
            x, y, vx, vy = nx, ny, nvx, nvy
            hcur = ny if inside else nh
            if not inside:
                frc, frd = nfrc, nfrd
                row_c, row_d = abs(nrc), nrd if nrc >= 0 else -nrd
        else:
            # locate the earliest event time by bisection on sub-steps
            lo = 0.0
            hi = dt
            shi = (nx, ny, nvx, nvy)
            if event == EV_APEX:
                for _ in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    sm = substate(mid)
                    if sm is None or sm[3] <= 0.0:
                        hi = mid
                        if sm is not None:
                            shi = sm
                    else:
                        lo = mid
            elif event == EV_EXIT:
                for _ in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    sm = substate(mid)
                    if sm is None or sm[1] < hball:
                        hi = mid
                        if sm is not None:
                            shi = sm
                    else:
                        lo = mid
            elif event == EV_ENTER:
                for _ in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    sm = substate(mid)
                    ok = False
                    if sm is not None:
                        try:
                            hmid = _height_row(sm[0], sm[1])[0]
                        except (OverflowError, ValueError):
                            hmid = hball + 1.0
                        ok = hmid > hball
                    if sm is None or ok:
                        hi = mid
                        if sm is not None:
                            shi = sm
                    else:
                        lo = mid
            else:  # EV_CUT: first sub-time where the reducing row changes
                for _ in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    sm = substate(mid)
                    changed = True
                    if sm is not None:
                        try:
                            _, _, _, mrc, mrd = _height_row(sm[0], sm[1])
                            changed = (abs(mrc), mrd if mrc >= 0 else -mrd) != (row_c, row_d)
                        except (OverflowError, ValueError):
                            changed = True
                    if sm is None or changed:
                        hi = mid
                        if sm is not None:
                            shi = sm
                    else:
                        lo = mid
            t += hi
            x, y, vx, vy = shi
            if inside:
                hcur = y
            else:
                try:
                    hcur, frc, frd, nrc, nrd = _height_row(x, y)
                except (OverflowError, ValueError):
                    status = ST_OVERFLOW
                    break
                row_c, row_d = abs(nrc), nrd if nrc >= 0 else -nrd

        # ---- speed audit and renormalization ----
        finv = y if metric == METRIC_HYP else y * math.sqrt(hcur)
        speed = math.sqrt(vx * vx + vy * vy)
        drift = abs(speed / finv - 1.0)
        if drift > max_drift:
            max_drift = drift
        drift_sum += drift
        scale = finv / speed
        vx *= scale
        vy *= scale
        if inside:
            pxv = vx / (y * y * y)
            rel = abs(pxv - px_ref) / max(abs(px_ref), 1e-300)
            if rel > px_drift:
                px_drift = rel

        # ---- bookkeeping: samples, events, frame changes ----
        idx = len(ts)
        if event == EV_ENTER:
            # switch to the horoball frame before storing the entry sample
            try:
                _, _, ga, gb, gc, gd = local_reduce(x, y)
            except (OverflowError, ValueError):
                status = ST_OVERFLOW
                break
            if (ga, gb, gc, gd) != (1, 0, 0, 1):
                x, y, vx, vy = _apply_frame(float(ga), float(gb), float(gc),
                                            float(gd), x, y, vx, vy)
                chunk_idx.append(idx)
                chunk_mat.append((ga, gb, gc, gd))
            inside = True
            hcur = y
            frc, frd = 0.0, 1.0
            row_c, row_d = 0, 1
            px_ref = vx / (y * y * y)
        ts.append(t)
        xs.append(x)
        ys.append(y)
        vxs.append(vx)
        vys.append(vy)
        hs.append(hcur)
        if event != 0:
            event_kind.append(event)
            event_idx.append(idx)
        if event == EV_EXIT:
            inside = False
            n_exc += 1
            # recenter: at the exit height a full reduction is a shift
            n = math.floor(x + 0.5)
            if n != 0:
                if abs(n) > _ENTRY_LIMIT:
                    status = ST_OVERFLOW
                    break
                x -= n
                chunk_idx.append(idx + 1)
                chunk_mat.append((1, -n, 0, 1))
            frc, frd = 0.0, 1.0
            row_c, row_d = 0, 1
            if max_excursions >= 0 and n_exc >= max_excursions:
                status = ST_EXCURSIONS
                break
        elif event == 0 and not inside and (abs(x) > 4.0 or y < 0.05):
            try:
                rxs, rys, ga, gb, gc, gd = local_reduce(x, y)
            except (OverflowError, ValueError):
                status = ST_OVERFLOW
                break
            if (ga, gb, gc, gd) != (1, 0, 0, 1):
                _, _, vx, vy = _apply_frame(float(ga), float(gb), float(gc),
                                            float(gd), x, y, vx, vy)
                x, y = rxs, rys
                chunk_idx.append(idx + 1)
                chunk_mat.append((ga, gb, gc, gd))
                frc, frd = 0.0, 1.0
                row_c, row_d = 0, 1
        if inside and abs(x) > 1e14:
            status = ST_OVERFLOW
            break

        if event == 0:
            fac = 0.9 * err ** -0.2 if err > 0.0 else 5.0
            if fac > 5.0:
                fac = 5.0
            dt *= fac

    total_time = t if t > 0.0 else 1.0
    return {
        "t": ts,
        "x": xs,
        "y": ys,
        "vx": vxs,
        "vy": vys,
        "height": hs,
        "chunk_idx": chunk_idx,
        "chunk_mat": chunk_mat,
        "event_kind": event_kind,
        "event_idx": event_idx,
        "status": status,
        "steps": steps,
        "rejected": rejected,
        "n_excursions": n_exc,
        "max_step_drift": max_drift,
        "drift_rate": drift_sum / total_time,
        "px_drift": px_drift,
        "reached_time": t,
    }
