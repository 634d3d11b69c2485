# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geodesic integration kernel.

Twin of `cuspflow._kernels.pure` with identical arithmetic (same
operations in the same order; the build disables FP contraction), so both
backends produce the same trajectories bit for bit.
"""

from libc.math cimport sqrt, floor, fabs, pow

import numpy as np

BACKEND_NAME = "c"

DEF METRIC_HYP = 0
DEF METRIC_WP = 1

DEF EV_ENTER = 1
DEF EV_APEX = 2
DEF EV_EXIT = 3
DEF EV_CUT = 4

DEF ST_TIME = 0
DEF ST_EXCURSIONS = 1
DEF ST_UNDERFLOW = 2
DEF ST_MAXSTEPS = 3
DEF ST_OVERFLOW = 4

cdef double _GUARD = 1.0 - 1e-15
cdef double _ENTRY_LIMIT = 4.5e15
cdef long long _REDUCE_CAP = 1000000

cdef double _A21 = 1.0 / 5.0
cdef double _A31 = 3.0 / 40.0, _A32 = 9.0 / 40.0
cdef double _A41 = 44.0 / 45.0, _A42 = -56.0 / 15.0, _A43 = 32.0 / 9.0
cdef double _A51 = 19372.0 / 6561.0, _A52 = -25360.0 / 2187.0
cdef double _A53 = 64448.0 / 6561.0, _A54 = -212.0 / 729.0
cdef double _A61 = 9017.0 / 3168.0, _A62 = -355.0 / 33.0
cdef double _A63 = 46732.0 / 5247.0, _A64 = 49.0 / 176.0, _A65 = -5103.0 / 18656.0
cdef double _B1 = 35.0 / 384.0, _B3 = 500.0 / 1113.0, _B4 = 125.0 / 192.0
cdef double _B5 = -2187.0 / 6784.0, _B6 = 11.0 / 84.0
cdef double _E1 = 71.0 / 57600.0, _E3 = -71.0 / 16695.0, _E4 = 71.0 / 1920.0
cdef double _E5 = -17253.0 / 339200.0, _E6 = 22.0 / 525.0, _E7 = -1.0 / 40.0


cdef int _reduce_c(double x, double y, double* ox, double* oy,
                   long long* oa, long long* ob, long long* oc, long long* od) nogil:
    """0 ok, 1 entry overflow, 2 non-terminating."""
    cdef long long a = 1, b = 0, c = 0, d = 1, n
    cdef double r2, fn
    cdef long long i
    for i in range(_REDUCE_CAP):
        fn = floor(x + 0.5)
        if fabs(fn) > _ENTRY_LIMIT:
            return 1
        n = <long long> fn
        if n != 0:
            x -= fn
            a -= n * c
            b -= n * d
            if fabs(<double> a) > _ENTRY_LIMIT or fabs(<double> b) > _ENTRY_LIMIT:
                return 1
        r2 = x * x + y * y
        if r2 < _GUARD:
            x = -x / r2
            y = y / r2
            n = a
            a = -c
            c = n
            n = b
            b = -d
            d = n
        else:
            ox[0] = x
            oy[0] = y
            oa[0] = a
            ob[0] = b
            oc[0] = c
            od[0] = d
            return 0
    return 2


def local_reduce(double x, double y, cap=None):
    """Fundamental-domain reduction; same contract as the pure twin."""
    cdef double ox = 0.0, oy = 0.0
    cdef long long a = 0, b = 0, c = 0, d = 0
    cdef int rc = _reduce_c(x, y, &ox, &oy, &a, &b, &c, &d)
    if rc == 1:
        raise OverflowError("reduction matrix entries out of range")
    if rc == 2:
        raise ValueError("fundamental-domain reduction did not stabilize")
    return ox, oy, a, b, c, d


cdef inline void _rhs_c(double x, double y, double vx, double vy,
                        int metric, double frc, double frd,
                        double* ax, double* ay) nogil:
    cdef double px, py, u, w, q, q2, hval, hx, hy, diff
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
    ax[0] = -px * diff - 2.0 * py * vx * vy
    ay[0] = py * diff - 2.0 * px * vx * vy


cdef int _dp_step_c(double x, double y, double vx, double vy, double dt,
                    int metric, double frc, double frd, double* out) nogil:
    """out = nx, ny, nvx, nvy, ex, ey, evx, evy.  Returns 0 ok, 1 bad."""
    cdef double a1x, a1y, a2x, a2y, a3x, a3y, a4x, a4y, a5x, a5y, a6x, a6y, a7x, a7y
    cdef double x2, y2, vx2, vy2, x3, y3, vx3, vy3, x4, y4, vx4, vy4
    cdef double x5, y5, vx5, vy5, x6, y6, vx6, vy6, nx, ny, nvx, nvy

    _rhs_c(x, y, vx, vy, metric, frc, frd, &a1x, &a1y)

    x2 = x + dt * (_A21 * vx)
    y2 = y + dt * (_A21 * vy)
    vx2 = vx + dt * (_A21 * a1x)
    vy2 = vy + dt * (_A21 * a1y)
    if y2 <= 0.0:
        return 1
    _rhs_c(x2, y2, vx2, vy2, metric, frc, frd, &a2x, &a2y)

    x3 = x + dt * (_A31 * vx + _A32 * vx2)
    y3 = y + dt * (_A31 * vy + _A32 * vy2)
    vx3 = vx + dt * (_A31 * a1x + _A32 * a2x)
    vy3 = vy + dt * (_A31 * a1y + _A32 * a2y)
    if y3 <= 0.0:
        return 1
    _rhs_c(x3, y3, vx3, vy3, metric, frc, frd, &a3x, &a3y)

    x4 = x + dt * (_A41 * vx + _A42 * vx2 + _A43 * vx3)
    y4 = y + dt * (_A41 * vy + _A42 * vy2 + _A43 * vy3)
    vx4 = vx + dt * (_A41 * a1x + _A42 * a2x + _A43 * a3x)
    vy4 = vy + dt * (_A41 * a1y + _A42 * a2y + _A43 * a3y)
    if y4 <= 0.0:
        return 1
    _rhs_c(x4, y4, vx4, vy4, metric, frc, frd, &a4x, &a4y)

    x5 = x + dt * (_A51 * vx + _A52 * vx2 + _A53 * vx3 + _A54 * vx4)
    y5 = y + dt * (_A51 * vy + _A52 * vy2 + _A53 * vy3 + _A54 * vy4)
    vx5 = vx + dt * (_A51 * a1x + _A52 * a2x + _A53 * a3x + _A54 * a4x)
    vy5 = vy + dt * (_A51 * a1y + _A52 * a2y + _A53 * a3y + _A54 * a4y)
    if y5 <= 0.0:
        return 1
    _rhs_c(x5, y5, vx5, vy5, metric, frc, frd, &a5x, &a5y)

    x6 = x + dt * (_A61 * vx + _A62 * vx2 + _A63 * vx3 + _A64 * vx4 + _A65 * vx5)
    y6 = y + dt * (_A61 * vy + _A62 * vy2 + _A63 * vy3 + _A64 * vy4 + _A65 * vy5)
    vx6 = vx + dt * (_A61 * a1x + _A62 * a2x + _A63 * a3x + _A64 * a4x + _A65 * a5x)
    vy6 = vy + dt * (_A61 * a1y + _A62 * a2y + _A63 * a3y + _A64 * a4y + _A65 * a5y)
    if y6 <= 0.0:
        return 1
    _rhs_c(x6, y6, vx6, vy6, metric, frc, frd, &a6x, &a6y)

    nx = x + dt * (_B1 * vx + _B3 * vx3 + _B4 * vx4 + _B5 * vx5 + _B6 * vx6)
    ny = y + dt * (_B1 * vy + _B3 * vy3 + _B4 * vy4 + _B5 * vy5 + _B6 * vy6)
    nvx = vx + dt * (_B1 * a1x + _B3 * a3x + _B4 * a4x + _B5 * a5x + _B6 * a6x)
    nvy = vy + dt * (_B1 * a1y + _B3 * a3y + _B4 * a4y + _B5 * a5y + _B6 * a6y)
    if ny <= 0.0:
        return 1
    _rhs_c(nx, ny, nvx, nvy, metric, frc, frd, &a7x, &a7y)

    out[0] = nx
    out[1] = ny
    out[2] = nvx
    out[3] = nvy
    out[4] = dt * (_E1 * vx + _E3 * vx3 + _E4 * vx4 + _E5 * vx5 + _E6 * vx6 + _E7 * nvx)
    out[5] = dt * (_E1 * vy + _E3 * vy3 + _E4 * vy4 + _E5 * vy5 + _E6 * vy6 + _E7 * nvy)
    out[6] = dt * (_E1 * a1x + _E3 * a3x + _E4 * a4x + _E5 * a5x + _E6 * a6x + _E7 * a7x)
    out[7] = dt * (_E1 * a1y + _E3 * a3y + _E4 * a4y + _E5 * a5y + _E6 * a6y + _E7 * a7y)
    return 0


cdef inline void _frame_c(double a, double b, double c, double d,
                          double* x, double* y, double* vx, double* vy) nogil:
    cdef double dr = c * x[0] + d
    cdef double di = c * y[0]
    cdef double q = dr * dr + di * di
    cdef double nx = ((a * x[0] + b) * dr + (a * y[0]) * di) / q
    cdef double ny = y[0] / q
    cdef double wre = dr * dr - di * di
    cdef double wim = 2.0 * dr * di
    cdef double q2 = q * q
    cdef double nvx = (vx[0] * wre + vy[0] * wim) / q2
    cdef double nvy = (vy[0] * wre - vx[0] * wim) / q2
    x[0] = nx
    y[0] = ny
    vx[0] = nvx
    vy[0] = nvy


cdef class _Buf:
    cdef double[::1] data
    cdef object arr
    cdef Py_ssize_t n

    def __cinit__(self, Py_ssize_t cap=1024):
        self.arr = np.empty(cap, dtype=np.float64)
        self.data = self.arr
        self.n = 0

    cdef void push(self, double v):
        cdef Py_ssize_t cap = self.data.shape[0]
        if self.n >= cap:
            self.arr = np.concatenate([self.arr, np.empty(cap, dtype=np.float64)])
            self.data = self.arr
        self.data[self.n] = v
        self.n += 1

    cdef object trimmed(self):
        return self.arr[:self.n].copy()


def integrate_ray_raw(int metric, double x0, double y0, double vx0, double vy0,
                      double tmax, double rtol, double atol, double hball,
                      long long max_excursions=-1, long long max_steps=20000000,
                      double max_dt=0.1, double speed_tol=1e-6):
    """Compiled twin of `pure.integrate_ray_raw`; same contract."""
    cdef _Buf ts = _Buf(), xs = _Buf(), ys = _Buf(), vxs = _Buf(), vys = _Buf(), hs = _Buf()
    chunk_idx = []
    chunk_mat = []
    event_kind = []
    event_idx = []

    cdef double x = x0, y = y0, vx = vx0, vy = vy0
    if y <= 0.0:
        raise ValueError("start point must have y > 0")
    cdef double t = 0.0
    cdef int status = ST_TIME
    cdef long long steps = 0, rejected = 0, n_exc = 0
    cdef double max_drift = 0.0, drift_sum = 0.0, px_drift = 0.0

    cdef double rxs = 0.0, rys = 0.0
    cdef long long ra = 0, rb = 0, rc = 0, rd = 0
    cdef int rcode = _reduce_c(x, y, &rxs, &rys, &ra, &rb, &rc, &rd)
    if rcode != 0:
        raise ValueError("start point is too degenerate to reduce in the kernel")
    cdef double hcur = rys
    cdef bint inside = hcur > hball
    if inside and not (ra == 1 and rb == 0 and rc == 0 and rd == 1):
        _frame_c(<double> ra, <double> rb, <double> rc, <double> rd, &x, &y, &vx, &vy)
        chunk_idx.append(0)
        chunk_mat.append((ra, rb, rc, rd))
        hcur = y
    cdef double frc, frd
    cdef long long row_c, row_d
    if inside:
        frc = 0.0
        frd = 1.0
        row_c = 0
        row_d = 1
    else:
        frc = <double> rc
        frd = <double> rd
        row_c = rc if rc >= 0 else -rc
        row_d = rd if rc >= 0 else -rd

    cdef double speed = sqrt(vx * vx + vy * vy)
    if speed <= 0.0:
        raise ValueError("zero initial velocity")
    cdef double finv = y if metric == METRIC_HYP else y * sqrt(hcur)
    cdef double scale = finv / speed
    vx *= scale
    vy *= scale

    cdef double px_ref = vx / (y * y * y) if inside else 0.0

    ts.push(t)
    xs.push(x)
    ys.push(y)
    vxs.push(vx)
    vys.push(vy)
    hs.push(hcur)

    cdef double dt = 1e-4
    cdef double t_eps = 1e-12 * (1.0 if tmax < 1.0 else tmax)

    cdef double res[8]
    cdef double sub[8]
    cdef double nx, ny, nvx, nvy, ex, ey, evx, evy
    cdef double scx, scy, sp0, sp1, scv, e0, e1, e2, e3, err, fac
    cdef double nh = 0.0, nfrc = 0.0, nfrd = 0.0
    cdef long long nrc = 0, nrd = 0
    cdef int event, subok, k
    cdef double lo, hi, mid
    cdef double shix, shiy, shivx, shivy
    cdef double hmid
    cdef bint ok, changed
    cdef double drift, pxv, rel, fn
    cdef long long nshift, mrc, mrd
    cdef Py_ssize_t idx
    cdef long long ga = 0, gb = 0, gc = 0, gd = 0
    cdef double g_xs = 0.0, g_ys = 0.0

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

        subok = _dp_step_c(x, y, vx, vy, dt, metric, frc, frd, res)
        steps += 1
        if subok != 0:
            dt *= 0.25
            rejected += 1
            continue
        nx = res[0]
        ny = res[1]
        nvx = res[2]
        nvy = res[3]
        ex = res[4]
        ey = res[5]
        evx = res[6]
        evy = res[7]

        scx = atol + rtol * (fabs(x) if fabs(x) > fabs(nx) else fabs(nx))
        scy = atol + rtol * (fabs(y) if fabs(y) > fabs(ny) else fabs(ny))
        sp0 = sqrt(vx * vx + vy * vy)
        sp1 = sqrt(nvx * nvx + nvy * nvy)
        scv = atol + rtol * (sp0 if sp0 > sp1 else sp1)
        e0 = ex / scx
        e1 = ey / scy
        e2 = evx / scv
        e3 = evy / scv
        err = sqrt(0.25 * (e0 * e0 + e1 * e1 + e2 * e2 + e3 * e3))
        if err > 1.0:
            fac = 0.9 * pow(err, -0.2)
            if fac < 0.2:
                fac = 0.2
            dt *= fac
            rejected += 1
            continue

        # ---- event detection ----
        event = 0
        if inside:
            if vy > 0.0 and nvy <= 0.0:
                event = EV_APEX
            elif ny < hball:
                event = EV_EXIT
        else:
            if ny >= 1.0:
                nh = ny
                nfrc = 0.0
                nfrd = 1.0
                nrc = 0
                nrd = 1
            else:
                rcode = _reduce_c(nx, ny, &g_xs, &g_ys, &ga, &gb, &nrc, &nrd)
                if rcode != 0:
                    status = ST_OVERFLOW
                    break
                nh = g_ys
                nfrc = <double> nrc
                nfrd = <double> nrd
            if metric == METRIC_WP and (
                (nrc if nrc >= 0 else -nrc) != row_c
                or (nrd if nrc >= 0 else -nrd) != row_d
            ):
                event = EV_CUT
            elif nh > hball:
                event = EV_ENTER

        if event == 0:
            t += dt
            x = nx
            y = ny
            vx = nvx
            vy = nvy
            if inside:
                hcur = ny
            else:
                hcur = nh
                frc = nfrc
                frd = nfrd
                row_c = nrc if nrc >= 0 else -nrc
                row_d = nrd if nrc >= 0 else -nrd
        else:
            lo = 0.0
            hi = dt
            shix = nx
            shiy = ny
            shivx = nvx
            shivy = nvy
            if event == EV_APEX:
                for k in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    subok = _dp_step_c(x, y, vx, vy, mid, metric, frc, frd, sub)
                    if subok != 0 or sub[3] <= 0.0:
                        hi = mid
                        if subok == 0:
                            shix = sub[0]
                            shiy = sub[1]
                            shivx = sub[2]
                            shivy = sub[3]
                    else:
                        lo = mid
            elif event == EV_EXIT:
                for k in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    subok = _dp_step_c(x, y, vx, vy, mid, metric, frc, frd, sub)
                    if subok != 0 or sub[1] < hball:
                        hi = mid
                        if subok == 0:
                            shix = sub[0]
                            shiy = sub[1]
                            shivx = sub[2]
                            shivy = sub[3]
                    else:
                        lo = mid
            elif event == EV_ENTER:
                for k in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    subok = _dp_step_c(x, y, vx, vy, mid, metric, frc, frd, sub)
                    ok = False
                    if subok == 0:
                        if sub[1] >= 1.0:
                            hmid = sub[1]
                        else:
                            rcode = _reduce_c(sub[0], sub[1], &g_xs, &g_ys,
                                              &ga, &gb, &mrc, &mrd)
                            hmid = hball + 1.0 if rcode != 0 else g_ys
                        ok = hmid > hball
                    if subok != 0 or ok:
                        hi = mid
                        if subok == 0:
                            shix = sub[0]
                            shiy = sub[1]
                            shivx = sub[2]
                            shivy = sub[3]
                    else:
                        lo = mid
            else:
                for k in range(60):
                    if hi - lo <= 1e-13 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    subok = _dp_step_c(x, y, vx, vy, mid, metric, frc, frd, sub)
                    changed = True
                    if subok == 0:
                        if sub[1] >= 1.0:
                            mrc = 0
                            mrd = 1
                            changed = (0 != row_c or 1 != row_d)
                        else:
                            rcode = _reduce_c(sub[0], sub[1], &g_xs, &g_ys,
                                              &ga, &gb, &mrc, &mrd)
                            if rcode == 0:
                                changed = ((mrc if mrc >= 0 else -mrc) != row_c
                                           or (mrd if mrc >= 0 else -mrd) != row_d)
                            else:
                                changed = True
                    if subok != 0 or changed:
                        hi = mid
                        if subok == 0:
                            shix = sub[0]
                            shiy = sub[1]
                            shivx = sub[2]
                            shivy = sub[3]
                    else:
                        lo = mid
            t += hi
            x = shix
            y = shiy
            vx = shivx
            vy = shivy
            if inside:
                hcur = y
            else:
                if y >= 1.0:
                    hcur = y
                    frc = 0.0
                    frd = 1.0
                    nrc = 0
                    nrd = 1
                else:
                    rcode = _reduce_c(x, y, &g_xs, &g_ys, &ga, &gb, &nrc, &nrd)
                    if rcode != 0:
                        status = ST_OVERFLOW
                        break
                    hcur = g_ys
                    frc = <double> nrc
                    frd = <double> nrd
                row_c = nrc if nrc >= 0 else -nrc
                row_d = nrd if nrc >= 0 else -nrd

        # ---- speed audit and renormalization ----
        finv = y if metric == METRIC_HYP else y * sqrt(hcur)
        speed = sqrt(vx * vx + vy * vy)
        drift = fabs(speed / finv - 1.0)
        if drift > max_drift:
            max_drift = drift
        drift_sum += drift
        scale = finv / speed
        vx *= scale
        vy *= scale
        if inside:
            pxv = vx / (y * y * y)
            rel = fabs(pxv - px_ref) / (fabs(px_ref) if fabs(px_ref) > 1e-300 else 1e-300)
            if rel > px_drift:
                px_drift = rel

        # ---- bookkeeping ----
        idx = ts.n
        if event == EV_ENTER:
            rcode = _reduce_c(x, y, &g_xs, &g_ys, &ga, &gb, &gc, &gd)
            if rcode != 0:
                status = ST_OVERFLOW
                break
            if not (ga == 1 and gb == 0 and gc == 0 and gd == 1):
                _frame_c(<double> ga, <double> gb, <double> gc, <double> gd,
                         &x, &y, &vx, &vy)
                chunk_idx.append(idx)
                chunk_mat.append((ga, gb, gc, gd))
            inside = True
            hcur = y
            frc = 0.0
            frd = 1.0
            row_c = 0
            row_d = 1
            px_ref = vx / (y * y * y)
        ts.push(t)
        xs.push(x)
        ys.push(y)
        vxs.push(vx)
        vys.push(vy)
        hs.push(hcur)
        if event != 0:
            event_kind.append(event)
            event_idx.append(idx)
        if event == EV_EXIT:
            inside = False
            n_exc += 1
            fn = floor(x + 0.5)
            if fabs(fn) > _ENTRY_LIMIT:
                status = ST_OVERFLOW
                break
            nshift = <long long> fn
            if nshift != 0:
                x -= fn
                chunk_idx.append(idx + 1)
                chunk_mat.append((1, -nshift, 0, 1))
            frc = 0.0
            frd = 1.0
            row_c = 0
            row_d = 1
            if max_excursions >= 0 and n_exc >= max_excursions:
                status = ST_EXCURSIONS
                break
        elif event == 0 and not inside and (fabs(x) > 4.0 or y < 0.05):
            rcode = _reduce_c(x, y, &rxs, &rys, &ga, &gb, &gc, &gd)
            if rcode != 0:
                status = ST_OVERFLOW
                break
            if not (ga == 1 and gb == 0 and gc == 0 and gd == 1):
                _frame_c(<double> ga, <double> gb, <double> gc, <double> gd,
                         &x, &y, &vx, &vy)
                x = rxs
                y = rys
                chunk_idx.append(idx + 1)
                chunk_mat.append((ga, gb, gc, gd))
                frc = 0.0
                frd = 1.0
                row_c = 0
                row_d = 1
        if inside and fabs(x) > 1e14:
            status = ST_OVERFLOW
            break

        if event == 0:
            fac = 0.9 * pow(err, -0.2) if err > 0.0 else 5.0
            if fac > 5.0:
                fac = 5.0
            dt *= fac

    cdef double total_time = t if t > 0.0 else 1.0
    return {
        "t": ts.trimmed(),
        "x": xs.trimmed(),
        "y": ys.trimmed(),
        "vx": vxs.trimmed(),
        "vy": vys.trimmed(),
        "height": hs.trimmed(),
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
