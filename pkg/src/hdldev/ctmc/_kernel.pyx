# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loop (direct method on a binary sum tree, optional thinning).

Mirrors ``_fallback.run`` operation for operation; see that module for the
readable description of the algorithm.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, cos, floor, ceil, fabs, INFINITY, M_PI, isfinite
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memcpy
from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

cnp.import_array()

cdef double[4] GL_X = [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
cdef double[4] GL_W = [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef int64_t COUNT_LIMIT = (<int64_t>1) << 62


cdef struct Sim:
    int n
    int p
    double n2
    double ellf
    int b_code
    double b0, b1
    int d_code
    double d0, d1
    int t_code
    double t_rate
    int hflag
    int64_t* eta
    double* a
    double* cR
    double* cL
    double* cB
    double* cD
    double* fR
    double* fL
    double* fB
    double* fD
    double* rates
    double* tree
    double* last
    bint track
    int n_ref
    double ref_dt
    double* ref
    bint comp_on
    double gl_hmax
    double err
    double comp
    bitgen_t* rng


cdef inline double _uniform(Sim* s) noexcept nogil:
    return (s.rng.next_uint64(s.rng.state) >> 11) * INV_2_53


cdef inline double _rate(int code, double p0, double p1, double u) noexcept nogil:
    cdef double v
    if code == 0:
        return 0.0
    if code == 1:
        return p0
    if code == 2:
        return p0 * u
    if code == 3:
        return p0 + p1 * u
    v = 1.0 - u / p1
    if v < 0.0:
        v = 0.0
    return p0 * u * v


cdef inline double _g(int code, double rate, double t) noexcept nogil:
    if code == 0:
        return 1.0
    if code == 1:
        return 1.0 + rate * t
    return cos(rate * t)


cdef void _g_range(int code, double rate, double t0, double t1, double* lo, double* hi) noexcept nogil:
    cdef double a = _g(code, rate, t0)
    cdef double b = _g(code, rate, t1)
    cdef double w, v
    cdef long j
    lo[0] = a if a < b else b
    hi[0] = b if a < b else a
    if code == 2 and rate != 0.0:
        w = fabs(rate)
        j = <long>ceil(t0 * w / M_PI)
        while j * M_PI / w <= t1:
            v = 1.0 if j % 2 == 0 else -1.0
            if v < lo[0]:
                lo[0] = v
            if v > hi[0]:
                hi[0] = v
            j += 1


cdef inline double _dom(double c, double glo, double ghi) noexcept nogil:
    cdef double x = exp(glo * c)
    cdef double y = exp(ghi * c)
    return x if x > y else y


cdef inline double _site_rates(Sim* s, int k) noexcept nogil:
    cdef int64_t e = s.eta[k]
    cdef double u = (<double>e) / s.ellf
    cdef double* r = s.rates + 4 * k
    r[0] = s.n2 * <double>e * s.fR[k]
    r[1] = s.n2 * <double>e * s.fL[k]
    r[2] = s.ellf * _rate(s.b_code, s.b0, s.b1, u) * s.fB[k]
    r[3] = s.ellf * _rate(s.d_code, s.d0, s.d1, u) * s.fD[k]
    return ((r[0] + r[1]) + r[2]) + r[3]


cdef inline void _update(Sim* s, int k) noexcept nogil:
    cdef int i = s.p + k
    s.tree[i] = _site_rates(s, k)
    i //= 2
    while i >= 1:
        s.tree[i] = s.tree[2 * i] + s.tree[2 * i + 1]
        i //= 2


cdef void _rebuild(Sim* s) noexcept nogil:
    cdef int k, i
    for k in range(s.n):
        s.tree[s.p + k] = _site_rates(s, k)
    i = s.p - 1
    while i > 0:
        s.tree[i] = s.tree[2 * i] + s.tree[2 * i + 1]
        i -= 1


cdef inline double _ref_at(Sim* s, int k, double t) noexcept nogil:
    cdef long i = <long>floor(t / s.ref_dt)
    cdef double frac
    if i > s.n_ref - 2:
        i = s.n_ref - 2
    if i < 0:
        i = 0
    frac = (t - i * s.ref_dt) / s.ref_dt
    return s.ref[i * s.n + k] * (1.0 - frac) + s.ref[(i + 1) * s.n + k] * frac


cdef inline double _site_comp_rate(Sim* s, int k, int64_t e, double t) noexcept nogil:
    cdef double g = _g(s.t_code, s.t_rate, t)
    cdef double u = (<double>e) / s.ellf
    return (s.ellf * _rate(s.b_code, s.b0, s.b1, u) * (1.0 - exp(g * s.cB[k]))
            + s.ellf * _rate(s.d_code, s.d0, s.d1, u) * (1.0 - exp(g * s.cD[k]))
            + s.n2 * <double>e * (2.0 - exp(g * s.cR[k]) - exp(g * s.cL[k])))


cdef void _settle(Sim* s, int k, double tb) noexcept nogil:
    cdef double ta = s.last[k]
    cdef int64_t e
    cdef double x, v, err, u, c, h, acc, mid
    cdef long i, m, j
    cdef int q
    if tb > ta:
        e = s.eta[k]
        if s.track:
            x = (<double>e) / s.ellf
            err = s.err
            v = fabs(x - _ref_at(s, k, ta))
            if v > err:
                err = v
            v = fabs(x - _ref_at(s, k, tb))
            if v > err:
                err = v
            i = <long>floor(ta / s.ref_dt) + 1
            while i < s.n_ref and i * s.ref_dt < tb:
                v = fabs(x - s.ref[i * s.n + k])
                if v > err:
                    err = v
                i += 1
            s.err = err
        if s.comp_on:
            if s.hflag == 1:
                u = (<double>e) / s.ellf
                c = (s.ellf * _rate(s.b_code, s.b0, s.b1, u) * (1.0 - s.fB[k])
                     + s.ellf * _rate(s.d_code, s.d0, s.d1, u) * (1.0 - s.fD[k])
                     + s.n2 * <double>e * (2.0 - s.fR[k] - s.fL[k]))
                s.comp += c * (tb - ta)
            else:
                m = <long>ceil((tb - ta) / s.gl_hmax)
                if m < 1:
                    m = 1
                h = (tb - ta) / m
                acc = 0.0
                for j in range(m):
                    mid = ta + (j + 0.5) * h
                    for q in range(4):
                        acc += GL_W[q] * _site_comp_rate(s, k, e, mid + 0.5 * h * GL_X[q])
                s.comp += 0.5 * h * acc
    s.last[k] = tb


def run(int n, long ell, counts0, double t_final, int b_code, b_par, int d_code, d_par,
        a, int t_code, double t_rate, int hflag, double window, bint record, snap_times,
        ref, double ref_dt, bint weights, long long budget, long long rebuild_every,
        double gl_hmax, bitgen):
    cdef Sim s
    cdef int k, j, c, i, si, n_snap
    cdef long long n_events = 0, n_rej = 0
    cdef double t = 0.0, total, horizon, u, t_next, target, g, ce, fd, w1, glo, ghi
    cdef double window_end, old, drift, max_drift = 0.0, event_sum = 0.0
    cdef int status = 0
    cdef long long cap = 0, n_rec = 0
    cdef double* ev_t = NULL
    cdef uint8_t* ev_k = NULL
    cdef uint32_t* ev_s = NULL
    cdef void* tmp

    cdef cnp.ndarray[int64_t, ndim=1] eta_arr = np.array(counts0, dtype=np.int64).copy()
    cdef cnp.ndarray[double, ndim=1] a_arr = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] work = np.ones((10, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] last_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] snap_arr = np.ascontiguousarray(snap_times, dtype=np.float64)
    n_snap = snap_arr.shape[0]
    cdef cnp.ndarray[int64_t, ndim=2] snaps = np.zeros((n_snap, n), dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] ref_arr
    if ref is None:
        ref_arr = np.zeros((0, n), dtype=np.float64)
    else:
        ref_arr = np.ascontiguousarray(ref, dtype=np.float64)

    s.n = n
    s.p = 1
    while s.p < n:
        s.p *= 2
    cdef cnp.ndarray[double, ndim=1] tree_arr = np.zeros(2 * s.p, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rate_arr = np.zeros(4 * n, dtype=np.float64)
    s.n2 = <double>n * <double>n
    s.ellf = <double>ell
    s.b_code = b_code
    s.b0 = float(b_par[0])
    s.b1 = float(b_par[1])
    s.d_code = d_code
    s.d0 = float(d_par[0])
    s.d1 = float(d_par[1])
    s.t_code = t_code
    s.t_rate = t_rate
    s.hflag = hflag
    s.eta = <int64_t*>eta_arr.data
    s.a = <double*>a_arr.data
    s.cR = <double*>work.data
    s.cL = s.cR + n
    s.cB = s.cR + 2 * n
    s.cD = s.cR + 3 * n
    s.fR = s.cR + 4 * n
    s.fL = s.cR + 5 * n
    s.fB = s.cR + 6 * n
    s.fD = s.cR + 7 * n
    s.rates = <double*>rate_arr.data
    s.tree = <double*>tree_arr.data
    s.last = <double*>last_arr.data
    s.n_ref = ref_arr.shape[0]
    s.track = s.n_ref > 1
    s.ref_dt = ref_dt
    s.ref = <double*>ref_arr.data
    s.comp_on = weights and hflag != 0
    s.gl_hmax = gl_hmax
    s.err = 0.0
    s.comp = 0.0
    capsule = bitgen.capsule
    s.rng = <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")
    cdef int64_t* snp = <int64_t*>snaps.data
    cdef double* st = <double*>snap_arr.data

    for k in range(n):
        s.cR[k] = s.a[(k + 1) % n] - s.a[k]
        s.cL[k] = s.a[(k - 1 + n) % n] - s.a[k]
        s.cB[k] = s.a[k]
        s.cD[k] = -s.a[k]
    if hflag == 1:
        for k in range(n):
            s.fR[k] = exp(s.cR[k])
            s.fL[k] = exp(s.cL[k])
            s.fB[k] = exp(s.cB[k])
            s.fD[k] = exp(s.cD[k])

    si = 0
    window_end = INFINITY
    if hflag == 2:
        window_end = 0.0
    else:
        _rebuild(&s)

    with nogil:
        while True:
            if hflag == 2 and t >= window_end:
                w1 = t + window
                _g_range(t_code, t_rate, t, w1, &glo, &ghi)
                for k in range(n):
                    s.fR[k] = _dom(s.cR[k], glo, ghi)
                    s.fL[k] = _dom(s.cL[k], glo, ghi)
                    s.fB[k] = _dom(s.cB[k], glo, ghi)
                    s.fD[k] = _dom(s.cD[k], glo, ghi)
                _rebuild(&s)
                window_end = w1
            total = s.tree[1]
            if not isfinite(total):
                status = 2
                break
            horizon = window_end if window_end < t_final else t_final
            u = _uniform(&s)
            if total > 0.0:
                t_next = t - log(1.0 - u) / total
            else:
                t_next = INFINITY
            if t_next > horizon:
                while si < n_snap and st[si] < horizon:
                    memcpy(snp + si * n, s.eta, n * sizeof(int64_t))
                    si += 1
                t = horizon
                if t >= t_final:
                    break
                continue
            while si < n_snap and st[si] < t_next:
                memcpy(snp + si * n, s.eta, n * sizeof(int64_t))
                si += 1
            t = t_next
            target = _uniform(&s) * total
            i = 1
            while i < s.p:
                if target < s.tree[2 * i]:
                    i = 2 * i
                else:
                    target -= s.tree[2 * i]
                    i = 2 * i + 1
            k = i - s.p
            if k >= n or s.tree[s.p + k] <= 0.0:
                k = n - 1
                while k > 0 and s.tree[s.p + k] <= 0.0:
                    k -= 1
            c = 0
            while c < 3 and target >= s.rates[4 * k + c]:
                target -= s.rates[4 * k + c]
                c += 1
            if s.rates[4 * k + c] <= 0.0:
                c = 3
                while c > 0 and s.rates[4 * k + c] <= 0.0:
                    c -= 1
            g = 1.0
            if hflag == 2:
                g = _g(t_code, t_rate, t)
                if c == 0:
                    ce = s.cR[k]
                    fd = s.fR[k]
                elif c == 1:
                    ce = s.cL[k]
                    fd = s.fL[k]
                elif c == 2:
                    ce = s.cB[k]
                    fd = s.fB[k]
                else:
                    ce = s.cD[k]
                    fd = s.fD[k]
                if _uniform(&s) * fd >= exp(g * ce):
                    n_rej += 1
                    continue
            if s.comp_on:
                if c == 0:
                    event_sum += g * (s.a[k] - s.a[(k + 1) % n])
                elif c == 1:
                    event_sum += g * (s.a[k] - s.a[(k - 1 + n) % n])
                elif c == 2:
                    event_sum += -g * s.a[k]
                else:
                    event_sum += g * s.a[k]
            _settle(&s, k, t)
            if c == 0 or c == 1:
                if c == 0:
                    j = (k + 1) % n
                else:
                    j = (k - 1 + n) % n
                _settle(&s, j, t)
                s.eta[k] -= 1
                s.eta[j] += 1
                _update(&s, k)
                _update(&s, j)
            elif c == 2:
                if s.eta[k] >= COUNT_LIMIT:
                    status = 3
                    break
                s.eta[k] += 1
                _update(&s, k)
            else:
                s.eta[k] -= 1
                _update(&s, k)
            if record:
                if n_rec == cap:
                    cap = 1024 if cap == 0 else 2 * cap
                    tmp = realloc(ev_t, cap * sizeof(double))
                    if tmp == NULL:
                        status = 4
                        break
                    ev_t = <double*>tmp
                    tmp = realloc(ev_k, cap * sizeof(uint8_t))
                    if tmp == NULL:
                        status = 4
                        break
                    ev_k = <uint8_t*>tmp
                    tmp = realloc(ev_s, cap * sizeof(uint32_t))
                    if tmp == NULL:
                        status = 4
                        break
                    ev_s = <uint32_t*>tmp
                ev_t[n_rec] = t
                ev_k[n_rec] = <uint8_t>c
                ev_s[n_rec] = <uint32_t>k
                n_rec += 1
            n_events += 1
            if n_events % rebuild_every == 0:
                old = s.tree[1]
                _rebuild(&s)
                if s.tree[1] > 0.0:
                    drift = fabs(old - s.tree[1]) / s.tree[1]
                    if drift > max_drift:
                        max_drift = drift
            if n_events >= budget:
                status = 1
                break

        while si < n_snap and st[si] <= t:
            memcpy(snp + si * n, s.eta, n * sizeof(int64_t))
            si += 1
        for k in range(n):
            _settle(&s, k, t)

    out_t = np.empty(n_rec, dtype=np.float64)
    out_k = np.empty(n_rec, dtype=np.uint8)
    out_s = np.empty(n_rec, dtype=np.uint32)
    if n_rec > 0:
        memcpy(cnp.PyArray_DATA(out_t), ev_t, n_rec * sizeof(double))
        memcpy(cnp.PyArray_DATA(out_k), ev_k, n_rec * sizeof(uint8_t))
        memcpy(cnp.PyArray_DATA(out_s), ev_s, n_rec * sizeof(uint32_t))
    free(ev_t)
    free(ev_k)
    free(ev_s)
    if status == 4:
        raise MemoryError("event log allocation failed")
    return {
        "counts": eta_arr,
        "t_end": t,
        "n_events": n_events,
        "n_rejected": n_rej,
        "ev_t": out_t,
        "ev_kind": out_k,
        "ev_site": out_s,
        "snaps": snaps[:si],
        "sup_err": s.err,
        "event_sum": event_sum,
        "compensator": s.comp,
        "max_drift": max_drift,
        "status": status,
    }
