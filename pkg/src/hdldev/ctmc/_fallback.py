"""Pure-Python twin of the compiled event loop.

The control flow, random-number consumption and floating-point operation
order mirror ``_kernel.pyx`` line by line so that both produce identical
trajectories from the same bit generator.
"""
import math

import numpy as np

GL_X = (-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526)
GL_W = (0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538)
INV_2_53 = 1.0 / 9007199254740992.0
COUNT_LIMIT = 1 << 62

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_NONFINITE = 2
STATUS_OVERFLOW = 3


class _Raw:
    """Buffered access to the raw 64-bit outputs of a numpy bit generator."""

    def __init__(self, bitgen, chunk=4096):
        self.bitgen = bitgen
        self.chunk = chunk
        self.buf = []
        self.pos = 0

    def uniform(self):
        if self.pos == len(self.buf):
            self.buf = self.bitgen.random_raw(self.chunk).tolist()
            self.pos = 0
        x = self.buf[self.pos]
        self.pos += 1
        return (x >> 11) * INV_2_53


def _rate(code, p0, p1, u):
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


def _g(code, rate, t):
    if code == 0:
        return 1.0
    if code == 1:
        return 1.0 + rate * t
    return math.cos(rate * t)


def _g_range(code, rate, t0, t1):
    a = _g(code, rate, t0)
    b = _g(code, rate, t1)
    lo = a if a < b else b
    hi = b if a < b else a
    if code == 2 and rate != 0.0:
        w = abs(rate)
        j = math.ceil(t0 * w / math.pi)
        while j * math.pi / w <= t1:
            v = 1.0 if j % 2 == 0 else -1.0
            if v < lo:
                lo = v
            if v > hi:
                hi = v
            j += 1
    return lo, hi


def _dom(c, glo, ghi):
    x = math.exp(glo * c)
    y = math.exp(ghi * c)
    return x if x > y else y


def run(n, ell, counts0, t_final, b_code, b_par, d_code, d_par, a, t_code, t_rate,
        hflag, window, record, snap_times, ref, ref_dt, weights, budget,
        rebuild_every, gl_hmax, bitgen):
    rng = _Raw(bitgen)
    n2 = float(n) * float(n)
    ellf = float(ell)
    b0, b1 = float(b_par[0]), float(b_par[1])
    d0, d1 = float(d_par[0]), float(d_par[1])
    a = [float(v) for v in a]
    eta = [int(v) for v in counts0]
    cR = [a[(k + 1) % n] - a[k] for k in range(n)]
    cL = [a[(k - 1) % n] - a[k] for k in range(n)]
    cB = [a[k] for k in range(n)]
    cD = [-a[k] for k in range(n)]
    # per-site channel factors (dominating factors when thinning)
    fR = [1.0] * n
    fL = [1.0] * n
    fB = [1.0] * n
    fD = [1.0] * n
    if hflag == 1:
        for k in range(n):
            fR[k] = math.exp(cR[k])
            fL[k] = math.exp(cL[k])
            fB[k] = math.exp(cB[k])
            fD[k] = math.exp(cD[k])

    p = 1
    while p < n:
        p *= 2
    tree = [0.0] * (2 * p)
    rates = [[0.0, 0.0, 0.0, 0.0] for _ in range(n)]

    def site_rates(k):
        e = eta[k]
        u = e / ellf
        r = rates[k]
        r[0] = n2 * e * fR[k]
        r[1] = n2 * e * fL[k]
        r[2] = ellf * _rate(b_code, b0, b1, u) * fB[k]
        r[3] = ellf * _rate(d_code, d0, d1, u) * fD[k]
        return ((r[0] + r[1]) + r[2]) + r[3]

    def update(k):
        i = p + k
        tree[i] = site_rates(k)
        i //= 2
        while i >= 1:
            tree[i] = tree[2 * i] + tree[2 * i + 1]
            i //= 2

    def rebuild():
        for k in range(n):
            tree[p + k] = site_rates(k)
        for i in range(p - 1, 0, -1):
            tree[i] = tree[2 * i] + tree[2 * i + 1]

    track = ref is not None and len(ref) > 1
    n_ref = len(ref) if track else 0
    comp_on = weights and hflag != 0
    last = [0.0] * n
    state = {"err": 0.0, "comp": 0.0}

    def ref_at(i_site, s):
        i = int(math.floor(s / ref_dt))
        if i > n_ref - 2:
            i = n_ref - 2
        if i < 0:
            i = 0
        frac = (s - i * ref_dt) / ref_dt
        return ref[i][i_site] * (1.0 - frac) + ref[i + 1][i_site] * frac

    def site_comp_rate(k, e, s):
        g = _g(t_code, t_rate, s)
        u = e / ellf
        return (ellf * _rate(b_code, b0, b1, u) * (1.0 - math.exp(g * cB[k]))
                + ellf * _rate(d_code, d0, d1, u) * (1.0 - math.exp(g * cD[k]))
                + n2 * e * (2.0 - math.exp(g * cR[k]) - math.exp(g * cL[k])))

    def settle(k, tb):
        ta = last[k]
        if tb > ta:
            e = eta[k]
            if track:
                x = e / ellf
                err = state["err"]
                v = abs(x - ref_at(k, ta))
                if v > err:
                    err = v
                v = abs(x - ref_at(k, tb))
                if v > err:
                    err = v
                i = int(math.floor(ta / ref_dt)) + 1
                while i < n_ref and i * ref_dt < tb:
                    v = abs(x - ref[i][k])
                    if v > err:
                        err = v
                    i += 1
                state["err"] = err
            if comp_on:
                if hflag == 1:
                    u = e / ellf
                    c = (ellf * _rate(b_code, b0, b1, u) * (1.0 - fB[k])
                         + ellf * _rate(d_code, d0, d1, u) * (1.0 - fD[k])
                         + n2 * e * (2.0 - fR[k] - fL[k]))
                    state["comp"] += c * (tb - ta)
                else:
                    m = int(math.ceil((tb - ta) / gl_hmax))
                    if m < 1:
                        m = 1
                    h = (tb - ta) / m
                    acc = 0.0
                    for j in range(m):
                        mid = ta + (j + 0.5) * h
                        for q in range(4):
                            acc += GL_W[q] * site_comp_rate(k, e, mid + 0.5 * h * GL_X[q])
                    state["comp"] += 0.5 * h * acc
        last[k] = tb

    ev_t, ev_k, ev_s = [], [], []
    n_snap = len(snap_times)
    snaps = np.zeros((n_snap, n), dtype=np.int64)
    si = 0
    t = 0.0
    n_events = 0
    n_rej = 0
    max_drift = 0.0
    event_sum = 0.0
    status = STATUS_OK
    window_end = math.inf
    if hflag == 2:
        window_end = 0.0  # forces a window set-up on the first pass
    else:
        rebuild()

    while True:
        if hflag == 2 and t >= window_end:
            w1 = t + window
            glo, ghi = _g_range(t_code, t_rate, t, w1)
            for k in range(n):
                fR[k] = _dom(cR[k], glo, ghi)
                fL[k] = _dom(cL[k], glo, ghi)
                fB[k] = _dom(cB[k], glo, ghi)
                fD[k] = _dom(cD[k], glo, ghi)
            rebuild()
            window_end = w1
        total = tree[1]
        if not math.isfinite(total):
            status = STATUS_NONFINITE
            break
        horizon = window_end if window_end < t_final else t_final
        u = rng.uniform()
        if total > 0.0:
            t_next = t - math.log(1.0 - u) / total
        else:
            t_next = math.inf
        if t_next > horizon:
            while si < n_snap and snap_times[si] < horizon:
                snaps[si] = eta
                si += 1
            t = horizon
            if t >= t_final:
                break
            continue
        while si < n_snap and snap_times[si] < t_next:
            snaps[si] = eta
            si += 1
        t = t_next
        target = rng.uniform() * total
        i = 1
        while i < p:
            if target < tree[2 * i]:
                i = 2 * i
            else:
                target -= tree[2 * i]
                i = 2 * i + 1
        k = i - p
        if k >= n or tree[p + k] <= 0.0:
            k = n - 1
            while k > 0 and tree[p + k] <= 0.0:
                k -= 1
        r = rates[k]
        c = 0
        while c < 3 and target >= r[c]:
            target -= r[c]
            c += 1
        if r[c] <= 0.0:
            c = 3
            while c > 0 and r[c] <= 0.0:
                c -= 1
        g = 1.0
        if hflag == 2:
            g = _g(t_code, t_rate, t)
            if c == 0:
                ce, fd = cR[k], fR[k]
            elif c == 1:
                ce, fd = cL[k], fL[k]
            elif c == 2:
                ce, fd = cB[k], fB[k]
            else:
                ce, fd = cD[k], fD[k]
            if rng.uniform() * fd >= math.exp(g * ce):
                n_rej += 1
                continue
        if comp_on:
            if c == 0:
                event_sum += g * (a[k] - a[(k + 1) % n])
            elif c == 1:
                event_sum += g * (a[k] - a[(k - 1) % n])
            elif c == 2:
                event_sum += -g * a[k]
            else:
                event_sum += g * a[k]
        settle(k, t)
        if c == 0 or c == 1:
            j = (k + 1) % n if c == 0 else (k - 1) % n
            settle(j, t)
            eta[k] -= 1
            eta[j] += 1
            update(k)
            update(j)
        elif c == 2:
            if eta[k] >= COUNT_LIMIT:
                status = STATUS_OVERFLOW
                break
            eta[k] += 1
            update(k)
        else:
            eta[k] -= 1
            update(k)
        if record:
            ev_t.append(t)
            ev_k.append(c)
            ev_s.append(k)
        n_events += 1
        if n_events % rebuild_every == 0:
            old = tree[1]
            rebuild()
            if tree[1] > 0.0:
                drift = abs(old - tree[1]) / tree[1]
                if drift > max_drift:
                    max_drift = drift
        if n_events >= budget:
            status = STATUS_BUDGET
            break

    t_end = t
    while si < n_snap and snap_times[si] <= t_end:
        snaps[si] = eta
        si += 1
    for k in range(n):
        settle(k, t_end)
    return {
        "counts": np.array(eta, dtype=np.int64),
        "t_end": t_end,
        "n_events": n_events,
        "n_rejected": n_rej,
        "ev_t": np.array(ev_t, dtype=np.float64),
        "ev_kind": np.array(ev_k, dtype=np.uint8),
        "ev_site": np.array(ev_s, dtype=np.uint32),
        "snaps": snaps[:si],
        "sup_err": state["err"],
        "event_sum": event_sum,
        "compensator": state["comp"],
        "max_drift": max_drift,
        "status": status,
    }
