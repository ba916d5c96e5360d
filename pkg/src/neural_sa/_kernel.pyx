# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout kernel.

Mirrors `_kernel_py` operation for operation: same sequential accumulation in
the MLPs, same libm calls, same RNG draw order (uniforms pulled one at a time
from the numpy BitGenerator), so both backends produce bit-identical
trajectories. Any behavioural change here must be applied to `_kernel_py`
as well; `tests/test_backend_parity.py` enforces the match.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport cos, exp, log, sin, sqrt, M_PI
from numpy.random cimport bitgen_t

cnp.import_array()

ctypedef cnp.int32_t i32
ctypedef cnp.uint8_t u8

cdef double TEMP_FLOOR = 1e-300
cdef double TWO_PI = 2.0 * M_PI
cdef double LOG_2PI = log(2.0 * M_PI)
cdef double SIGMA_CLAMP_LO = -10.0
cdef double SIGMA_CLAMP_HI = 3.0


cdef bitgen_t* _bitgen(object rng):
    """Extract the C interface from a numpy Generator."""
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline void _logits(double[:, ::1] F, Py_ssize_t n, Py_ssize_t d,
                         double[:, ::1] w1, double[::1] b1,
                         double[:, ::1] w2, double[::1] b2,
                         double[::1] z) noexcept nogil:
    cdef Py_ssize_t r, h, t
    cdef Py_ssize_t H = w1.shape[0]
    cdef double val, zz
    for r in range(n):
        zz = b2[0]
        for h in range(H):
            val = b1[h]
            for t in range(d):
                val += F[r, t] * w1[h, t]
            if val < 0.0:
                val = 0.0
            zz += val * w2[0, h]
        z[r] = zz


cdef inline Py_ssize_t _choose(Py_ssize_t n, double[::1] z, u8[::1] m, bint use_mask,
                               bint greedy, bitgen_t* bg,
                               double[::1] e, double[::1] p,
                               double* logp_out) noexcept nogil:
    cdef Py_ssize_t i, idx, last_pos
    cdef double zmax, s, u, c, best
    cdef bint started = False
    for i in range(n):
        if (not use_mask) or m[i]:
            if (not started) or z[i] > zmax:
                zmax = z[i]
                started = True
    s = 0.0
    for i in range(n):
        if (not use_mask) or m[i]:
            e[i] = exp(z[i] - zmax)
        else:
            e[i] = 0.0
        s += e[i]
    for i in range(n):
        p[i] = e[i] / s
    if greedy:
        idx = 0
        best = p[0]
        for i in range(1, n):
            if p[i] > best:
                best = p[i]
                idx = i
    else:
        u = bg.next_double(bg.state)
        c = 0.0
        idx = -1
        last_pos = -1
        for i in range(n):
            c += p[i]
            if p[i] > 0.0:
                last_pos = i
            if c > u:
                idx = i
                break
        if idx < 0:
            idx = last_pos
    logp_out[0] = log(p[idx])
    return idx


cdef inline bint _mh(double delta, double T, bitgen_t* bg) noexcept nogil:
    cdef double u = bg.next_double(bg.state)
    cdef double x
    if T < TEMP_FLOOR:
        return delta <= 0.0
    x = -delta / T
    if x >= 0.0:
        return True
    return u < exp(x)


def anneal_knapsack(double[::1] w, double[::1] v, double cap,
                    double[::1] temps, double t_final, int greedy, int train,
                    double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
                    object rng,
                    u8[::1] bits, double total_w, double e_init,
                    i32[::1] act1, double[::1] e0, double[::1] e1,
                    u8[::1] acc, double[::1] logp, double[::1] rew,
                    double[:, :, ::1] feat1, u8[:, ::1] mask1, double[:, ::1] featT,
                    u8[::1] best_bits):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t K = temps.shape[0]
    cdef bitgen_t* bg = _bitgen(rng)
    scratch = np.empty((4, n))
    cdef double[:, ::1] sc = scratch
    mbuf = np.zeros(n, dtype=np.uint8)
    cdef u8[::1] m = mbuf
    fbuf = np.empty((n, 5))
    cdef double[:, ::1] F = fbuf
    cdef double energy = e_init, best = e_init, T, delta, lp
    cdef Py_ssize_t k, i, idx, n_acc = 0, n_un
    cdef long fail = -1
    cdef bint ok
    with nogil:
        for i in range(n):
            F[i, 1] = w[i]
            F[i, 2] = v[i]
            F[i, 3] = cap
        for k in range(K):
            T = temps[k]
            n_un = 0
            for i in range(n):
                F[i, 0] = bits[i]
                F[i, 4] = T
                if bits[i] == 1 or total_w + w[i] <= cap:
                    m[i] = 1
                    n_un += 1
                else:
                    m[i] = 0
            if n_un == 0:
                fail = k
                break
            _logits(F, n, 5, w1, b1, w2, b2, sc[0])
            idx = _choose(n, sc[0], m, True, greedy, bg, sc[1], sc[2], &lp)
            if bits[idx]:
                delta = v[idx]
            else:
                delta = -v[idx]
            ok = _mh(delta, T, bg)
            if train:
                for i in range(n):
                    feat1[k, i, 0] = F[i, 0]
                    feat1[k, i, 1] = F[i, 1]
                    feat1[k, i, 2] = F[i, 2]
                    feat1[k, i, 3] = F[i, 3]
                    feat1[k, i, 4] = F[i, 4]
                    mask1[k, i] = m[i]
            act1[k] = <i32> idx
            e0[k] = energy
            logp[k] = lp
            if ok:
                n_acc += 1
                if bits[idx]:
                    bits[idx] = 0
                    total_w -= w[idx]
                else:
                    bits[idx] = 1
                    total_w += w[idx]
                energy += delta
                if energy < best:
                    best = energy
                    for i in range(n):
                        best_bits[i] = bits[i]
            acc[k] = ok
            e1[k] = energy
            rew[k] = e0[k] - e1[k]
        if fail < 0 and train:
            for i in range(n):
                featT[i, 0] = bits[i]
                featT[i, 1] = w[i]
                featT[i, 2] = v[i]
                featT[i, 3] = cap
                featT[i, 4] = t_final
    return best, energy, n_acc, fail


def anneal_binpacking(double[::1] w, double cap,
                      double[::1] temps, double t_final, int greedy, int train,
                      double[:, ::1] iw1, double[::1] ib1, double[:, ::1] iw2, double[::1] ib2,
                      double[:, ::1] bw1, double[::1] bb1, double[:, ::1] bw2, double[::1] bb2,
                      object rng,
                      i32[::1] bin_of, i32[::1] counts, double[::1] free, long occupied,
                      i32[::1] act1, i32[::1] act2, double[::1] e0, double[::1] e1,
                      u8[::1] acc, u8[::1] aux, double[::1] logp, double[::1] rew,
                      double[:, :, ::1] feat1, double[:, :, ::1] feat2, u8[:, ::1] mask2,
                      double[:, ::1] featT, i32[::1] best_bin):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t K = temps.shape[0]
    cdef bitgen_t* bg = _bitgen(rng)
    scratch = np.empty((4, n))
    cdef double[:, ::1] sc = scratch
    m2buf = np.zeros(n, dtype=np.uint8)
    cdef u8[::1] m2 = m2buf
    f1buf = np.empty((n, 3))
    cdef double[:, ::1] F1 = f1buf
    f2buf = np.empty((n, 3))
    cdef double[:, ::1] F2 = f2buf
    cdef double energy = <double> occupied, best = <double> occupied
    cdef double T, delta, lp, lp2, wi
    cdef Py_ssize_t k, i, j, q, src, n_acc = 0, n_un
    cdef long delta_i
    cdef bint ok
    with nogil:
        for q in range(n):
            F1[q, 0] = w[q]
        for k in range(K):
            T = temps[k]
            for q in range(n):
                F1[q, 1] = free[bin_of[q]]
                F1[q, 2] = T
            _logits(F1, n, 3, iw1, ib1, iw2, ib2, sc[0])
            i = _choose(n, sc[0], m2, False, greedy, bg, sc[1], sc[2], &lp)
            n_un = 0
            for q in range(n):
                if free[q] >= w[i]:
                    m2[q] = 1
                    n_un += 1
                else:
                    m2[q] = 0
            if m2[bin_of[i]]:
                m2[bin_of[i]] = 0
                n_un -= 1
            for q in range(n):
                F2[q, 0] = w[i]
                F2[q, 1] = free[q]
                F2[q, 2] = T
            if train:
                for q in range(n):
                    feat1[k, q, 0] = F1[q, 0]
                    feat1[k, q, 1] = F1[q, 1]
                    feat1[k, q, 2] = F1[q, 2]
                    feat2[k, q, 0] = F2[q, 0]
                    feat2[k, q, 1] = F2[q, 1]
                    feat2[k, q, 2] = F2[q, 2]
                    mask2[k, q] = m2[q]
            act1[k] = <i32> i
            e0[k] = energy
            if n_un == 0:
                aux[k] = 1
                logp[k] = lp
                e1[k] = energy
                rew[k] = 0.0
                continue
            _logits(F2, n, 3, bw1, bb1, bw2, bb2, sc[0])
            j = _choose(n, sc[0], m2, True, greedy, bg, sc[1], sc[2], &lp2)
            lp += lp2
            src = bin_of[i]
            delta_i = 0
            if counts[src] == 1:
                delta_i -= 1
            if counts[j] == 0:
                delta_i += 1
            delta = <double> delta_i
            ok = _mh(delta, T, bg)
            act2[k] = <i32> j
            logp[k] = lp
            if ok:
                n_acc += 1
                wi = w[i]
                counts[src] -= 1
                if counts[src] == 0:
                    free[src] = cap
                    occupied -= 1
                else:
                    free[src] += wi
                if counts[j] == 0:
                    free[j] = cap - wi
                    occupied += 1
                else:
                    free[j] -= wi
                counts[j] += 1
                bin_of[i] = <i32> j
                energy = <double> occupied
                if energy < best:
                    best = energy
                    for q in range(n):
                        best_bin[q] = bin_of[q]
            acc[k] = ok
            e1[k] = energy
            rew[k] = e0[k] - e1[k]
        if train:
            for q in range(n):
                featT[q, 0] = w[q]
                featT[q, 1] = free[bin_of[q]]
                featT[q, 2] = t_final
    return best, energy, n_acc, -1


cdef inline double _dist(double[:, ::1] coords, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double dx = coords[a, 0] - coords[b, 0]
    cdef double dy = coords[a, 1] - coords[b, 1]
    return sqrt(dx * dx + dy * dy)


cdef inline void _reverse_segment(i32[::1] order, i32[::1] pos, Py_ssize_t n,
                                  Py_ssize_t pi, Py_ssize_t pj) noexcept nogil:
    cdef Py_ssize_t inner = (pj - pi + n) % n
    cdef Py_ssize_t lo, hi, seg, k, a, b
    cdef i32 ca, cb
    if inner <= n - inner:
        lo = (pi + 1) % n
        hi = pj
        seg = inner
    else:
        lo = (pj + 1) % n
        hi = pi
        seg = n - inner
    for k in range(seg // 2):
        a = (lo + k) % n
        b = (hi - k + n) % n
        ca = order[a]
        cb = order[b]
        order[a] = cb
        order[b] = ca
        pos[ca] = <i32> b
        pos[cb] = <i32> a


def anneal_tsp(double[:, ::1] coords,
               double[::1] temps, double t_final, int greedy, int train,
               double[:, ::1] sw1, double[::1] sb1, double[:, ::1] sw2, double[::1] sb2,
               double[:, ::1] ew1, double[::1] eb1, double[:, ::1] ew2, double[::1] eb2,
               object rng,
               i32[::1] order, i32[::1] pos, double length,
               i32[::1] act1, i32[::1] act2, double[::1] e0, double[::1] e1,
               u8[::1] acc, double[::1] logp, double[::1] rew,
               double[:, :, ::1] feat1, double[:, :, ::1] feat2, u8[:, ::1] mask2,
               double[:, ::1] featT, i32[::1] best_order):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t K = temps.shape[0]
    cdef bitgen_t* bg = _bitgen(rng)
    scratch = np.empty((4, n))
    cdef double[:, ::1] sc = scratch
    m2buf = np.zeros(n, dtype=np.uint8)
    cdef u8[::1] m2 = m2buf
    f1buf = np.empty((n, 7))
    cdef double[:, ::1] F1 = f1buf
    f2buf = np.empty((n, 13))
    cdef double[:, ::1] F2 = f2buf
    cdef double energy = length, best = length
    cdef double T, delta, lp, lp2, dij, dst, dis, djt
    cdef Py_ssize_t k, q, i, j, s, t, pi, pr_i, sc_i, n_acc = 0
    cdef bint ok
    with nogil:
        for k in range(K):
            T = temps[k]
            for q in range(n):
                pi = pos[q]
                pr_i = order[(pi + n - 1) % n]
                sc_i = order[(pi + 1) % n]
                F1[q, 0] = coords[pr_i, 0]
                F1[q, 1] = coords[pr_i, 1]
                F1[q, 2] = coords[q, 0]
                F1[q, 3] = coords[q, 1]
                F1[q, 4] = coords[sc_i, 0]
                F1[q, 5] = coords[sc_i, 1]
                F1[q, 6] = T
            _logits(F1, n, 7, sw1, sb1, sw2, sb2, sc[0])
            i = _choose(n, sc[0], m2, False, greedy, bg, sc[1], sc[2], &lp)
            for q in range(n):
                F2[q, 0] = F1[i, 0]
                F2[q, 1] = F1[i, 1]
                F2[q, 2] = F1[i, 2]
                F2[q, 3] = F1[i, 3]
                F2[q, 4] = F1[i, 4]
                F2[q, 5] = F1[i, 5]
                F2[q, 6] = F1[q, 0]
                F2[q, 7] = F1[q, 1]
                F2[q, 8] = F1[q, 2]
                F2[q, 9] = F1[q, 3]
                F2[q, 10] = F1[q, 4]
                F2[q, 11] = F1[q, 5]
                F2[q, 12] = T
                m2[q] = 1
            pi = pos[i]
            m2[i] = 0
            m2[order[(pi + n - 1) % n]] = 0
            m2[order[(pi + 1) % n]] = 0
            _logits(F2, n, 13, ew1, eb1, ew2, eb2, sc[0])
            j = _choose(n, sc[0], m2, True, greedy, bg, sc[1], sc[2], &lp2)
            lp += lp2
            s = order[(pos[i] + 1) % n]
            t = order[(pos[j] + 1) % n]
            dij = _dist(coords, i, j)
            dst = _dist(coords, s, t)
            dis = _dist(coords, i, s)
            djt = _dist(coords, j, t)
            delta = dij + dst - dis - djt
            ok = _mh(delta, T, bg)
            if train:
                for q in range(n):
                    feat1[k, q, 0] = F1[q, 0]
                    feat1[k, q, 1] = F1[q, 1]
                    feat1[k, q, 2] = F1[q, 2]
                    feat1[k, q, 3] = F1[q, 3]
                    feat1[k, q, 4] = F1[q, 4]
                    feat1[k, q, 5] = F1[q, 5]
                    feat1[k, q, 6] = F1[q, 6]
                    feat2[k, q, 0] = F2[q, 0]
                    feat2[k, q, 1] = F2[q, 1]
                    feat2[k, q, 2] = F2[q, 2]
                    feat2[k, q, 3] = F2[q, 3]
                    feat2[k, q, 4] = F2[q, 4]
                    feat2[k, q, 5] = F2[q, 5]
                    feat2[k, q, 6] = F2[q, 6]
                    feat2[k, q, 7] = F2[q, 7]
                    feat2[k, q, 8] = F2[q, 8]
                    feat2[k, q, 9] = F2[q, 9]
                    feat2[k, q, 10] = F2[q, 10]
                    feat2[k, q, 11] = F2[q, 11]
                    feat2[k, q, 12] = F2[q, 12]
                    mask2[k, q] = m2[q]
            act1[k] = <i32> i
            act2[k] = <i32> j
            e0[k] = energy
            logp[k] = lp
            if ok:
                n_acc += 1
                _reverse_segment(order, pos, n, pos[i], pos[j])
                energy += delta
                if energy < best:
                    best = energy
                    for q in range(n):
                        best_order[q] = order[q]
            acc[k] = ok
            e1[k] = energy
            rew[k] = e0[k] - e1[k]
        if train:
            for q in range(n):
                pi = pos[q]
                pr_i = order[(pi + n - 1) % n]
                sc_i = order[(pi + 1) % n]
                featT[q, 0] = coords[pr_i, 0]
                featT[q, 1] = coords[pr_i, 1]
                featT[q, 2] = coords[q, 0]
                featT[q, 3] = coords[q, 1]
                featT[q, 4] = coords[sc_i, 0]
                featT[q, 5] = coords[sc_i, 1]
                featT[q, 6] = t_final
    return best, energy, n_acc, -1


cdef inline double _rosen(double a, double b, double x0, double x1) noexcept nogil:
    cdef double dx = a - x0
    cdef double t = x1 - x0 * x0
    return dx * dx + b * (t * t)


cdef inline double _clamp(double q) noexcept nogil:
    if q < SIGMA_CLAMP_LO:
        return SIGMA_CLAMP_LO
    if q > SIGMA_CLAMP_HI:
        return SIGMA_CLAMP_HI
    return q


def anneal_rosenbrock(double a_par, double b_par,
                      double[::1] temps, double t_final, int greedy, int train,
                      double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
                      object rng, double x0, double x1,
                      double[:, ::1] act_r, double[::1] e0, double[::1] e1,
                      u8[::1] acc, double[::1] logp, double[::1] rew,
                      double[:, :, ::1] feat1, double[:, ::1] featT, double[::1] best_x):
    cdef Py_ssize_t K = temps.shape[0]
    cdef Py_ssize_t H = w1.shape[0]
    cdef bitgen_t* bg = _bitgen(rng)
    hbuf = np.empty(H)
    cdef double[::1] hid = hbuf
    cdef double energy = _rosen(a_par, b_par, x0, x1)
    cdef double best = energy
    cdef double T, q0, q1, s0, s1, u1, u2, r, th, a0, a1, za0, za1, lp
    cdef double nx0, nx1, e_new, delta
    cdef Py_ssize_t k, t, n_acc = 0
    cdef bint ok
    best_x[0] = x0
    best_x[1] = x1
    with nogil:
        for k in range(K):
            T = temps[k]
            for t in range(H):
                hid[t] = b1[t] + w1[t, 0] * x0 + w1[t, 1] * x1
                if hid[t] < 0.0:
                    hid[t] = 0.0
            q0 = b2[0]
            q1 = b2[1]
            for t in range(H):
                q0 += w2[0, t] * hid[t]
                q1 += w2[1, t] * hid[t]
            q0 = _clamp(q0)
            q1 = _clamp(q1)
            s0 = exp(q0)
            s1 = exp(q1)
            if greedy:
                a0 = 0.0
                a1 = 0.0
            else:
                u1 = bg.next_double(bg.state)
                u2 = bg.next_double(bg.state)
                r = sqrt(-2.0 * log(1.0 - u1))
                th = TWO_PI * u2
                a0 = s0 * (r * cos(th))
                a1 = s1 * (r * sin(th))
            za0 = a0 / s0
            za1 = a1 / s1
            lp = (-0.5 * za0 * za0 - log(s0) - 0.5 * LOG_2PI) \
                + (-0.5 * za1 * za1 - log(s1) - 0.5 * LOG_2PI)
            nx0 = x0 + a0
            nx1 = x1 + a1
            e_new = _rosen(a_par, b_par, nx0, nx1)
            delta = e_new - energy
            ok = _mh(delta, T, bg)
            if train:
                feat1[k, 0, 0] = x0
                feat1[k, 0, 1] = x1
            act_r[k, 0] = a0
            act_r[k, 1] = a1
            e0[k] = energy
            logp[k] = lp
            if ok:
                n_acc += 1
                x0 = nx0
                x1 = nx1
                energy = e_new
                if energy < best:
                    best = energy
                    best_x[0] = x0
                    best_x[1] = x1
            acc[k] = ok
            e1[k] = energy
            rew[k] = e0[k] - e1[k]
        if train:
            featT[0, 0] = x0
            featT[0, 1] = x1
    return best, energy, n_acc, -1, x0, x1
