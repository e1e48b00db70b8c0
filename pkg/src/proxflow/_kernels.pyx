# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""
Compiled integration loop for the mu = 1 system on built-in problems.

Handles prox kinds zero / l1 / huber / quadratic / box and couplings of
residual-square or general quadratic form. Mirrors ``_stepper.py`` step for
step; the GIL is released for the whole integration.
"""

from libc.math cimport fabs, sqrt, pow, isfinite, ceil, INFINITY
from libcpp.vector cimport vector

import numpy as np

cdef int ZERO = 0, L1 = 1, HUBER = 2, QUAD = 3, BOX = 4
cdef int RESIDUAL = 0, QUADRATIC = 1

cdef int ST_STATIONARY = 0, ST_TIME = 1, ST_ERROR = 2, ST_UNDERFLOW = 3

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784
cdef double B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Ctx:
    int n
    int m
    int fkind
    double f0
    double f1
    int gkind
    double g0
    double g1
    int ctype
    double w
    double b
    double* a
    double* Q
    double* q
    double a1
    double a2
    double lam
    double* xs


cdef inline double sgn(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return v


cdef inline double prox(int kind, double p0, double p1, double alpha, double t) noexcept nogil:
    cdef double r
    if kind == L1:
        r = fabs(t) - alpha
        if r < 0:
            r = 0.0
        return sgn(t) * r
    if kind == HUBER:
        if fabs(t) <= p0 * (1.0 + alpha):
            return t / (1.0 + alpha)
        return t - alpha * p0 * sgn(t)
    if kind == QUAD:
        return t / (1.0 + alpha * p0)
    if kind == BOX:
        if t < p0:
            return p0
        if t > p1:
            return p1
        return t
    return t


cdef inline double residual(Ctx* c, double* x, double* y) noexcept nogil:
    cdef double r = c.b
    cdef int i
    for i in range(c.n):
        r -= c.a[i] * x[i]
    for i in range(c.m):
        r -= c.a[c.n + i] * y[i]
    return r


cdef inline double quad_grad(Ctx* c, double* x, double* y, int row) noexcept nogil:
    cdef int j, N = c.n + c.m
    cdef double s = 0.0
    for j in range(c.n):
        s += c.Q[row * N + j] * x[j]
    for j in range(c.m):
        s += c.Q[row * N + c.n + j] * y[j]
    return s + c.q[row]


cdef int gamma_rhs(Ctx* c, double* z, double* out) noexcept nogil:
    cdef int i
    cdef double s, t, g
    cdef double* x = z
    cdef double* y = z + c.n
    if c.ctype == RESIDUAL:
        s = -2.0 * c.w * residual(c, x, y)
    for i in range(c.n):
        if c.ctype == RESIDUAL:
            g = s * c.a[i]
        else:
            g = quad_grad(c, x, y, i)
        t = x[i] - c.a1 * g
        out[i] = prox(c.fkind, c.f0, c.f1, c.a1, t) - x[i]
    for i in range(c.n):
        c.xs[i] = (1.0 - c.lam) * (out[i] + x[i]) + c.lam * x[i]
    if c.ctype == RESIDUAL:
        s = -2.0 * c.w * residual(c, c.xs, y)
    for i in range(c.m):
        if c.ctype == RESIDUAL:
            g = s * c.a[c.n + i]
        else:
            g = quad_grad(c, c.xs, y, c.n + i)
        t = y[i] - c.a2 * g
        out[c.n + i] = prox(c.gkind, c.g0, c.g1, c.a2, t) - y[i]
    for i in range(c.n + c.m):
        if not isfinite(out[i]):
            return 1
    return 0


cdef inline double norm2(double* v, int N) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(N):
        s += v[i] * v[i]
    return sqrt(s)


cdef inline void push(vector[double]& T, vector[double]& S, vector[double]& D,
                      double t, double* z, double* d, int N) noexcept nogil:
    cdef int i
    T.push_back(t)
    for i in range(N):
        S.push_back(z[i])
    for i in range(N):
        D.push_back(d[i])


cdef int run_fixed(Ctx* c, double* z, int rk4, double step, double t_max, double stol,
                   long every, vector[double]& T, vector[double]& S,
                   vector[double]& D) noexcept nogil:
    cdef int N = c.n + c.m, i
    cdef long k = 0, last = -1
    cdef long n_steps = <long> ceil(t_max / step - 1e-9)
    cdef double t = 0.0, t_next, h
    cdef vector[double] buf
    buf.resize(6 * N)
    cdef double* d = &buf[0]
    cdef double* k2 = d + N
    cdef double* k3 = d + 2 * N
    cdef double* k4 = d + 3 * N
    cdef double* tmp = d + 4 * N
    if gamma_rhs(c, z, d):
        return ST_ERROR
    while True:
        if norm2(d, N) < stol:
            if k != last:
                push(T, S, D, t, z, d, N)
            return ST_STATIONARY
        if k >= n_steps:
            if k != last:
                push(T, S, D, t, z, d, N)
            return ST_TIME
        if k % every == 0:
            push(T, S, D, t, z, d, N)
            last = k
        t_next = (k + 1) * step
        if t_next > t_max:
            t_next = t_max
        h = t_next - t
        if rk4 == 0:
            for i in range(N):
                z[i] = z[i] + h * d[i]
        else:
            for i in range(N):
                tmp[i] = z[i] + h / 2 * d[i]
            if gamma_rhs(c, tmp, k2):
                return ST_ERROR
            for i in range(N):
                tmp[i] = z[i] + h / 2 * k2[i]
            if gamma_rhs(c, tmp, k3):
                return ST_ERROR
            for i in range(N):
                tmp[i] = z[i] + h * k3[i]
            if gamma_rhs(c, tmp, k4):
                return ST_ERROR
            for i in range(N):
                z[i] = z[i] + h / 6 * (d[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
        t = t_next
        k += 1
        if gamma_rhs(c, z, d):
            return ST_ERROR


cdef inline double rms_scaled(double* v, double* z, double* zn, double rtol, double atol,
                              int N, int use_new) noexcept nogil:
    cdef double s = 0.0, sc, a
    cdef int i
    for i in range(N):
        a = fabs(z[i])
        if use_new and fabs(zn[i]) > a:
            a = fabs(zn[i])
        sc = atol + rtol * a
        s += (v[i] / sc) * (v[i] / sc)
    return sqrt(s / N)


cdef int run_adaptive(Ctx* c, double* z, double rtol, double atol, double t_max,
                      double stol, long every, double h_min, double h_max, vector[double]& T,
                      vector[double]& S, vector[double]& D) noexcept nogil:
    cdef int N = c.n + c.m, i, rejected = 0
    cdef long k = 0, last = -1
    cdef double t = 0.0, h = 0.0, d0, d1, d2, h0, h1, err, factor, t_new
    cdef vector[double] buf
    buf.resize(10 * N)
    cdef double* k1 = &buf[0]
    cdef double* k2 = k1 + N
    cdef double* k3 = k1 + 2 * N
    cdef double* k4 = k1 + 3 * N
    cdef double* k5 = k1 + 4 * N
    cdef double* k6 = k1 + 5 * N
    cdef double* k7 = k1 + 6 * N
    cdef double* tmp = k1 + 7 * N
    cdef double* zn = k1 + 8 * N
    cdef double* ev = k1 + 9 * N
    if gamma_rhs(c, z, k1):
        return ST_ERROR
    if norm2(k1, N) >= stol:
        d0 = rms_scaled(z, z, z, rtol, atol, N, 0)
        d1 = rms_scaled(k1, z, z, rtol, atol, N, 0)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        if h0 > t_max:
            h0 = t_max
        for i in range(N):
            tmp[i] = z[i] + h0 * k1[i]
        if gamma_rhs(c, tmp, k2):
            return ST_ERROR
        for i in range(N):
            ev[i] = k2[i] - k1[i]
        d2 = rms_scaled(ev, z, z, rtol, atol, N, 0) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = h0 * 1e-3
            if h1 < 1e-6:
                h1 = 1e-6
        else:
            h1 = pow(0.01 / (d1 if d1 > d2 else d2), 1.0 / 5)
        h = 100 * h0
        if h1 < h:
            h = h1
        if t_max < h:
            h = t_max
    while True:
        if norm2(k1, N) < stol:
            if k != last:
                push(T, S, D, t, z, k1, N)
            return ST_STATIONARY
        if t >= t_max:
            if k != last:
                push(T, S, D, t, z, k1, N)
            return ST_TIME
        if k % every == 0 and k != last:
            push(T, S, D, t, z, k1, N)
            last = k
        if h < h_min:
            return ST_UNDERFLOW
        if h > h_max:
            h = h_max
        if h > t_max - t:
            h = t_max - t
        for i in range(N):
            tmp[i] = z[i] + h * (A21 * k1[i])
        if gamma_rhs(c, tmp, k2):
            return ST_ERROR
        for i in range(N):
            tmp[i] = z[i] + h * (A31 * k1[i] + A32 * k2[i])
        if gamma_rhs(c, tmp, k3):
            return ST_ERROR
        for i in range(N):
            tmp[i] = z[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        if gamma_rhs(c, tmp, k4):
            return ST_ERROR
        for i in range(N):
            tmp[i] = z[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        if gamma_rhs(c, tmp, k5):
            return ST_ERROR
        for i in range(N):
            tmp[i] = z[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                 + A65 * k5[i])
        if gamma_rhs(c, tmp, k6):
            return ST_ERROR
        for i in range(N):
            zn[i] = z[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        if gamma_rhs(c, zn, k7):
            return ST_ERROR
        for i in range(N):
            ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                         + E7 * k7[i])
        err = rms_scaled(ev, z, zn, rtol, atol, N, 1)
        if err <= 1.0:
            if err == 0:
                factor = 5.0
            else:
                factor = 0.9 * pow(err, -0.2)
                if factor > 5.0:
                    factor = 5.0
            if rejected and factor > 1.0:
                factor = 1.0
            t_new = t + h
            if t_max - t_new < 1e-12 * (t_max if t_max > 1.0 else 1.0):
                t_new = t_max
            t = t_new
            for i in range(N):
                z[i] = zn[i]
                k1[i] = k7[i]
            h *= factor
            k += 1
            rejected = 0
        else:
            factor = 0.9 * pow(err, -0.2)
            if factor < 0.2:
                factor = 0.2
            h *= factor
            rejected = 1


def integrate_builtin(double[::1] z0, int n, int m,
                      int fkind, double f0, double f1, int gkind, double g0, double g1,
                      int ctype, double w, double b, double[::1] a,
                      double[::1] Q, double[::1] q,
                      double a1, double a2, double lam,
                      str method, double step, double rtol, double atol, double t_max,
                      double stationary_tol, long record_every, double h_min=1e-14,
                      double h_max=INFINITY):
    """Integrate the mu = 1 system; returns (times, states, derivs, status).

    status: 0 stationary, 1 time limit, 2 non-finite evaluation, 3 step underflow.
    """
    cdef int N = n + m
    cdef Ctx c
    cdef vector[double] T, S, D, xs_buf
    cdef int status
    cdef int mcode
    z = np.array(z0, dtype=np.float64, copy=True)
    cdef double[::1] zv = z
    xs_buf.resize(n)
    c.n = n
    c.m = m
    c.fkind = fkind
    c.f0 = f0
    c.f1 = f1
    c.gkind = gkind
    c.g0 = g0
    c.g1 = g1
    c.ctype = ctype
    c.w = w
    c.b = b
    c.a = &a[0] if a.shape[0] > 0 else NULL
    c.Q = &Q[0] if Q.shape[0] > 0 else NULL
    c.q = &q[0] if q.shape[0] > 0 else NULL
    c.a1 = a1
    c.a2 = a2
    c.lam = lam
    c.xs = &xs_buf[0]
    if method == "euler":
        mcode = 0
    elif method == "rk4":
        mcode = 1
    elif method == "adaptive":
        mcode = 2
    else:
        raise ValueError(f"unknown method {method!r}")
    with nogil:
        if mcode == 2:
            status = run_adaptive(&c, &zv[0], rtol, atol, t_max, stationary_tol,
                                  record_every, h_min, h_max, T, S, D)
        else:
            status = run_fixed(&c, &zv[0], mcode, step, t_max, stationary_tol,
                               record_every, T, S, D)
    k = T.size()
    times = np.array([T[i] for i in range(k)], dtype=np.float64)
    states = np.asarray(<double[:k * N]> S.data()).copy().reshape(k, N) if k else np.empty((0, N))
    derivs = np.asarray(<double[:k * N]> D.data()).copy().reshape(k, N) if k else np.empty((0, N))
    return times, states, derivs, status
