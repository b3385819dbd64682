# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled compute kernels.

Same contract as ``abpaths._kernels_py`` (the pure-Python reference);
see that module for algorithm notes.  The test suite runs the kernel
contract against both backends.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport (INFINITY, atan2, ceil, cos, exp, hypot, lgamma,
                        log, sin, tgamma)

cnp.import_array()

cdef double _RESCALE_AT = 1e250
cdef double _LN_UNDERFLOW = -700.0
cdef double _EPS = 2.22e-16


cdef inline double _cabs(double complex z):
    return hypot(z.real, z.imag)


cdef inline double complex _cexp(double complex z):
    cdef double e = exp(z.real)
    return e * cos(z.imag) + 1j * (e * sin(z.imag))


cdef inline double complex _clog(double complex z):
    return log(_cabs(z)) + 1j * atan2(z.imag, z.real)


cdef inline double complex _cpow(double complex z, double p):
    return _cexp(p * _clog(z))


def ascending_series(double nu, double complex z, double tol=1e-300,
                     int max_terms=600):
    """Ascending power series for I_nu(z); see the reference backend."""
    cdef double complex ln_pref, pref, q, term, total
    cdef double max_mag, m, denom, est
    cdef int k
    if z == 0:
        if nu == 0:
            return (1.0 + 0.0j, 0.0)
        return (0.0 + 0.0j, 0.0)
    ln_pref = nu * _clog(z / 2.0) - lgamma(nu + 1.0)
    if ln_pref.real < _LN_UNDERFLOW:
        return (0.0 + 0.0j, 1.0)
    pref = _cexp(ln_pref)
    q = z * z / 4.0
    term = 1.0 + 0.0j
    total = term
    max_mag = 1.0
    k = 0
    while k < max_terms:
        k += 1
        term = term * q / (k * (nu + k))
        total = total + term
        m = _cabs(term)
        if m > max_mag:
            max_mag = m
        denom = _cabs(total)
        if denom < 1e-300:
            denom = 1e-300
        if m <= tol * denom:
            break
    denom = _cabs(total)
    if denom < 1e-300:
        denom = 1e-300
    est = (max_mag / denom) * _EPS * (k + 2) + _cabs(term) / denom
    return pref * total, est


def miller_ladder(double nu0, Py_ssize_t n, double complex z):
    """I_{nu0+k}(z), k = 0..n-1, by downward recurrence; see reference."""
    cdef double az, inv, max_mag_e, max_mag_a, c, sign, t_abs, cond
    cdef double cond_e, cond_a, mag
    cdef double complex t_hi, t_md, t_lo, two_over_z, s_e, s_a, scale, term
    cdef double complex target_e, target_a
    cdef Py_ssize_t top, k, j
    if z == 0:
        raise ZeroDivisionError("miller_ladder requires z != 0")
    az = _cabs(z)
    top = n - 1
    if top < <Py_ssize_t>ceil(1.5 * az):
        top = <Py_ssize_t>ceil(1.5 * az)
    top += 30
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] ladder = np.zeros(
        top + 1, dtype=np.complex128)
    t_hi = 0.0
    t_md = 1e-160
    ladder[top] = t_md
    two_over_z = 2.0 / z
    for k in range(top, 0, -1):
        t_lo = t_hi + (nu0 + k) * two_over_z * t_md
        t_hi = t_md
        t_md = t_lo
        ladder[k - 1] = t_lo
        t_abs = _cabs(t_lo)
        if t_abs > _RESCALE_AT:
            inv = 1.0 / t_abs
            t_hi = t_hi * inv
            t_md = t_md * inv
            for j in range(k - 1, top + 1):
                ladder[j] = ladder[j] * inv
    # normalization over even entries
    s_e = 0.0
    max_mag_e = 0.0
    if nu0 == 0.0:
        for k in range(0, top + 1, 2):
            term = ladder[k] if k == 0 else 2.0 * ladder[k]
            s_e = s_e + term
            mag = _cabs(term)
            if mag > max_mag_e:
                max_mag_e = mag
        target_e = 0.5 * (_cexp(z) + _cexp(-z))
    else:
        c = nu0 * tgamma(nu0)
        sign = 1.0
        k = 0
        while 2 * k <= top:
            term = sign * c * ladder[2 * k]
            s_e = s_e + term
            mag = _cabs(term)
            if mag > max_mag_e:
                max_mag_e = mag
            c = c * (nu0 + 2 * k + 2) / (nu0 + 2 * k) * (nu0 + k) / (k + 1.0)
            sign = -sign
            k += 1
        target_e = _cpow(z / 2.0, nu0)
    # normalization over all entries
    s_a = 0.0
    max_mag_a = 0.0
    if nu0 == 0.0:
        for k in range(top + 1):
            term = ladder[k] if k == 0 else 2.0 * ladder[k]
            s_a = s_a + term
            mag = _cabs(term)
            if mag > max_mag_a:
                max_mag_a = mag
        target_a = _cexp(z)
    else:
        c = nu0
        for k in range(top + 1):
            term = c * ladder[k]
            s_a = s_a + term
            mag = _cabs(term)
            if mag > max_mag_a:
                max_mag_a = mag
            c = c * (nu0 + k + 1.0) / (nu0 + k) * (k + 2.0 * nu0) / (k + 1.0)
        target_a = _cexp(z) * _cpow(z / 2.0, nu0) / tgamma(nu0)
    cond_e = INFINITY
    cond_a = INFINITY
    if _cabs(s_e) > 0.0:
        cond_e = max_mag_e / max(_cabs(s_e), 1e-300)
    if _cabs(s_a) > 0.0:
        cond_a = max_mag_a / max(_cabs(s_a), 1e-300)
    if cond_e == INFINITY and cond_a == INFINITY:
        raise ZeroDivisionError("both normalization sums vanished")
    if cond_e <= cond_a:
        scale = target_e / s_e
        cond = cond_e
    else:
        scale = target_a / s_a
        cond = cond_a
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(
        n, dtype=np.complex128)
    for k in range(n):
        out[k] = ladder[k] * scale
    return out, cond * _EPS * (top + 2)


def accumulate_angles(double[:, :] vertices, double[:, :] centers):
    """Signed azimuth accumulation about each center; see reference."""
    cdef Py_ssize_t n_v = vertices.shape[0]
    cdef Py_ssize_t n_c = centers.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(n_c)
    cdef double min_clear = INFINITY
    cdef double cx, cy, ax, ay, bx, by, cross, dot, total
    cdef double dx, dy, seg2, t, px, py, d
    cdef Py_ssize_t i, j
    for i in range(n_c):
        cx = centers[i, 0]
        cy = centers[i, 1]
        ax = vertices[0, 0] - cx
        ay = vertices[0, 1] - cy
        total = 0.0
        for j in range(1, n_v):
            bx = vertices[j, 0] - cx
            by = vertices[j, 1] - cy
            cross = ax * by - ay * bx
            dot = ax * bx + ay * by
            total += atan2(cross, dot)
            dx = bx - ax
            dy = by - ay
            seg2 = dx * dx + dy * dy
            if seg2 > 0.0:
                t = -(ax * dx + ay * dy) / seg2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                px = ax + t * dx
                py = ay + t * dy
                d = hypot(px, py)
            else:
                d = hypot(ax, ay)
            if d < min_clear:
                min_clear = d
            ax = bx
            ay = by
        acc[i] = total
    return acc, min_clear
