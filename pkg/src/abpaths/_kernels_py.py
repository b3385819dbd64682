"""Pure-Python compute kernels.

Reference implementation of the hot numerical cores; the compiled
extension (``abpaths._kernels``) implements the same functions with the
same semantics, and the import-time backend switch picks whichever is
available.  Keep the two in lock-step: the test suite runs the full
kernel contract against both.

Functions
---------
ascending_series(nu, z, tol, max_terms)
    Power series for I_nu(z) with cancellation tracking.
miller_ladder(nu0, n, z)
    I_{nu0+k}(z) for k = 0..n-1 by downward recurrence, normalized
    against a closed-form sum; returns a conditioning estimate.
accumulate_angles(vertices, centers)
    Exact signed azimuth accumulation of a polyline about each center.
"""
import cmath
import math

import numpy as np

# Scale guard for the downward recurrence: rescale when values exceed
# this magnitude so intermediate products cannot overflow.
_RESCALE_AT = 1e250
_LN_UNDERFLOW = -700.0


def ascending_series(nu, z, tol=1e-300, max_terms=600):
    """Ascending power series for I_nu(z).

    Parameters
    ----------
    nu : float
        Order, >= 0.
    z : complex
        Argument.
    tol : float
        Stop once the next term falls below ``tol`` relative to the
        running sum (and below it in absolute terms for tiny sums).
    max_terms : int
        Hard cap on series length.

    Returns
    -------
    value : complex
    est_rel_err : float
        Estimated relative error: cancellation (largest term over final
        sum) times unit roundoff, plus the truncation残 ratio.
    """
    if z == 0:
        return (1.0 + 0.0j, 0.0) if nu == 0 else (0.0 + 0.0j, 0.0)
    ln_pref = nu * cmath.log(z / 2.0) - math.lgamma(nu + 1.0)
    if ln_pref.real < _LN_UNDERFLOW:
        # Value underflows double precision; report exact-zero with a
        # conservative absolute bound folded into the relative slot.
        return (0.0 + 0.0j, 1.0)
    pref = cmath.exp(ln_pref)
    q = z * z / 4.0
    term = 1.0 + 0.0j
    total = term
    max_mag = 1.0
    k = 0
    while k < max_terms:
        k += 1
        term = term * q / (k * (nu + k))
        total += term
        m = abs(term)
        if m > max_mag:
            max_mag = m
        if m <= tol * max(abs(total), 1e-300):
            break
    cancel = max_mag / max(abs(total), 1e-300)
    est = (cancel * 2.22e-16 * (k + 2)) + (abs(term) / max(abs(total), 1e-300))
    return pref * total, est


def _norm_even(nu0, ladder, z):
    """Normalization sum over even ladder entries.

    Uses (z/2)^nu = sum_k (-1)^k (nu+2k) Gamma(nu+k)/k! I_{nu+2k}(z) for
    nu > 0, and cosh z = I_0 + 2 sum_k I_{2k} at nu = 0.
    Returns (scale, digits_lost_metric).
    """
    s = 0.0 + 0.0j
    max_mag = 0.0
    top = len(ladder) - 1
    if nu0 == 0.0:
        for k in range(0, top + 1, 2):
            t = ladder[k] if k == 0 else 2.0 * ladder[k]
            s += t
            if abs(t) > max_mag:
                max_mag = abs(t)
        target = cmath.cosh(z)
    else:
        c = nu0 * math.gamma(nu0)  # k=0 coefficient (nu+0)*Gamma(nu)/0!
        sign = 1.0
        k = 0
        while 2 * k <= top:
            t = sign * c * ladder[2 * k]
            s += t
            if abs(t) > max_mag:
                max_mag = abs(t)
            # ratio to the k+1 coefficient
            c = c * (nu0 + 2 * k + 2) / (nu0 + 2 * k) * (nu0 + k) / (k + 1.0)
            sign = -sign
            k += 1
        target = (z / 2.0) ** nu0
    if s == 0:
        return None, math.inf
    return target / s, max_mag / max(abs(s), 1e-300)


def _norm_all(nu0, ladder, z):
    """Normalization over all ladder entries.

    Uses e^z = Gamma(nu)(2/z)^nu sum_k (nu+k) Gamma(k+2nu)/(k! Gamma(2nu))
    I_{nu+k}(z) for nu > 0, and the classic e^z = I_0 + 2 sum I_k at
    integer nu0 = 0.  Returns (scale, digits_lost_metric).
    """
    s = 0.0 + 0.0j
    max_mag = 0.0
    if nu0 == 0.0:
        for k, t in enumerate(ladder):
            term = t if k == 0 else 2.0 * t
            s += term
            if abs(term) > max_mag:
                max_mag = abs(term)
        target = cmath.exp(z)
    else:
        c = nu0  # k=0: (nu+0)*Gamma(2nu)/(0! Gamma(2nu)) = nu
        for k, t in enumerate(ladder):
            term = c * t
            s += term
            if abs(term) > max_mag:
                max_mag = abs(term)
            c = c * (nu0 + k + 1.0) / (nu0 + k) * (k + 2.0 * nu0) / (k + 1.0)
        target = cmath.exp(z) * (z / 2.0) ** nu0 / math.gamma(nu0)
    if s == 0:
        return None, math.inf
    return target / s, max_mag / max(abs(s), 1e-300)


def miller_ladder(nu0, n, z):
    """I_{nu0+k}(z) for k = 0..n-1 via downward (Miller) recurrence.

    Parameters
    ----------
    nu0 : float
        Base order in [0, 1).
    n : int
        Number of consecutive orders to return.
    z : complex
        Argument, nonzero.

    Returns
    -------
    values : ndarray of complex, shape (n,)
    est_rel_err : float

    Notes
    -----
    The recurrence I_{k-1} = I_{k+1} + (2(nu0+k)/z) I_k is run from a
    padded top order down to nu0 with an arbitrary seed; the overall
    scale is then fixed against two independent closed-form sums and
    the better-conditioned one is used.  The conditioning ratio
    (largest summand over the normalization sum) is folded into the
    returned error estimate, so cancellation is reported rather than
    hidden.
    """
    if z == 0:
        raise ZeroDivisionError("miller_ladder requires z != 0")
    az = abs(z)
    # Top order: above both the highest requested order and the region
    # where |I_nu(z)| has decayed well below every returned value, so
    # the truncated normalization sums carry no visible bias.
    top = max(n - 1, int(math.ceil(1.5 * az))) + 30
    ladder = [0.0 + 0.0j] * (top + 1)
    t_hi = 0.0 + 0.0j       # t_{k+1}
    t_md = 1e-160 + 0.0j    # t_k, arbitrary seed absorbed by normalization
    ladder[top] = t_md
    two_over_z = 2.0 / z
    for k in range(top, 0, -1):
        t_lo = t_hi + (nu0 + k) * two_over_z * t_md
        t_hi = t_md
        t_md = t_lo
        ladder[k - 1] = t_lo
        if abs(t_lo) > _RESCALE_AT:
            inv = 1.0 / abs(t_lo)
            t_hi *= inv
            t_md *= inv
            for j in range(k - 1, top + 1):
                ladder[j] *= inv
    s_e, c_e = _norm_even(nu0, ladder, z)
    s_a, c_a = _norm_all(nu0, ladder, z)
    if s_e is None and s_a is None:
        raise ZeroDivisionError("both normalization sums vanished")
    if s_a is None or (s_e is not None and c_e <= c_a):
        scale, cond = s_e, c_e
    else:
        scale, cond = s_a, c_a
    values = np.array([ladder[k] * scale for k in range(n)], dtype=complex)
    est = cond * 2.22e-16 * (top + 2)
    return values, est


def accumulate_angles(vertices, centers):
    """Signed azimuth accumulation of a polyline about each center.

    Parameters
    ----------
    vertices : ndarray (n_v, 2)
        Polyline vertices, ordered.
    centers : ndarray (n_c, 2)
        Puncture points.

    Returns
    -------
    acc : ndarray (n_c,)
        Sum over segments of the exact signed azimuth increment about
        each center; every per-segment increment lies in (-pi, pi).
    min_clearance : float
        Minimum distance from any center to any segment (degenerate
        topology iff this is ~0).
    """
    vertices = np.asarray(vertices, dtype=float)
    centers = np.asarray(centers, dtype=float)
    n_v = vertices.shape[0]
    n_c = centers.shape[0]
    acc = np.zeros(n_c)
    min_clear = math.inf
    for i in range(n_c):
        cx, cy = centers[i, 0], centers[i, 1]
        ax = vertices[0, 0] - cx
        ay = vertices[0, 1] - cy
        total = 0.0
        for j in range(1, n_v):
            bx = vertices[j, 0] - cx
            by = vertices[j, 1] - cy
            cross = ax * by - ay * bx
            dot = ax * bx + ay * by
            total += math.atan2(cross, dot)
            # point-segment distance from origin to segment a->b
            dx = bx - ax
            dy = by - ay
            seg2 = dx * dx + dy * dy
            if seg2 > 0.0:
                t = -(ax * dx + ay * dy) / seg2
                t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
                px = ax + t * dx
                py = ay + t * dy
                d = math.hypot(px, py)
            else:
                d = math.hypot(ax, ay)
            if d < min_clear:
                min_clear = d
            ax, ay = bx, by
        acc[i] = total
    return acc, min_clear
