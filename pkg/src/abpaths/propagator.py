"""Single-solenoid propagators on the punctured plane.

The solenoid sits at the origin and carries dimensionless flux
``alpha`` (physical flux over the flux quantum).  Natural units
``hbar = c = q = 1`` are fixed package-wide.

Four propagators are provided between endpoints given in polar
coordinates about the solenoid:

``free_kernel_2d``
    Closed-form free 2-D kernel  mu/(2*pi*i*hbar*T) * exp(i*mu*d^2/(2*hbar*T)).
``ab_total``
    Sum over angular momentum m of exp(i*m*dtheta) * C * I_{|m-alpha|}(w)
    with C = mu/(2*pi*i*hbar*T) * exp(i*mu*(r^2+r'^2)/(2*hbar*T)) and
    w = mu*r*r'/(i*hbar*T), truncated at |m| <= m_max.
``ab_winding``
    One winding sector: exp(i*alpha*Phi) * C * 2*int_0^inf
    cos(lambda*Phi) I_lambda(w) dlambda with Phi = dtheta + 2*pi*n_w;
    the alpha dependence is factored out exactly before quadrature.
``semiclassical``
    Free kernel times the flux phase of the straight classical path.

All of these extend analytically to complex time; the module-private
``*_at_time`` helpers take the time argument explicitly so a damped
(complex) time can be used where a discretized cross-check needs it,
while the public operations read the real ``total_time`` from the
parameter set.
"""
import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from abpaths.errors import DegenerateGeometryError, DomainError, PrecisionError
from abpaths.specfun import bessel_i_ladder, bessel_i_negligible_order


@dataclass(frozen=True)
class PolarEndpoints:
    """Source and detector in polar coordinates about the solenoid.

    Angles are continuous (not reduced modulo 2*pi); the difference
    ``theta_prime - theta`` is used as given, because winding
    bookkeeping lives in the sector index, not in the angles.
    """

    r: float
    theta: float
    r_prime: float
    theta_prime: float

    def __post_init__(self):
        if not (self.r > 0 and self.r_prime > 0):
            raise DomainError(
                f"radii must be > 0 (solenoid itself excluded), got "
                f"r={self.r}, r_prime={self.r_prime}")

    @property
    def dtheta(self):
        return self.theta_prime - self.theta


@dataclass(frozen=True)
class PropagatorParams:
    """Mass, flight time, flux parameter and series cutoff."""

    mass: float = 1.0
    total_time: float = 10.0
    alpha: float = 0.0
    m_max: int = 50
    hbar: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"mass must be > 0, got {self.mass}")
        if not self.total_time > 0:
            raise DomainError(
                f"total_time must be > 0, got {self.total_time}")
        if not self.hbar > 0:
            raise DomainError(f"hbar must be > 0, got {self.hbar}")
        if int(self.m_max) < 1:
            raise DomainError(f"m_max must be >= 1, got {self.m_max}")


def _prefactor(params, time):
    return params.mass / (2j * math.pi * params.hbar * time)


def free_kernel_2d_at_time(displacement, params, time):
    d = np.asarray(displacement, dtype=float)
    d2 = float(d @ d)
    mu, hb = params.mass, params.hbar
    return _prefactor(params, time) * cmath.exp(
        1j * mu * d2 / (2.0 * hb * time))


def free_kernel_2d(displacement, params):
    """Closed-form free 2-D kernel for the given displacement vector."""
    return free_kernel_2d_at_time(displacement, params, params.total_time)


def _bessel_argument(endpoints, params, time):
    mu, hb = params.mass, params.hbar
    return mu * endpoints.r * endpoints.r_prime / (1j * hb * time)


def _endpoint_prefactor(endpoints, params, time):
    mu, hb = params.mass, params.hbar
    r2sum = endpoints.r ** 2 + endpoints.r_prime ** 2
    return _prefactor(params, time) * cmath.exp(
        1j * mu * r2sum / (2.0 * hb * time))


def _reduce_alpha(alpha, dtheta):
    """Split alpha into integer and fractional parts.

    The m-sum at alpha and at alpha+1 differ exactly by an index shift,
    i.e. by the factor exp(i*dtheta); reducing keeps the Bessel orders
    in two unit-spaced ladders regardless of alpha.
    """
    n_int = math.floor(alpha)
    frac = alpha - n_int
    phase = cmath.exp(1j * n_int * dtheta)
    return frac, phase


def ab_total_at_time(endpoints, params, time, tol=None):
    a, shift_phase = _reduce_alpha(params.alpha, endpoints.dtheta)
    w = _bessel_argument(endpoints, params, time)
    pref = _endpoint_prefactor(endpoints, params, time)
    m_max = int(params.m_max)
    if tol is not None:
        # first omitted orders are m_max+1-a and m_max+a; require the
        # negligible-order bound to sit at or below them
        need = bessel_i_negligible_order(w, tol / max(abs(pref), 1e-300))
        if need > m_max + 1 - a:
            env = abs(pref) * math.exp(
                (m_max + 1 - a) * math.log(max(abs(w), 1e-300) / 2.0)
                - math.lgamma(m_max + 2 - a))
            raise PrecisionError(
                f"m_max={m_max} leaves omitted terms ~{env:.3g} above "
                f"tol={tol:.3g} (need orders up to {need:.0f})",
                achieved=env)
    # orders |m - a|: m <= 0 gives ladder a, a+1, ..., a+m_max
    #                m >= 1 gives ladder 1-a, 2-a, ..., m_max-a
    vals_neg, est_n = bessel_i_ladder(a, m_max + 1, w)
    ms_neg = -np.arange(0, m_max + 1)
    if a == 0.0:
        vals_pos, est_p = vals_neg[1:], est_n
    else:
        vals_pos, est_p = bessel_i_ladder(1.0 - a, m_max, w)
    ms_pos = np.arange(1, m_max + 1)
    dth = endpoints.dtheta
    s = (np.exp(1j * ms_neg * dth) * vals_neg).sum()
    s += (np.exp(1j * ms_pos * dth) * vals_pos).sum()
    return shift_phase * pref * s


def ab_total(endpoints, params, tol=None):
    """Total propagator: the angular-momentum sum truncated at m_max.

    When ``tol`` is given, the truncation is verified against the
    negligible-order bound and a ``PrecisionError`` (carrying the
    achieved estimate) is raised if ``m_max`` is too small.
    """
    return ab_total_at_time(endpoints, params, params.total_time, tol=tol)


def _winding_phase(n_w, endpoints, params):
    phi = endpoints.dtheta + 2.0 * math.pi * n_w
    return cmath.exp(1j * params.alpha * phi)


def ab_winding_base_at_time(n_w, endpoints, params, time, quad_tol=1e-10):
    """One winding sector at alpha = 0 (the quadrature core).

    Integrates 2 * cos(lambda*Phi) * I_lambda(w) over lambda in
    [0, lambda_max] with an oscillatory-weight rule, separately for the
    real and imaginary parts of the Bessel factor, then applies the
    endpoint prefactor.
    """
    if not quad_tol > 0:
        raise DomainError(f"quad_tol must be > 0, got {quad_tol}")
    w = _bessel_argument(endpoints, params, time)
    pref = _endpoint_prefactor(endpoints, params, time)
    phi = endpoints.dtheta + 2.0 * math.pi * n_w
    # truncation: beyond lambda_max the integrand is below a threshold
    # chosen so the tail cannot contribute quad_tol at the output scale
    thresh = quad_tol / (8.0 * max(abs(pref), 1e-300))
    lam_max = bessel_i_negligible_order(w, thresh)
    worst_est = 0.0

    def integrand(lam, part):
        nonlocal worst_est
        n = int(math.floor(lam))
        values, est = bessel_i_ladder(lam - n, n + 1, w)
        if est > worst_est:
            worst_est = est
        v = values[n]
        return v.real if part == 0 else v.imag

    eps = quad_tol / (8.0 * max(abs(pref), 1e-300))
    out = []
    for part in (0, 1):
        val, abserr = quad(integrand, 0.0, lam_max, args=(part,),
                           weight="cos", wvar=phi, epsabs=eps,
                           epsrel=1e-12, limit=400, full_output=False)
        if abserr > 16.0 * eps + 1e-14:
            raise PrecisionError(
                f"winding-sector quadrature achieved {abserr:.3g} "
                f"(requested {eps:.3g}) at n_w={n_w}",
                achieved=abserr * abs(pref))
        out.append(val)
    return pref * 2.0 * complex(out[0], out[1])


def ab_winding(n_w, endpoints, params, quad_tol=1e-10):
    """One winding sector of the propagator.

    The flux dependence is exactly the unit-modulus factor
    exp(i*alpha*(dtheta + 2*pi*n_w)); it multiplies the alpha = 0
    quadrature, so the factorization identity holds bit-for-bit.
    """
    base = ab_winding_base_at_time(n_w, endpoints, params,
                                   params.total_time, quad_tol=quad_tol)
    return _winding_phase(n_w, endpoints, params) * base


def chord_displacement(endpoints):
    """Cartesian displacement vector of the straight chord."""
    dx = (endpoints.r_prime * math.cos(endpoints.theta_prime)
          - endpoints.r * math.cos(endpoints.theta))
    dy = (endpoints.r_prime * math.sin(endpoints.theta_prime)
          - endpoints.r * math.sin(endpoints.theta))
    return np.array([dx, dy])


def _chord_swept_angle(endpoints):
    """Exact azimuth increment along the straight chord.

    Degenerate (undefined winding) iff the chord passes through the
    solenoid.
    """
    ax = endpoints.r * math.cos(endpoints.theta)
    ay = endpoints.r * math.sin(endpoints.theta)
    bx = endpoints.r_prime * math.cos(endpoints.theta_prime)
    by = endpoints.r_prime * math.sin(endpoints.theta_prime)
    cross = ax * by - ay * bx
    dot = ax * bx + ay * by
    if abs(cross) < 1e-14 * math.hypot(ax, ay) * math.hypot(bx, by) and dot < 0:
        raise DegenerateGeometryError(
            "classical path passes through the solenoid")
    return math.atan2(cross, dot)


def semiclassical(endpoints, h, params):
    """Free kernel times the flux phase of the straight classical path."""
    if h == 0:
        raise DegenerateGeometryError(
            "h = 0 puts the classical path through the solenoid")
    swept = _chord_swept_angle(endpoints)
    # phase uses the chord's true swept angle; with principal-branch
    # endpoint angles this is dtheta + 2*pi*0 for a non-winding chord
    phase = cmath.exp(1j * params.alpha * swept)
    return free_kernel_2d(chord_displacement(endpoints), params) * phase


def fig1_endpoints(h, chord_length=2.0):
    """Symmetric source/detector geometry of the difference scan.

    Source (-L/2, -h) and detector (+L/2, -h) about a solenoid at the
    origin: r = r' = sqrt((L/2)^2 + h^2), straight chord at distance h
    below the solenoid.
    """
    if h <= 0:
        raise DomainError(f"h must be > 0, got {h}")
    half = chord_length / 2.0
    r = math.hypot(half, h)
    theta = math.atan2(-h, -half)
    theta_p = math.atan2(-h, half)
    return PolarEndpoints(r=r, theta=theta, r_prime=r, theta_prime=theta_p)


def fig1_scan(h_grid, alpha_grid, params, chord_length=2.0):
    """Difference between total and semi-classical propagators.

    Returns a list of rows ``(h, alpha, abs_re_diff, abs_im_diff)`` in
    row-major order (h outer, alpha inner).
    """
    if len(h_grid) == 0 or len(alpha_grid) == 0:
        raise DomainError("h_grid and alpha_grid must be non-empty")
    rows = []
    for h in h_grid:
        ep = fig1_endpoints(h, chord_length)
        for alpha in alpha_grid:
            p = PropagatorParams(mass=params.mass,
                                 total_time=params.total_time,
                                 alpha=float(alpha), m_max=params.m_max,
                                 hbar=params.hbar)
            k_ab = ab_total(ep, p)
            k_sc = semiclassical(ep, h, p)
            diff = k_ab - k_sc
            rows.append((float(h), float(alpha),
                         abs(diff.real), abs(diff.imag)))
    return rows
