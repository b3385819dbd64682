"""Modified Bessel function of the first kind, I_nu(z).

Real order nu >= 0, complex argument z.  This is the one special
function the propagator sums and quadratures need, at both integer and
fractional orders (the effective orders |m - alpha| and |lambda| are
generically non-integer).

Evaluation strategy
-------------------
* Ascending power series when it is provably well-conditioned (small
  |z|, or order comparable to |z| so the series has no leading-term
  cancellation).  The series tracks its own largest-term/sum ratio, so
  cancellation is measured, not guessed.
* Otherwise a downward (Miller) recurrence ladder seeded above the
  turning point and normalized against closed-form sums; the ladder
  also reports a conditioning-based error estimate.
* Left half-plane arguments are reflected to the right half-plane with
  the standard analytic-continuation factor exp(+-i*pi*nu), keeping
  the kernels in their validated domain.

Every returned value carries an estimated error; ``bessel_i`` raises
``PrecisionError`` instead of silently returning digits it cannot
vouch for.
"""
import cmath
import math
from dataclasses import dataclass

from abpaths import _backend
from abpaths.errors import DomainError, PrecisionError, RangeError

#: Reject |z| above this: the normalization targets reach the double
#: overflow scale near exp(700).
OVERFLOW_ABS_Z = 600.0

#: |z| below which the ascending series is used unconditionally.
SERIES_RADIUS = 12.0


@dataclass(frozen=True)
class BesselEval:
    """One evaluated I_nu(z) with its error estimate."""

    order: float
    argument: complex
    value: complex
    est_abs_error: float


def _validate(order, argument, tol):
    if not (isinstance(order, (int, float)) and math.isfinite(order)):
        raise DomainError(f"order must be a finite real, got {order!r}")
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    z = complex(argument)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"argument must be finite, got {argument!r}")
    if tol is not None and not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    if abs(z) > OVERFLOW_ABS_Z:
        raise RangeError(
            f"|argument| = {abs(z):.3g} exceeds working range "
            f"{OVERFLOW_ABS_Z}")
    return float(order), z


def _eval_right_half(order, z):
    """(value, est_rel_err) for Re z >= 0, order >= 0."""
    az = abs(z)
    if az <= SERIES_RADIUS or order >= 0.8 * az:
        value, est = _backend.ascending_series(order, z)
        if est < 1e-11 or az <= 2.0:
            return value, est
        # fall through to the ladder when the series lost digits
    n = int(math.floor(order))
    nu0 = order - n
    values, est = _backend.miller_ladder(nu0, n + 1, z)
    return complex(values[n]), est


def bessel_i_eval(order, argument, tol=1e-10):
    """Evaluate I_order(argument) with an error estimate.

    Parameters
    ----------
    order : float
        Real order, >= 0.
    argument : complex
    tol : float
        Absolute error budget; exceeding it raises ``PrecisionError``.

    Returns
    -------
    BesselEval
    """
    order, z = _validate(order, argument, tol)
    if z.real >= 0.0:
        value, est_rel = _eval_right_half(order, z)
    else:
        # I_nu(z) = exp(sign * i*pi*nu) * I_nu(-z), sign following the
        # half-plane of z so -z stays on the principal branch.
        sign = 1.0 if z.imag >= 0.0 else -1.0
        base, est_rel = _eval_right_half(order, -z)
        value = cmath.exp(sign * 1j * math.pi * order) * base
    est_abs = est_rel * abs(value)
    if est_abs > tol:
        raise PrecisionError(
            f"I_{order}({z}) achieved estimated absolute error "
            f"{est_abs:.3g} > tol {tol:.3g}", achieved=est_abs)
    return BesselEval(order=order, argument=z, value=value,
                      est_abs_error=est_abs)


def bessel_i(order, argument, tol=1e-10):
    """I_order(argument); see ``bessel_i_eval`` for the error contract."""
    return bessel_i_eval(order, argument, tol).value


def bessel_i_ladder(nu0, count, argument):
    """I_{nu0+k}(argument) for k = 0..count-1 in one normalized sweep.

    The bulk evaluation the propagator sums are built on.  Returns
    ``(values, est_rel_err)``; ``nu0`` must lie in [0, 1).
    """
    nu0 = float(nu0)
    if not 0.0 <= nu0 < 1.0:
        raise DomainError(f"nu0 must be in [0, 1), got {nu0}")
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    _, z = _validate(nu0, argument, None)
    if z.real >= 0.0:
        return _backend.miller_ladder(nu0, count, z)
    sign = 1.0 if z.imag >= 0.0 else -1.0
    values, est = _backend.miller_ladder(nu0, count, -z)
    ks = range(count)
    phase = [cmath.exp(sign * 1j * math.pi * (nu0 + k)) for k in ks]
    return values * phase, est


def bessel_i_negligible_order(argument, threshold):
    """Smallest order bound nu* with |I_nu(argument)| < threshold for all
    nu >= nu*.

    Uses the monotone envelope
    |I_nu(z)| <= (|z|/2)^nu / Gamma(nu+1) * exp(|z|^2 / (4(nu+1))),
    valid for every nu >= 0, and scans for the first order past the
    envelope peak where it drops below ``threshold``.
    """
    if not threshold > 0:
        raise DomainError(f"threshold must be > 0, got {threshold}")
    z = complex(argument)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"argument must be finite, got {argument!r}")
    az = abs(z)
    if az == 0.0:
        return 1.0
    if az > OVERFLOW_ABS_Z:
        raise RangeError(
            f"|argument| = {az:.3g} exceeds working range {OVERFLOW_ABS_Z}")
    ln_thresh = math.log(threshold)

    def ln_env(nu):
        return (nu * math.log(az / 2.0) - math.lgamma(nu + 1.0)
                + az * az / (4.0 * (nu + 1.0)))

    # start past the envelope peak (near |z|/2) and grow geometrically
    lo = max(1.0, math.ceil(az / 2.0))
    hi = lo
    while ln_env(hi) >= ln_thresh:
        hi = 2.0 * hi + 16.0
        if hi > 1e7:
            raise RangeError("negligible-order bound exceeds 1e7")
    # integer bisection for the first order below threshold
    while hi - lo > 1.0:
        mid = math.floor((lo + hi) / 2.0)
        if ln_env(mid) < ln_thresh:
            hi = mid
        else:
            lo = mid
    return float(hi)
