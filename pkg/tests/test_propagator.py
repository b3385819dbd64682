"""Single-solenoid propagators: closed forms, identities, scan layout."""
import cmath
import math

import numpy as np
import pytest

from abpaths.errors import (DegenerateGeometryError, DomainError,
                            PrecisionError)
from abpaths.propagator import (PolarEndpoints, PropagatorParams, ab_total,
                                ab_winding, chord_displacement,
                                fig1_endpoints, fig1_scan, free_kernel_2d,
                                semiclassical)

H_GRID = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


def test_free_kernel_zero_displacement():
    # mass/(2 pi i hbar T) at T=10 is 1/(20 pi i) = -i/(20 pi)
    params = PropagatorParams()
    got = free_kernel_2d((0.0, 0.0), params)
    assert got == pytest.approx(-1j / (20.0 * math.pi), rel=1e-15)


def test_free_kernel_finite_displacement_and_isotropy():
    params = PropagatorParams()
    expect = (-1j / (20.0 * math.pi)) * cmath.exp(0.2j)
    assert free_kernel_2d((2.0, 0.0), params) == pytest.approx(expect,
                                                               rel=1e-14)
    # depends on the displacement only through its squared length
    a = free_kernel_2d((2.0, 0.0), params)
    b = free_kernel_2d((0.0, 2.0), params)
    c = free_kernel_2d((math.sqrt(2.0), math.sqrt(2.0)), params)
    assert a == pytest.approx(b, rel=1e-14)
    assert a == pytest.approx(c, rel=1e-14)


def test_fig1_endpoints_geometry():
    for h in H_GRID:
        ep = fig1_endpoints(h)
        assert ep.r == pytest.approx(math.hypot(1.0, h), rel=1e-15)
        assert ep.r_prime == ep.r
        d = chord_displacement(ep)
        assert np.hypot(*d) == pytest.approx(2.0, rel=1e-12)
        # the straight chord runs at distance h below the solenoid
        src = np.array([ep.r * math.cos(ep.theta),
                        ep.r * math.sin(ep.theta)])
        assert src[1] == pytest.approx(-h, rel=1e-12)


def test_graf_identity_alpha_zero():
    # the m-sum at alpha=0 collapses to the free kernel; machine-level
    # here, the 1e-6 acceptance gate is far looser
    for h in (0.5, 2.0, 10.0):
        ep = fig1_endpoints(h)
        params = PropagatorParams(alpha=0.0)
        free = free_kernel_2d(chord_displacement(ep), params)
        total = ab_total(ep, params)
        assert abs(total - free) <= 1e-12 * abs(free)


def test_integer_alpha_is_free_kernel_times_endpoint_phase():
    ep = fig1_endpoints(2.0)
    free = free_kernel_2d(chord_displacement(ep),
                          PropagatorParams(alpha=0.0))
    total = ab_total(ep, PropagatorParams(alpha=1.0))
    expect = cmath.exp(1j * ep.dtheta) * free
    assert abs(total - expect) <= 1e-10 * abs(expect)


def test_alpha_periodicity_index_shift():
    ep = fig1_endpoints(2.0)
    base = ab_total(ep, PropagatorParams(alpha=0.3))
    shifted = ab_total(ep, PropagatorParams(alpha=1.3))
    expect = cmath.exp(1j * ep.dtheta) * base
    assert abs(shifted - expect) <= 1e-12 * abs(expect)


def test_modulus_invariant_under_joint_sign_flip():
    # (alpha, dtheta) -> (-alpha, -dtheta) conjugates the m-sum
    ep = PolarEndpoints(r=1.7, theta=0.3, r_prime=2.1, theta_prime=1.1)
    ep_flip = PolarEndpoints(r=1.7, theta=-0.3, r_prime=2.1,
                             theta_prime=-1.1)
    a = ab_total(ep, PropagatorParams(alpha=0.37))
    b = ab_total(ep_flip, PropagatorParams(alpha=-0.37))
    assert abs(abs(a) - abs(b)) <= 1e-12 * abs(a)


def test_winding_sector_factorization_is_exact():
    # flux dependence enters a sector only through the unit phase
    # exp(i alpha (dtheta + 2 pi n)); it is factored before quadrature,
    # so the identity holds bit-for-bit
    ep = fig1_endpoints(2.0)
    base_params = PropagatorParams(alpha=0.0)
    full_params = PropagatorParams(alpha=0.37)
    for n in (-2, 0, 3):
        base = ab_winding(n, ep, base_params)
        phase = cmath.exp(1j * 0.37 * (ep.dtheta + 2.0 * math.pi * n))
        assert ab_winding(n, ep, full_params) == phase * base


def test_winding_sector_moduli_decay():
    ep = fig1_endpoints(2.0)
    params = PropagatorParams(alpha=0.25)
    mags = {n: abs(ab_winding(n, ep, params))
            for n in (-4, -3, -2, 2, 3, 4)}
    assert mags[2] > mags[3] > mags[4]
    assert mags[-2] > mags[-3] > mags[-4]


def test_winding_sum_approaches_total():
    # truncated sector sum against a converged m-sum; the sector tail
    # decays like 1/n^2 with alternating phase at alpha=1/2
    ep = fig1_endpoints(20.0)
    params = PropagatorParams(alpha=0.5, m_max=120)
    total = ab_total(ep, params)
    sectors = sum(ab_winding(n, ep, params) for n in range(-10, 11))
    assert abs(sectors - total) <= 1e-4 * abs(total)


def test_semiclassical_modulus_and_small_h_departure():
    params = PropagatorParams(alpha=0.5)
    ep = fig1_endpoints(0.1)
    free = free_kernel_2d(chord_displacement(ep), params)
    semi = semiclassical(ep, 0.1, params)
    assert abs(abs(semi) - abs(free)) <= 1e-14 * abs(free)
    # at small impact parameter the full propagator departs strongly
    # from the free kernel (pinned regression value)
    rel = abs(ab_total(ep, params) - free) / abs(free)
    assert rel > 1e-3
    assert rel == pytest.approx(0.9614973960453431, rel=1e-9)


def test_fig1_scan_layout_and_alpha_zero_rows():
    h_grid = (0.5, 2.0)
    alpha_grid = (0.0, 0.25, 0.5)
    rows = fig1_scan(h_grid, alpha_grid, PropagatorParams())
    assert len(rows) == len(h_grid) * len(alpha_grid)
    # row-major: h outer, alpha inner
    expect_keys = [(h, a) for h in h_grid for a in alpha_grid]
    assert [(row[0], row[1]) for row in rows] == expect_keys
    for h, alpha, re_diff, im_diff in rows:
        if alpha == 0.0:
            assert re_diff <= 1e-12 and im_diff <= 1e-12
        else:
            assert re_diff > 1e-12 or im_diff > 1e-12


def test_endpoint_and_parameter_validation():
    with pytest.raises(DomainError):
        PolarEndpoints(r=0.0, theta=0.0, r_prime=1.0, theta_prime=1.0)
    with pytest.raises(DomainError):
        PropagatorParams(mass=0.0)
    with pytest.raises(DomainError):
        PropagatorParams(total_time=-1.0)
    with pytest.raises(DomainError):
        PropagatorParams(m_max=0)
    with pytest.raises(DomainError):
        fig1_endpoints(0.0)
    with pytest.raises(DomainError):
        fig1_scan((), (0.0,), PropagatorParams())


def test_semiclassical_degenerate_path():
    ep = PolarEndpoints(r=1.0, theta=math.pi, r_prime=1.0, theta_prime=0.0)
    with pytest.raises(DegenerateGeometryError):
        semiclassical(ep, 0.0, PropagatorParams())


def test_ab_total_truncation_guard():
    # with a tolerance the truncation is verified; m_max far too small
    # for |w| ~ 40 must raise rather than return garbage
    ep = fig1_endpoints(20.0)
    with pytest.raises(PrecisionError) as err:
        ab_total(ep, PropagatorParams(alpha=0.5, m_max=5), tol=1e-10)
    assert err.value.achieved > 1e-10
