"""Winding numbers, class enumeration, flux phases, representative paths."""
import cmath
import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from abpaths._backend import accumulate_angles
from abpaths.errors import CapacityError, DomainError, TopologyError
from abpaths.homotopy import (HomotopyClass, Polyline, SolenoidArray,
                              class_index, class_length, enumerate_classes,
                              flux_phase, generalized_phase,
                              representative_path, winding_of_index,
                              winding_vector)


def _single_solenoid(source=(-2.0, -1.0), detector=(2.0, -1.0)):
    return SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0, fluxes=[0.7],
                         source=source, detector=detector)


def _diamond(center, radius=0.4):
    """Counter-clockwise diamond loop vertices around a center,
    starting and ending at the bottom vertex."""
    cx, cy = center
    return [(cx, cy - radius), (cx + radius, cy), (cx, cy + radius),
            (cx - radius, cy), (cx, cy - radius)]


def test_enumeration_counts_and_order():
    one = _single_solenoid()
    classes = enumerate_classes(one, 1)
    assert [c.winding for c in classes] == [(-1,), (0,), (1,)]
    assert [c.index for c in classes] == [1, 2, 3]

    two = SolenoidArray(positions=[(0.0, 0.0), (1.0, 0.0)], spacing=1.0,
                        fluxes=[0.0, 0.0], source=(-2.0, -1.0),
                        detector=(3.0, -1.0))
    assert len(enumerate_classes(two, 1)) == 9

    three = SolenoidArray(positions=[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
                          spacing=1.0, fluxes=[0.0] * 3,
                          source=(-2.0, -1.0), detector=(4.0, -1.0))
    classes = enumerate_classes(three, 2)
    assert len(classes) == 125
    # lexicographic, first component most significant
    assert classes[0].winding == (-2, -2, -2)
    assert classes[-1].winding == (2, 2, 2)


@given(st.integers(0, 3), st.integers(1, 4), st.data())
def test_class_index_bijection(n_cut, n_solenoids, data):
    winding = tuple(
        data.draw(st.integers(-n_cut, n_cut)) for _ in range(n_solenoids))
    index = class_index(winding, n_cut)
    assert 1 <= index <= (2 * n_cut + 1) ** n_solenoids
    assert winding_of_index(index, n_cut, n_solenoids) == winding


def test_enumeration_capacity_guard():
    many = SolenoidArray(positions=[(k, 0.0) for k in range(10)],
                         spacing=1.0, fluxes=[0.0] * 10,
                         source=(-2.0, -1.0), detector=(11.0, -1.0))
    with pytest.raises(CapacityError):
        enumerate_classes(many, 3)


def test_straight_chord_outside_hull_has_zero_winding():
    array = _single_solenoid()
    path = Polyline(vertices=[array.source, array.detector])
    winding, acc = winding_vector(path, array)
    assert winding == [0]
    th, thp = array.endpoint_azimuths()[0]
    assert acc[0] == pytest.approx(thp - th, abs=1e-12)


def test_single_loop_winds_once():
    array = _single_solenoid()
    vertices = [array.source] + _diamond((0.0, 0.0)) + [array.detector]
    winding, _ = winding_vector(Polyline(vertices=vertices), array)
    assert winding == [1]
    reversed_loop = [array.source] + _diamond((0.0, 0.0))[::-1] \
        + [array.detector]
    winding, _ = winding_vector(Polyline(vertices=reversed_loop), array)
    assert winding == [-1]


def test_loop_order_does_not_matter():
    # winding classification is abelian: looping solenoid 1 then 2
    # equals looping 2 then 1
    array = SolenoidArray(positions=[(0.0, 0.0), (1.0, 0.0)], spacing=1.0,
                          fluxes=[0.0, 0.0], source=(-2.0, -1.0),
                          detector=(3.0, -1.0))
    d1, d2 = _diamond((0.0, 0.0)), _diamond((1.0, 0.0))
    path_12 = Polyline(
        vertices=[array.source] + d1 + d2 + [array.detector])
    path_21 = Polyline(
        vertices=[array.source] + d2 + d1 + [array.detector])
    w12, _ = winding_vector(path_12, array)
    w21, _ = winding_vector(path_21, array)
    assert w12 == w21 == [1, 1]


def test_deformation_invariance():
    array = _single_solenoid()
    base = np.array([array.source] + _diamond((0.0, 0.0))
                    + [array.detector])
    rng = np.random.default_rng(42)
    for _ in range(20):
        jitter = rng.uniform(-0.05, 0.05, size=base.shape)
        jitter[0] = jitter[-1] = 0.0  # endpoints stay put
        winding, _ = winding_vector(Polyline(vertices=base + jitter), array)
        assert winding == [1]


def test_reversal_antisymmetry():
    array = _single_solenoid()
    vertices = np.array([array.source] + _diamond((0.0, 0.0))
                        + [array.detector])
    acc_fwd, _ = accumulate_angles(vertices, array.positions)
    acc_rev, _ = accumulate_angles(vertices[::-1], array.positions)
    assert np.allclose(np.asarray(acc_rev), -np.asarray(acc_fwd),
                       atol=1e-12)
    swapped = SolenoidArray(positions=array.positions, spacing=1.0,
                            fluxes=array.fluxes, source=array.detector,
                            detector=array.source)
    winding, _ = winding_vector(Polyline(vertices=vertices[::-1]), swapped)
    assert winding == [-1]


def test_concatenation_additivity():
    array = _single_solenoid()
    vertices = np.array([array.source] + _diamond((0.0, 0.0))
                        + [array.detector])
    split = 3
    acc_all, _ = accumulate_angles(vertices, array.positions)
    acc_a, _ = accumulate_angles(vertices[:split + 1], array.positions)
    acc_b, _ = accumulate_angles(vertices[split:], array.positions)
    assert np.allclose(np.asarray(acc_all),
                       np.asarray(acc_a) + np.asarray(acc_b), atol=1e-12)


def test_winding_vector_validation():
    array = _single_solenoid()
    with pytest.raises(DomainError):
        winding_vector(Polyline(vertices=[(0.0, 5.0), array.detector]),
                       array)
    through = Polyline(vertices=[array.source, (-1.0, 0.0), (1.0, 0.0),
                                 array.detector])
    with pytest.raises(TopologyError):
        winding_vector(through, array)


def test_flux_phase_trivial_and_single_solenoid_reduction():
    array = _single_solenoid()
    angles = array.endpoint_azimuths()
    classes = enumerate_classes(array, 1)
    zero_flux = SolenoidArray(positions=array.positions, spacing=1.0,
                              fluxes=[0.0], source=array.source,
                              detector=array.detector)
    for cls in classes:
        assert generalized_phase(cls, zero_flux, angles) == 1.0 + 0.0j
        # N_S=1 closed form: exp[i alpha (theta' - theta + 2 pi n)]
        alpha = array.fluxes[0] / (2.0 * math.pi)
        th, thp = angles[0]
        expect = cmath.exp(
            1j * alpha * (thp - th + 2.0 * math.pi * cls.winding[0]))
        got = generalized_phase(cls, array, angles)
        assert abs(got - expect) <= 1e-14
        assert abs(abs(got) - 1.0) <= 1e-14


def test_flux_phase_additivity():
    angles = [(0.3, 1.2), (-0.4, 0.9)]
    winding = (2, -1)
    a, b = (0.7, -1.3), (0.25, 2.0)
    combined = flux_phase(winding, [a[0] + b[0], a[1] + b[1]], angles)
    split = flux_phase(winding, a, angles) * flux_phase(winding, b, angles)
    assert abs(combined - split) <= 1e-14


def test_flux_phase_arity_check():
    with pytest.raises(DomainError):
        flux_phase((1,), (0.5, 0.5), [(0.0, 1.0)])


def test_representative_round_trip_small_arrays():
    array = SolenoidArray(positions=[(0.0, 0.0), (1.0, 0.0)], spacing=1.0,
                          fluxes=[0.0, 0.0], source=(-2.0, -1.0),
                          detector=(3.0, -1.0))
    chord = np.hypot(*(array.detector - array.source))
    for cls in enumerate_classes(array, 1):
        path = representative_path(cls, array)
        winding, _ = winding_vector(path, array)
        assert tuple(winding) == cls.winding
        assert class_length(cls, array) == pytest.approx(path.length,
                                                         rel=1e-12)
        assert class_length(cls, array) >= chord - 1e-12


def test_zero_class_of_clear_chord_is_the_chord():
    # endpoints on the same side of the array: the zero class walks the
    # straight chord
    array = _single_solenoid()
    zero = HomotopyClass(winding=(0,), cutoff=1, index=2)
    chord = np.hypot(*(array.detector - array.source))
    assert class_length(zero, array) == pytest.approx(chord, rel=1e-12)


def test_empty_array_single_class_is_chord_length():
    array = SolenoidArray(positions=[], spacing=1.0, fluxes=[],
                          source=(0.0, 0.0), detector=(3.0, 4.0))
    classes = enumerate_classes(array, 2)
    assert len(classes) == 1 and classes[0].winding == ()
    assert class_length(classes[0], array) == pytest.approx(5.0, rel=1e-14)


def _brute_force_min_length(array, target_winding, max_vertices=8):
    """Exhaustive minimum over waypoint polylines (independent oracle).

    Waypoints mirror the documented construction: endpoints, nearest-
    neighbour midpoints, and the half-spacing bypass ring around the
    bounding box.
    """
    s = array.spacing
    pos = array.positions
    lo, hi = pos.min(axis=0) - 0.5 * s, pos.max(axis=0) + 0.5 * s
    ring = []
    nx = max(1, int(round((hi[0] - lo[0]) / s)))
    ny = max(1, int(round((hi[1] - lo[1]) / s)))
    for x in np.linspace(lo[0], hi[0], nx + 1):
        ring += [(x, lo[1]), (x, hi[1])]
    for y in np.linspace(lo[1], hi[1], ny + 1)[1:-1]:
        ring += [(lo[0], y), (hi[0], y)]
    waypoints = [tuple(array.source), tuple(array.detector)] + ring

    def clear(u, v):
        _, clearance = accumulate_angles(np.array([u, v]), pos)
        return clearance > 1e-9 * s

    best = math.inf
    src, det = waypoints[0], waypoints[1]
    for n_mid in range(0, max_vertices - 1):
        for mids in product(waypoints, repeat=n_mid):
            seq = [src, *mids, det]
            if any(seq[i] == seq[i + 1] for i in range(len(seq) - 1)):
                continue
            if not all(clear(seq[i], seq[i + 1])
                       for i in range(len(seq) - 1)):
                continue
            acc, _ = accumulate_angles(np.array(seq), pos)
            winding = []
            for i, (th, thp) in enumerate(array.endpoint_azimuths()):
                winding.append(int(round(
                    (acc[i] - (thp - th)) / (2.0 * math.pi))))
            if tuple(winding) != target_winding:
                continue
            length = sum(math.hypot(seq[i + 1][0] - seq[i][0],
                                    seq[i + 1][1] - seq[i][1])
                         for i in range(len(seq) - 1))
            best = min(best, length)
    return best


def test_class_length_matches_brute_force():
    # single solenoid at the origin, endpoints (-1, 0) and (1, 0): the
    # chord would thread the puncture, so even the zero class detours
    array = SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0,
                          fluxes=[0.0], source=(-1.0, 0.0),
                          detector=(1.0, 0.0))
    for target in ((0,), (1,), (-1,)):
        cls = HomotopyClass(winding=target, cutoff=1,
                            index=class_index(target, 1))
        brute = _brute_force_min_length(array, target, max_vertices=8)
        assert math.isfinite(brute)
        assert class_length(cls, array) == pytest.approx(brute, abs=1e-9)
    # this geometry is mirror-symmetric about the chord, so the 0 and
    # +1 classes are reflections of each other with equal length; both
    # must exceed the blocked straight chord
    zero = class_length(
        HomotopyClass(winding=(0,), cutoff=1, index=2), array)
    plus = class_length(
        HomotopyClass(winding=(1,), cutoff=1, index=3), array)
    assert plus == pytest.approx(zero, rel=1e-12)
    assert zero > 2.0


def test_winding_class_longer_than_chord_class_off_axis():
    # endpoints below the solenoid: the zero class is the straight
    # chord, any winding class must climb around the puncture
    array = _single_solenoid()
    zero = class_length(
        HomotopyClass(winding=(0,), cutoff=1, index=2), array)
    plus = class_length(
        HomotopyClass(winding=(1,), cutoff=1, index=3), array)
    assert plus > zero


def test_representative_path_arity_validation():
    array = _single_solenoid()
    cls = HomotopyClass(winding=(1, 0), cutoff=1, index=class_index((1, 0), 1))
    with pytest.raises(DomainError):
        representative_path(cls, array)
    with pytest.raises(DomainError):
        class_length(cls, array)


def test_array_validation():
    with pytest.raises(DomainError):
        SolenoidArray(positions=[(0.0, 0.0), (0.0, 0.0)], spacing=1.0,
                      fluxes=[0.0, 0.0], source=(-1.0, -1.0),
                      detector=(1.0, -1.0))
    with pytest.raises(DomainError):
        SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0, fluxes=[0.0],
                      source=(0.0, 0.0), detector=(1.0, -1.0))
    with pytest.raises(DomainError):
        SolenoidArray(positions=[(0.0, 0.0)], spacing=0.0, fluxes=[0.0],
                      source=(-1.0, -1.0), detector=(1.0, -1.0))
    with pytest.raises(DomainError):
        SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0,
                      fluxes=[0.0, 1.0], source=(-1.0, -1.0),
                      detector=(1.0, -1.0))
