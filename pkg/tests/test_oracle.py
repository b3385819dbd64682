"""Lattice covering-space oracle and the monitored-path sampler."""
import math

import numpy as np
import pytest

from abpaths.errors import CapacityError, DomainError
from abpaths.homotopy import SolenoidArray
from abpaths.oracle import (LatticeSpec, convergence_report,
                            free_class_amplitudes,
                            lattice_free_propagator,
                            lattice_length_accumulation,
                            length_weighted_class_amplitudes,
                            monitored_length, refine_lattice,
                            resolution_ladder, richardson_band)
from abpaths.propagator import PropagatorParams, free_kernel_2d_at_time

PARAMS = PropagatorParams(mass=1.0, total_time=1.0, alpha=0.0, hbar=1.0)


def _array():
    return SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0, fluxes=[0.0],
                         source=(-1.0, -0.625), detector=(1.0, -0.625))


def _lattice(**overrides):
    spec = dict(time_steps=8, grid_extent=5.0, grid_points_per_axis=160,
                winding_clamp=2, time_damping=0.3, center_x=0.0,
                center_y=-0.625)
    spec.update(overrides)
    return LatticeSpec(**spec)


def test_lattice_spec_validation():
    with pytest.raises(DomainError):
        _lattice(time_steps=1)
    with pytest.raises(DomainError):
        _lattice(grid_extent=0.0)
    with pytest.raises(DomainError):
        _lattice(grid_points_per_axis=4)
    with pytest.raises(DomainError):
        _lattice(winding_clamp=0)
    with pytest.raises(DomainError):
        _lattice(time_damping=0.0)


def test_refinement_ladder_scales_grid_and_time_together():
    base = _lattice()
    ladder = resolution_ladder(base, 3)
    assert [spec.time_steps for spec in ladder] == [8, 16, 32]
    assert [spec.grid_points_per_axis for spec in ladder] == [160, 320, 640]
    # offset doubling keeps absolute node positions nested
    assert ladder[1].grid_offset_cells == base.grid_offset_cells * 2
    with pytest.raises(DomainError):
        refine_lattice(base, factor=1)


def test_scene_must_fit_window_with_margin():
    array = _array()
    with pytest.raises(DomainError):
        free_class_amplitudes(array, PARAMS, _lattice(grid_extent=2.5), 1)
    with pytest.raises(DomainError):
        # clamp below the requested cutoff
        free_class_amplitudes(array, PARAMS, _lattice(winding_clamp=1), 2)


def test_puncture_on_grid_line_is_rejected():
    with pytest.raises(DomainError):
        free_class_amplitudes(_array(), PARAMS,
                              _lattice(grid_offset_cells=0.0), 1)


def test_capacity_guard_precedes_allocation():
    with pytest.raises(CapacityError):
        free_class_amplitudes(_array(), PARAMS,
                              _lattice(winding_clamp=2000), 1)


def test_zero_solenoids_single_class_equals_free_lattice_propagator():
    array = SolenoidArray(positions=[], spacing=1.0, fluxes=[],
                          source=(-1.0, -0.625), detector=(1.0, -0.625))
    lattice = _lattice()
    amp_map = free_class_amplitudes(array, PARAMS, lattice, 0)
    assert [c.winding for c in amp_map.classes] == [()]
    plain = lattice_free_propagator(array, PARAMS, lattice)
    assert amp_map[()] == pytest.approx(plain, rel=1e-13)
    assert amp_map.overflow == 0.0


def test_lattice_free_propagator_converges_to_continuum():
    array = SolenoidArray(positions=[], spacing=1.0, fluxes=[],
                          source=(-1.0, -0.625), detector=(1.0, -0.625))
    ladder = resolution_ladder(_lattice(), 2)
    errors = []
    for lattice in ladder:
        amp_map = free_class_amplitudes(array, PARAMS, lattice, 0)
        # the continuum reference lives at the same damped time and the
        # same snapped endpoints
        time_c = PARAMS.total_time * (1.0 - 1j * 0.3)
        disp = (np.asarray(amp_map.snapped_detector)
                - np.asarray(amp_map.snapped_source))
        ref = free_kernel_2d_at_time(disp, PARAMS, time_c)
        errors.append(abs(amp_map[()] - ref) / abs(ref))
    # with a damped time the windowed free propagation is nearly exact
    # already at the coarse level; both levels sit at the 1e-7 scale
    assert max(errors) < 1e-5


def test_winding_completeness_identity():
    # class amplitudes plus overflow reproduce the untracked lattice
    # propagator: two summation orders of the same field
    array, lattice = _array(), _lattice()
    amp_map = free_class_amplitudes(array, PARAMS, lattice, 2)
    total = sum(amp_map[c] for c in amp_map.classes) + amp_map.overflow
    plain = lattice_free_propagator(array, PARAMS, lattice)
    assert abs(total - plain) <= 1e-12 * abs(plain)
    assert amp_map.tracked_total() == pytest.approx(total - amp_map.overflow,
                                                    rel=1e-12)


def test_coarse_map_regression_values():
    amp_map = free_class_amplitudes(_array(), PARAMS, _lattice(), 2)
    assert amp_map[(0,)] == pytest.approx(
        0.07611677306994785 + 0.02992727758616804j, rel=1e-9)
    # moduli decay away from the direct class
    assert abs(amp_map[(0,)]) > abs(amp_map[(-1,)]) > abs(amp_map[(-2,)])
    assert abs(amp_map[(0,)]) > abs(amp_map[(1,)]) > abs(amp_map[(2,)])


def test_gauge_independence_under_rigid_translation():
    shift = np.array([0.3, -0.2])
    array, lattice = _array(), _lattice()
    moved = SolenoidArray(positions=array.positions + shift, spacing=1.0,
                          fluxes=[0.0], source=array.source + shift,
                          detector=array.detector + shift)
    lattice_moved = _lattice(center_x=lattice.center_x + shift[0],
                             center_y=lattice.center_y + shift[1])
    base = free_class_amplitudes(array, PARAMS, lattice, 1)
    translated = free_class_amplitudes(moved, PARAMS, lattice_moved, 1)
    for cls in base.classes:
        assert translated[cls.winding] == pytest.approx(base[cls.winding],
                                                        rel=1e-9)


def test_length_weighted_completeness():
    array, lattice = _array(), _lattice()
    amp, length_product = length_weighted_class_amplitudes(
        array, PARAMS, lattice, 2)
    total_amp, total_len = lattice_length_accumulation(array, PARAMS,
                                                       lattice)
    s_amp = sum(amp[c] for c in amp.classes) + amp.overflow
    s_len = sum(length_product[c] for c in length_product.classes) \
        + length_product.overflow
    assert abs(s_amp - total_amp) <= 1e-12 * abs(total_amp)
    assert abs(s_len - total_len) <= 1e-12 * abs(total_len)
    # plain and length-weighted propagation agree on the amplitudes
    plain = free_class_amplitudes(array, PARAMS, lattice, 2)
    for cls in plain.classes:
        assert amp[cls.winding] == pytest.approx(plain[cls.winding],
                                                 rel=1e-12)


def test_convergence_report_two_levels():
    array = _array()
    ladder = resolution_ladder(_lattice(), 2)
    maps = [free_class_amplitudes(array, PARAMS, spec, 2)
            for spec in ladder]
    bands = richardson_band(maps)
    report = convergence_report(maps)
    for winding in ((-1,), (0,), (1,)):
        value, band, ratio, settled = report[winding]
        assert band == bands[winding] > 0.0
        assert settled and ratio < 0.5
        assert value == maps[-1][winding]
    with pytest.raises(DomainError):
        richardson_band(maps[:1])


def test_monitored_classical_limit_is_exact_drift():
    mean, sem = monitored_length(0.05, PARAMS, n_steps=50, samples=100,
                                 seed=1, kick_scale=0.0)
    assert mean == pytest.approx(PARAMS.total_time, rel=1e-12)
    assert sem == 0.0


def test_monitored_sampler_is_deterministic():
    a = monitored_length(0.02, PARAMS, n_steps=100, samples=200, seed=7)
    b = monitored_length(0.02, PARAMS, n_steps=100, samples=200, seed=7)
    c = monitored_length(0.02, PARAMS, n_steps=100, samples=200, seed=8)
    assert a == b
    assert a != c


def test_monitored_halving_resolution_doubles_length():
    # deep quantum regime: kick sigma ~ hbar dt/(mass dx) dominates
    kwargs = dict(params=PARAMS, n_steps=200, samples=10_000)
    coarse, _ = monitored_length(0.01, seed=21, **kwargs)
    fine, _ = monitored_length(0.005, seed=22, **kwargs)
    assert 1.8 <= fine / coarse <= 2.2


def test_monitored_mean_monotone_in_resolution():
    kwargs = dict(params=PARAMS, n_steps=200, samples=2_000)
    ladder = [0.02, 0.01, 0.005]
    means = [monitored_length(dx, seed=31 + k, **kwargs)[0]
             for k, dx in enumerate(ladder)]
    assert means[0] < means[1] < means[2]


def test_monitored_domain_errors():
    with pytest.raises(DomainError):
        monitored_length(0.0, PARAMS, 10, 100, 0)
    with pytest.raises(DomainError):
        monitored_length(0.1, PARAMS, 0, 100, 0)
    with pytest.raises(DomainError):
        monitored_length(0.1, PARAMS, 10, 99, 0)
    with pytest.raises(DomainError):
        monitored_length(0.1, PARAMS, 10, 100, 0, kick_scale=-1.0)
