"""Synthetic flux-tuned intensity experiment."""
import cmath
import math

import numpy as np
import pytest

from abpaths.errors import DomainError, StructuralError
from abpaths.forward import (FluxDesign, design_fluxes, intensity,
                             lifted_sensing_matrix, phase_matrix,
                             run_experiment, structural_lifted_rank)
from abpaths.homotopy import SolenoidArray, enumerate_classes


def _one_solenoid():
    return SolenoidArray(positions=[(0.0, 0.0)], spacing=1.0, fluxes=[0.0],
                         source=(-2.0, -1.0), detector=(2.0, -1.0))


def _two_solenoids():
    return SolenoidArray(positions=[(0.0, 0.0), (1.0, 0.0)], spacing=1.0,
                         fluxes=[0.0, 0.0], source=(-2.0, -1.0),
                         detector=(3.0, -1.0))


def test_all_off_reference_is_plain_coherent_sum():
    array = _one_solenoid()
    angles = array.endpoint_azimuths()
    amplitudes = {(-1,): 0.2 - 0.1j, (0,): 1.0 + 0.5j, (1,): -0.3 + 0.4j}
    got = intensity([0.0], amplitudes, array, angles)
    assert got == pytest.approx(abs(sum(amplitudes.values())) ** 2,
                                rel=1e-14)


def test_single_class_intensity_is_flux_independent():
    array = _one_solenoid()
    angles = array.endpoint_azimuths()
    amplitudes = {(1,): 0.8 - 0.6j}
    values = [intensity([flux], amplitudes, array, angles)
              for flux in (0.0, 1.0, 2.5, 4.0)]
    assert all(v == pytest.approx(values[0], rel=1e-14) for v in values)
    assert values[0] == pytest.approx(1.0, rel=1e-14)


def test_two_class_hand_check():
    array = _one_solenoid()
    th, thp = array.endpoint_azimuths()[0]
    k0, k1 = 1.0 + 0.5j, -0.3 + 0.4j
    amplitudes = {(0,): k0, (1,): k1}
    for alpha in (0.0, 0.25, 0.5):
        flux = 2.0 * math.pi * alpha
        hand = abs(k0 * cmath.exp(1j * alpha * (thp - th))
                   + k1 * cmath.exp(1j * alpha
                                    * (thp - th + 2.0 * math.pi))) ** 2
        got = intensity([flux], amplitudes, array,
                        array.endpoint_azimuths())
        assert got == pytest.approx(hand, rel=1e-13)


def test_global_phase_invariance():
    array = _two_solenoids()
    angles = array.endpoint_azimuths()
    rng = np.random.default_rng(0)
    amplitudes = {c.winding: complex(*rng.standard_normal(2))
                  for c in enumerate_classes(array, 1)}
    rotated = {w: cmath.exp(0.73j) * v for w, v in amplitudes.items()}
    for _ in range(5):
        fluxes = rng.uniform(0.0, 2.0 * math.pi, size=2)
        a = intensity(fluxes, amplitudes, array, angles)
        b = intensity(fluxes, rotated, array, angles)
        assert b == pytest.approx(a, rel=1e-12)


def test_integer_flux_quantum_invariance():
    # shifting any flux by a full quantum multiplies every class by the
    # same unit factor, leaving intensities unchanged
    array = _two_solenoids()
    angles = array.endpoint_azimuths()
    rng = np.random.default_rng(1)
    amplitudes = {c.winding: complex(*rng.standard_normal(2))
                  for c in enumerate_classes(array, 1)}
    fluxes = rng.uniform(0.0, 2.0 * math.pi, size=2)
    base = intensity(fluxes, amplitudes, array, angles)
    shifted = intensity(fluxes + 2.0 * math.pi, amplitudes, array, angles)
    assert shifted == pytest.approx(base, rel=1e-12)


def test_conjugate_reflection_twin_reproduces_all_intensities():
    # reflecting winding labels and conjugating amplitudes is invisible
    # to every intensity measurement (the identifiability twin)
    array = _one_solenoid()
    angles = array.endpoint_azimuths()
    rng = np.random.default_rng(5)
    amplitudes = {c.winding: complex(*rng.standard_normal(2))
                  for c in enumerate_classes(array, 1)}
    twin = {w: amplitudes[(-w[0],)].conjugate() for w in amplitudes}
    for _ in range(10):
        fluxes = rng.uniform(0.0, 2.0 * math.pi, size=1)
        a = intensity(fluxes, amplitudes, array, angles)
        b = intensity(fluxes, twin, array, angles)
        assert b == pytest.approx(a, rel=1e-12)


def test_run_experiment_noiseless_and_reference_row():
    array = _one_solenoid()
    amplitudes = {(-1,): 0.2 - 0.1j, (0,): 1.0 + 0.5j, (1,): -0.3 + 0.4j}
    design = design_fluxes(1, 3, seed=3)
    results = run_experiment(design, amplitudes, array)
    assert [set_id for set_id, _ in results] == list(range(design.n_sets))
    assert results[0][1] == pytest.approx(
        abs(sum(amplitudes.values())) ** 2, rel=1e-13)
    again = run_experiment(design, amplitudes, array)
    assert results == again


def test_noise_is_unbiased_within_three_standard_errors():
    array = _one_solenoid()
    amplitudes = {(0,): 1.0 + 0.5j, (1,): -0.3 + 0.4j}
    row = np.array([[0.0], [1.3]])
    clean = run_experiment(FluxDesign(sets=row), amplitudes, array)[1][1]
    level = 0.05
    reps = 1000
    draws = np.array([
        run_experiment(FluxDesign(sets=row, noise_level=level, seed=k),
                       amplitudes, array)[1][1]
        for k in range(reps)])
    standard_error = level * clean / math.sqrt(reps)
    assert abs(draws.mean() - clean) <= 3.0 * standard_error


def test_noise_is_content_addressed_permutation_equivariant():
    array = _two_solenoids()
    rng = np.random.default_rng(9)
    amplitudes = {c.winding: complex(*rng.standard_normal(2))
                  for c in enumerate_classes(array, 1)}
    r1, r2 = rng.uniform(0.0, 2.0 * math.pi, size=(2, 2))
    design_a = FluxDesign(sets=[[0.0, 0.0], r1, r2], noise_level=0.01,
                          seed=11)
    design_b = FluxDesign(sets=[[0.0, 0.0], r2, r1], noise_level=0.01,
                          seed=11)
    res_a = dict(run_experiment(design_a, amplitudes, array))
    res_b = dict(run_experiment(design_b, amplitudes, array))
    # reordering the sets permutes the noisy values without changing them
    assert res_a[1] == res_b[2]
    assert res_a[2] == res_b[1]


def test_design_set_counts():
    assert design_fluxes(1, 1).n_sets == 4          # ceil(2.5) + 1
    design = design_fluxes(2, 9, oversampling=2.5, seed=7)
    assert design.n_sets == 24                      # ceil(22.5) + 1
    assert np.all(design.sets[0] == 0.0)
    assert design.n_solenoids == 2


def test_design_is_deterministic_and_vetted():
    a = design_fluxes(2, 9, seed=7)
    b = design_fluxes(2, 9, seed=7)
    assert np.array_equal(a.sets, b.sets)
    assert a.condition_measure == b.condition_measure > 0.0
    # the stored measure is the singular value at the structural rank
    windings = [c.winding for c in enumerate_classes(_two_solenoids(), 1)]
    phases = phase_matrix(windings, a.sets, [(0.0, 0.0), (0.0, 0.0)])
    svals = np.linalg.svd(lifted_sensing_matrix(phases), compute_uv=False)
    cap = min(a.n_sets, len(windings) ** 2, structural_lifted_rank(windings))
    assert a.condition_measure == pytest.approx(float(svals[cap - 1]),
                                                rel=1e-12)


def test_design_condition_positive_across_seeds():
    for seed in range(100):
        design = design_fluxes(2, 9, seed=seed)
        assert design.condition_measure > 1e-3


def test_structural_lifted_rank_values():
    def box(n_solenoids, n_cut):
        from itertools import product
        return list(product(range(-n_cut, n_cut + 1), repeat=n_solenoids))

    assert structural_lifted_rank(box(1, 1)) == 5
    assert structural_lifted_rank(box(1, 2)) == 9
    assert structural_lifted_rank(box(2, 1)) == 25
    assert structural_lifted_rank(box(3, 1)) == 125
    assert structural_lifted_rank([(0,)]) == 1


def test_lifted_sensing_matrix_layout():
    windings = [(-1,), (0,), (1,)]
    sets = np.array([[0.0], [1.0], [2.0], [3.0]])
    phases = phase_matrix(windings, sets, [(0.0, 0.0)])
    lifted = lifted_sensing_matrix(phases)
    assert lifted.shape == (4, 9)
    assert np.all(lifted[:, :3] == 1.0)  # diagonal coefficients


def test_design_and_flux_set_validation():
    with pytest.raises(DomainError):
        FluxDesign(sets=[[1.0], [0.0]])     # reference row not all-off
    with pytest.raises(DomainError):
        FluxDesign(sets=[[0.0]], noise_level=-0.1)
    design = design_fluxes(1, 3)
    with pytest.raises(ValueError):
        design.sets[1, 0] = 0.0             # sets are frozen
    with pytest.raises(DomainError):
        design_fluxes(0, 3)
    with pytest.raises(DomainError):
        design_fluxes(1, 3, oversampling=1.5)
    with pytest.raises(DomainError):
        design_fluxes(2, 5)                 # 5 is not a winding box


def test_arity_mismatches_are_structural_errors():
    array = _one_solenoid()
    angles = array.endpoint_azimuths()
    amplitudes = {(0,): 1.0 + 0.0j}
    with pytest.raises(StructuralError):
        intensity([0.0, 0.0], amplitudes, array, angles)
    with pytest.raises(StructuralError):
        intensity([0.0], {(0, 0): 1.0 + 0.0j}, array, angles)
    with pytest.raises(StructuralError):
        run_experiment(design_fluxes(2, 9), amplitudes, array)
