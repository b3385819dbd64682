"""Resolution-regularized expected path length and its power-law fit.

The chain ends here: per-class complex amplitudes weight per-class
path lengths into a complex expected length; scanning the regularizing
resolution (the solenoid spacing, i.e. the yardstick) and fitting
log-length against log-resolution yields the scaling exponent and from
it the Hausdorff dimension d_H = exponent + 1.

The weighted average of complex amplitudes is itself complex; the
modulus is reported as the physical length while the complex value is
always retained for inspection.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (ArityError, DegenerateNormalizationError, DomainError,
                     UnrepresentableClassError)
from .homotopy import SolenoidArray, class_length, enumerate_classes

__all__ = [
    "ExpectedLength",
    "expected_length",
    "ScanPoint",
    "PowerLawFit",
    "ScalingSeries",
    "fit_power_law",
    "solenoid_row",
    "LineScanScenario",
    "length_scan",
]


@dataclass(frozen=True)
class ExpectedLength:
    """Weighted-average result; unpacks as (complex_value,
    reported_length) for callers that only need the value."""

    complex_value: complex
    reported_length: float
    excluded_weight: float
    n_excluded: int

    def __iter__(self):
        return iter((self.complex_value, self.reported_length))


def _winding_of(key):
    return tuple(int(n) for n in getattr(key, "winding", key))


def expected_length(amplitudes, lengths, denominator_floor=1e-12,
                    overflow=0j):
    """Amplitude-weighted average path length over homotopy classes.

    ``amplitudes`` maps classes (or winding tuples) to complex weights;
    ``lengths`` maps them to class lengths (real for geometric lengths,
    complex values are accepted for accumulated length products).
    Classes missing from ``lengths`` are excluded from both sums, and
    their absolute weight — together with ``overflow``, the amplitude
    that escaped class tracking — is reported as the excluded weight
    fraction.  A normalizing sum with modulus at or below
    ``denominator_floor`` raises a degenerate-normalization error.
    """
    lengths_by_winding = {_winding_of(k): complex(lengths[k])
                          for k in lengths}
    numerator = 0.0 + 0.0j
    denominator = 0.0 + 0.0j
    excluded_abs = abs(complex(overflow))
    n_excluded = 0
    n_included = 0
    for key in amplitudes:
        weight = complex(amplitudes[key])
        winding = _winding_of(key)
        if winding in lengths_by_winding:
            numerator += lengths_by_winding[winding] * weight
            denominator += weight
            n_included += 1
        else:
            excluded_abs += abs(weight)
            n_excluded += 1
    if n_included == 0:
        raise DomainError("no class has both an amplitude and a length")
    if abs(denominator) <= denominator_floor:
        raise DegenerateNormalizationError(
            f"normalizing amplitude sum has modulus {abs(denominator):.3e}"
            f" <= floor {denominator_floor:.3e}")
    value = numerator / denominator
    total_abs = excluded_abs + abs(denominator)
    return ExpectedLength(
        complex_value=value,
        reported_length=abs(value),
        excluded_weight=excluded_abs / total_abs if total_abs > 0 else 0.0,
        n_excluded=n_excluded,
    )


@dataclass(frozen=True)
class ScanPoint:
    """One resolution of a scaling scan.

    ``solver_converged``/``solver_residual_rms`` report the amplitude
    recovery behind the point; oracle-mode points keep the defaults.
    A small gradient with a residual far above noise level means the
    recovery stalled in a local minimum — judge points by both.
    """

    delta_x: float
    epsilon: float
    complex_value: complex
    length: float
    excluded_weight: float = 0.0
    solver_converged: bool = True
    solver_residual_rms: float = 0.0

    def __post_init__(self):
        if not self.delta_x > 0:
            raise DomainError(f"delta_x must be > 0, got {self.delta_x}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.length > 0:
            raise DomainError(f"length must be > 0, got {self.length}")


@dataclass(frozen=True)
class PowerLawFit:
    """L(eps) = L0 * eps**(-exponent_alpha), d_H = exponent_alpha + 1."""

    L0: float
    exponent_alpha: float
    d_H: float
    r_squared: float


@dataclass(frozen=True)
class ScalingSeries:
    """Scan points (sorted by decreasing delta_x) plus an optional fit.

    ``epsilon`` of every point must equal delta_x / unit_length.
    """

    points: tuple
    unit_length: float = 1.0
    fit: PowerLawFit = None

    def __post_init__(self):
        if not self.unit_length > 0:
            raise DomainError(
                f"unit_length must be > 0, got {self.unit_length}")
        points = tuple(sorted(self.points, key=lambda p: -p.delta_x))
        if not points:
            raise DomainError("a scaling series needs at least one point")
        for p in points:
            expected_eps = p.delta_x / self.unit_length
            if abs(p.epsilon - expected_eps) > 1e-12 * max(expected_eps, 1.0):
                raise DomainError(
                    f"epsilon {p.epsilon} inconsistent with delta_x "
                    f"{p.delta_x} / unit_length {self.unit_length}")
        if self.fit is not None:
            if abs(self.fit.d_H - (self.fit.exponent_alpha + 1.0)) > 1e-12:
                raise DomainError("fit violates d_H = exponent + 1")
        object.__setattr__(self, "points", points)

    @property
    def excluded_weight(self):
        """Largest excluded weight fraction over the scan points."""
        return max(p.excluded_weight for p in self.points)

    @property
    def all_converged(self):
        """True when every point's amplitude recovery converged."""
        return all(p.solver_converged for p in self.points)


def fit_power_law(series):
    """Ordinary least squares for log L against log epsilon.

    Returns a copy of the series carrying the fit: L0 from the
    intercept, exponent_alpha = -slope, d_H = exponent_alpha + 1.  A
    constant series is an exact fit with exponent 0, so r_squared is
    reported as 1 whenever the residuals vanish, even though the
    response has no variance to explain.
    """
    points = series.points
    if len(points) < 3:
        raise ArityError(
            f"power-law fit needs at least 3 points, got {len(points)}")
    log_eps = np.log([p.epsilon for p in points])
    log_len = np.log([p.length for p in points])
    slope, intercept = np.polynomial.polynomial.polyfit(
        log_eps, log_len, 1)[::-1]
    residuals = log_len - (intercept + slope * log_eps)
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((log_len - log_len.mean()) ** 2))
    if ss_res <= 1e-28 * max(1.0, float(log_len @ log_len)):
        r_squared = 1.0
    else:
        r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    alpha = -float(slope)
    fit = PowerLawFit(L0=float(math.exp(intercept)), exponent_alpha=alpha,
                      d_H=alpha + 1.0, r_squared=r_squared)
    return replace(series, fit=fit)


def solenoid_row(source, detector, spacing, fluxes=None):
    """Fill the straight segment between the endpoints with a row of
    solenoids at the given spacing (the resolution yardstick).

    Places m = floor(distance/spacing) - 1 solenoids on the segment,
    centred so both endpoints keep at least one spacing of clearance;
    m < 1 yields an array with no solenoids (the degenerate resolution
    where no flux tube fits).
    """
    source = np.asarray(source, dtype=float)
    detector = np.asarray(detector, dtype=float)
    if not spacing > 0:
        raise DomainError(f"spacing must be > 0, got {spacing}")
    chord = detector - source
    distance = float(np.hypot(*chord))
    if distance == 0.0:
        raise DomainError("source and detector coincide")
    m = int(math.floor(distance / spacing)) - 1
    positions = []
    if m >= 1:
        direction = chord / distance
        offset = 0.5 * (distance - (m - 1) * spacing)
        for k in range(m):
            positions.append(tuple(source + (offset + k * spacing)
                                   * direction))
    if fluxes is None:
        fluxes = [0.0] * len(positions)
    return SolenoidArray(positions=positions, spacing=spacing,
                         fluxes=list(fluxes), source=tuple(source),
                         detector=tuple(detector))


@dataclass(frozen=True)
class LineScanScenario:
    """Everything a scaling scan needs besides the spacing ladder.

    The lattice window must accommodate the source-detector segment
    (plus margins) for every spacing; the same lattice is reused at
    every point so the discretization error is common mode.
    """

    source: tuple
    detector: tuple
    n_cut: int
    params: object                  # propagator parameter bundle
    lattice: object                 # covering-space lattice spec
    oversampling: float = 2.5
    noise_level: float = 0.0
    seed: int = 0
    n_starts: int = 6
    solver_tol: float = 1e-10
    max_iter: int = 200
    unit_length: float = 1.0
    denominator_floor: float = 1e-12


def _derived_seed(master, point_index, stage):
    """Documented sub-seed derivation: one master seed, the point's
    position in the ladder, and a stage tag (0 = flux design,
    1 = measurement noise, 2 = solver starts)."""
    return int(np.random.SeedSequence(
        [int(master), int(point_index), int(stage)]).generate_state(1)[0])


def _resolve_twin_by_lengths(recovered, lengths):
    """Pick between the recovered amplitudes and their reflected
    conjugate using the physical prior that shorter classes carry more
    weight: keep the candidate whose length-weighted absolute weight
    sum is smaller.  Exact ties keep the solver's representative."""
    windings = [_winding_of(k) for k in recovered]
    if any(tuple(-n for n in w) not in set(windings) for w in windings):
        return recovered
    values = {_winding_of(k): complex(recovered[k]) for k in recovered}
    twin = {w: np.conj(values[tuple(-n for n in w)]) for w in windings}
    lengths_by_winding = {_winding_of(k): lengths[k] for k in lengths}

    def score(vals):
        return sum(abs(complex(lengths_by_winding[w]))
                   * abs(vals[w]) ** 2
                   for w in windings if w in lengths_by_winding)

    if score(twin) < score(values):
        return twin
    return recovered


def _scan_point(scenario, spacing, point_index, pipeline_mode):
    from .forward import FluxDesign, design_fluxes, phase_matrix, \
        run_experiment
    from .inversion import build_problem, solve
    from .oracle import free_class_amplitudes

    array = solenoid_row(scenario.source, scenario.detector, spacing)
    classes = enumerate_classes(array, scenario.n_cut)
    lengths = {}
    for cls in classes:
        try:
            lengths[cls] = class_length(cls, array)
        except UnrepresentableClassError:
            continue
    oracle_map = free_class_amplitudes(array, scenario.params,
                                       scenario.lattice, scenario.n_cut)
    solver_converged = True
    solver_residual = 0.0
    if pipeline_mode == "oracle" or array.n_solenoids == 0:
        weights = oracle_map
        overflow = oracle_map.overflow
    elif pipeline_mode == "experiment":
        design = design_fluxes(
            array.n_solenoids, len(classes),
            oversampling=scenario.oversampling,
            seed=_derived_seed(scenario.seed, point_index, 0),
            noise_level=scenario.noise_level)
        if scenario.noise_level > 0.0:
            design = FluxDesign(sets=design.sets,
                                noise_level=scenario.noise_level,
                                seed=_derived_seed(scenario.seed,
                                                   point_index, 1))
        intensities = np.array(
            [value for _, value in run_experiment(design, oracle_map,
                                                  array)])
        phases = phase_matrix([c.winding for c in classes], design.sets,
                              array.endpoint_azimuths())
        problem = build_problem(intensities, phases, classes=classes)
        result = solve(problem, tol=scenario.solver_tol,
                       max_iter=scenario.max_iter,
                       n_starts=scenario.n_starts,
                       seed=_derived_seed(scenario.seed, point_index, 2))
        weights = _resolve_twin_by_lengths(result.amplitudes, lengths)
        overflow = 0j   # a measurement has no tracking overflow
        solver_converged = result.converged
        solver_residual = result.residual_rms
    else:
        raise DomainError(
            f"pipeline_mode must be 'oracle' or 'experiment', got "
            f"{pipeline_mode!r}")
    value = expected_length(weights, lengths,
                            denominator_floor=scenario.denominator_floor,
                            overflow=overflow)
    return ScanPoint(delta_x=spacing,
                     epsilon=spacing / scenario.unit_length,
                     complex_value=value.complex_value,
                     length=value.reported_length,
                     excluded_weight=value.excluded_weight,
                     solver_converged=solver_converged,
                     solver_residual_rms=solver_residual)


def length_scan(scenario, spacings, pipeline_mode):
    """Expected length at every spacing of a resolution ladder.

    For each spacing the solenoid row between the fixed endpoints is
    regenerated, classes are enumerated and measured (class lengths),
    class amplitudes come either from the lattice oracle
    (``pipeline_mode='oracle'``) or from a synthetic flux-tuning
    experiment plus amplitude recovery (``'experiment'``), and the
    weighted average becomes one scan point.  Stage failures propagate
    with the offending spacing attached.
    """
    spacings = [float(s) for s in spacings]
    if len(spacings) < 3:
        raise ArityError(
            f"a scan needs at least 3 spacings, got {len(spacings)}")
    points = []
    for point_index, spacing in enumerate(sorted(spacings, reverse=True)):
        try:
            points.append(_scan_point(scenario, spacing, point_index,
                                      pipeline_mode))
        except Exception as error:
            if error.args and isinstance(error.args[0], str):
                error.args = (f"{error.args[0]} [while scanning "
                              f"delta_x={spacing}]",) + error.args[1:]
            raise
    return ScalingSeries(points=tuple(points),
                         unit_length=scenario.unit_length)
