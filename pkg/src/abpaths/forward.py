"""Synthetic interference experiment over tunable solenoid fluxes.

A detector intensity is the squared modulus of the coherent sum of one
complex amplitude per homotopy class, each multiplied by its
flux-dependent unit phase.  This module generates random flux designs
(with the all-off reference always present as set 0), evaluates the
resulting intensities, and optionally applies multiplicative Gaussian
measurement noise.

Noise is content-addressed: the per-set random draw is seeded from the
design seed together with the bit patterns of that set's fluxes, so
reordering the flux sets permutes the noisy intensities without
changing any of them.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DesignError, DomainError, StructuralError
from .homotopy import flux_phase

__all__ = [
    "FluxDesign",
    "design_fluxes",
    "intensity",
    "run_experiment",
    "phase_matrix",
    "lifted_sensing_matrix",
    "DEGENERACY_RTOL",
]

# A design counts as degenerate when the smallest singular value of its
# lifted sensing matrix falls below this fraction of the largest.
DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class FluxDesign:
    """A batch of flux settings for one experiment.

    Attributes
    ----------
    sets : ndarray, shape (n_sets, n_solenoids)
        One row of per-solenoid fluxes (radians of acquired phase per
        full turn, i.e. 2*pi*alpha_i) per measurement.  Row 0 must be
        the all-off reference.
    noise_level : float
        Relative standard deviation of multiplicative Gaussian noise;
        0 means noiseless.
    seed : int
        Root seed for the noise stream.
    condition_measure : float
        Smallest singular value of the lifted sensing matrix used to
        vet the design, or ``nan`` when it was never computed.
    """

    sets: np.ndarray
    noise_level: float = 0.0
    seed: int = 0
    condition_measure: float = field(default=math.nan, compare=False)

    def __post_init__(self):
        sets = np.atleast_2d(np.asarray(self.sets, dtype=float))
        if sets.ndim != 2 or sets.size == 0:
            raise DomainError("flux sets must form a non-empty 2-d array")
        if not np.all(np.isfinite(sets)):
            raise DomainError("flux sets must be finite")
        if np.any(sets[0] != 0.0):
            raise DomainError("set 0 must be the all-off reference "
                              "(all fluxes zero)")
        if not (self.noise_level >= 0.0 and math.isfinite(self.noise_level)):
            raise DomainError(
                f"noise_level must be finite and >= 0, got {self.noise_level}")
        sets.setflags(write=False)
        object.__setattr__(self, "sets", sets)

    @property
    def n_sets(self):
        return self.sets.shape[0]

    @property
    def n_solenoids(self):
        return self.sets.shape[1]


def _classes_and_values(amplitudes):
    """Split a class->amplitude mapping into parallel winding/value
    lists, in the mapping's own iteration order."""
    windings = []
    values = []
    for key in amplitudes:
        winding = getattr(key, "winding", key)
        windings.append(tuple(int(n) for n in winding))
        values.append(complex(amplitudes[key]))
    if not windings:
        raise DomainError("amplitude map is empty")
    width = len(windings[0])
    if any(len(w) != width for w in windings):
        raise StructuralError("winding vectors in the amplitude map have "
                              "inconsistent lengths")
    return windings, values


def intensity(flux_set, amplitudes, array, endpoint_angles):
    """Detector intensity |sum_h K_h * phase_h(flux_set)|^2.

    ``amplitudes`` maps homotopy classes (or bare winding tuples) to
    complex amplitudes; ``endpoint_angles`` lists per-solenoid
    (theta_i, theta_prime_i) as produced by
    ``SolenoidArray.endpoint_azimuths``.
    """
    windings, values = _classes_and_values(amplitudes)
    flux_set = [float(f) for f in flux_set]
    if len(flux_set) != array.n_solenoids:
        raise StructuralError(
            f"flux set has {len(flux_set)} entries for "
            f"{array.n_solenoids} solenoids")
    if len(windings[0]) != array.n_solenoids:
        raise StructuralError(
            f"amplitude classes wind around {len(windings[0])} solenoids "
            f"but the array has {array.n_solenoids}")
    total = 0.0 + 0.0j
    for winding, value in zip(windings, values):
        total += value * flux_phase(winding, flux_set, endpoint_angles)
    return abs(total) ** 2


def _noise_factor(seed, flux_row, level):
    """Multiplicative noise factor (1 + level*g), g standard normal,
    seeded by the design seed and the flux values themselves."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF]
    for f in flux_row:
        entropy.append(int(np.float64(f).view(np.uint64)))
    g = np.random.default_rng(np.random.SeedSequence(entropy)).standard_normal()
    return 1.0 + level * g


def run_experiment(design, amplitudes, array):
    """Evaluate every flux set of a design.

    Returns a list of ``(set_id, intensity)`` with set_id the row index
    in ``design.sets``; row 0 is always the all-off reference.  With a
    nonzero noise level each intensity is multiplied by an independent
    Gaussian factor (1 + level*g) whose draw depends only on the design
    seed and that set's flux values.
    """
    if design.n_solenoids != array.n_solenoids:
        raise StructuralError(
            f"design has {design.n_solenoids} flux columns for "
            f"{array.n_solenoids} solenoids")
    endpoint_angles = array.endpoint_azimuths()
    results = []
    for set_id in range(design.n_sets):
        row = design.sets[set_id]
        value = intensity(row, amplitudes, array, endpoint_angles)
        if design.noise_level > 0.0:
            value *= _noise_factor(design.seed, row, design.noise_level)
        results.append((set_id, value))
    return results


def phase_matrix(windings, flux_sets, endpoint_angles):
    """Complex (n_sets, n_classes) matrix of unit phases, one row per
    flux set and one column per winding vector."""
    flux_sets = np.atleast_2d(np.asarray(flux_sets, dtype=float))
    windings = [tuple(int(n) for n in w) for w in windings]
    out = np.empty((flux_sets.shape[0], len(windings)), dtype=complex)
    for i, row in enumerate(flux_sets):
        for j, winding in enumerate(windings):
            out[i, j] = flux_phase(winding, row, endpoint_angles)
    return out


def lifted_sensing_matrix(phases):
    """Real matrix of the intensity map acting on class-pair products.

    Each intensity is linear in the Hermitian matrix X = K K^H:
    I_f = sum_{h,h'} P_{fh} conj(P_{fh'}) X_{hh'}.  Columns parametrise
    X by its diagonal (n real) and the real/imaginary parts of the
    upper triangle, so the returned matrix has shape
    (n_sets, n_classes**2) and its singular values measure how well the
    design pins down every interference product.
    """
    phases = np.asarray(phases, dtype=complex)
    n_sets, n_classes = phases.shape
    blocks = [np.ones((n_sets, n_classes))]  # diagonal coefficients
    re_cols = []
    im_cols = []
    for h in range(n_classes):
        for hp in range(h + 1, n_classes):
            b = phases[:, h] * np.conj(phases[:, hp])
            re_cols.append(2.0 * b.real)
            im_cols.append(-2.0 * b.imag)
    if re_cols:
        blocks.append(np.column_stack(re_cols))
        blocks.append(np.column_stack(im_cols))
    return np.hstack(blocks)


def structural_lifted_rank(windings):
    """Rank ceiling of the lifted sensing map for these classes.

    Every diagonal column of the lifted matrix is all-ones, and each
    pair column depends on the flux set only through the pair's winding
    difference (the endpoint contribution cancels inside the product);
    a difference and its negation span the same real plane.  No flux
    design can therefore exceed

        1 + 2 * (number of distinct pair differences up to sign)

    independent rows, so design conditioning must be read at this rank
    rather than at the raw matrix size.
    """
    windings = [tuple(int(n) for n in getattr(w, "winding", w))
                for w in windings]
    diffs = set()
    for a, wa in enumerate(windings):
        for wb in windings[a + 1:]:
            d = tuple(p - q for p, q in zip(wb, wa))
            first = next((x for x in d if x), 0)
            if first:
                diffs.add(d if first > 0 else tuple(-x for x in d))
    return 1 + 2 * len(diffs)


def _winding_box(n_solenoids, n_classes):
    """Recover the symmetric winding cutoff from a class count of the
    form (2*n_cut+1)**n_solenoids and enumerate that box."""
    import itertools

    n_cut_f = (n_classes ** (1.0 / n_solenoids) - 1.0) / 2.0
    n_cut = int(round(n_cut_f))
    if (2 * n_cut + 1) ** n_solenoids != n_classes or n_cut < 0:
        raise DomainError(
            f"class count {n_classes} is not a symmetric winding box "
            f"for {n_solenoids} solenoids")
    return [tuple(w) for w in
            itertools.product(range(-n_cut, n_cut + 1), repeat=n_solenoids)]


def design_fluxes(n_solenoids, n_classes, oversampling=2.5, seed=0,
                  noise_level=0.0, max_retries=5):
    """Draw a random flux design able to separate all class pairs.

    Produces ``ceil(oversampling * n_classes) + 1`` flux sets: the
    all-off reference plus uniform draws on [0, 2*pi) per solenoid.
    The design is vetted through the singular values of its lifted
    sensing matrix (computed with the interference part of the phases
    only, since the endpoint part cancels in every intensity).  The
    lifted map has a design-independent kernel — see
    ``structural_lifted_rank`` — so the condition measure is the
    singular value at that structural rank (capped by the set count),
    which a healthy draw keeps well away from zero.  A degenerate draw
    is retried with a fresh derived seed, and after ``max_retries``
    failures a DesignError is raised.
    """
    if n_solenoids < 1:
        raise DomainError(f"need at least one solenoid, got {n_solenoids}")
    if n_classes < 1:
        raise DomainError(f"need at least one class, got {n_classes}")
    if oversampling < 2.0:
        raise DomainError(
            f"oversampling must be >= 2 so the design is never "
            f"underdetermined, got {oversampling}")
    windings = _winding_box(n_solenoids, n_classes)
    n_sets = math.ceil(oversampling * n_classes) + 1
    rank_cap = min(n_sets, n_classes ** 2, structural_lifted_rank(windings))
    zero_angles = [(0.0, 0.0)] * n_solenoids
    last_measure = 0.0
    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        sets = rng.uniform(0.0, 2.0 * math.pi, size=(n_sets, n_solenoids))
        sets[0] = 0.0
        phases = phase_matrix(windings, sets, zero_angles)
        svals = np.linalg.svd(lifted_sensing_matrix(phases),
                              compute_uv=False)
        last_measure = float(svals[rank_cap - 1])
        if last_measure > DEGENERACY_RTOL * float(svals.max()):
            return FluxDesign(sets=sets, noise_level=noise_level, seed=seed,
                              condition_measure=last_measure)
    raise DesignError(
        f"no non-degenerate flux design after {max_retries} attempts "
        f"(last condition measure {last_measure:.3e})")
