"""Recovery of per-class complex amplitudes from intensity data.

Intensities depend on the amplitude vector K only through |P K|^2 with
P the unit-phase sensing matrix, so one global phase of K is
unobservable.  The gauge is fixed by constraining one anchor class to
a real non-negative amplitude, leaving 2*n_classes - 1 real unknowns.
A damped Gauss-Newton (Levenberg-Marquardt) iteration with the
analytic Jacobian minimises the squared intensity misfit; because the
quartic landscape has many shallow local minima at realistic
measurement counts, each start is first refined by alternating
projections (replace the modelled moduli by the measured ones, then
least-squares re-fit the amplitudes) and the best few of a screened
candidate pool are polished.  Non-convergence is reported in the
result, never raised.

A structural caveat for flux-tuning designs: when the phase of class h
under flux set f has the product form exp(i(beta_f + n_h . omega_f))
with a winding box closed under negation, the reflected conjugate
amplitude vector (K'_n = conj(K_{-n})) reproduces every intensity
exactly.  Intensity-only data then determine the amplitudes only up to
this twin in addition to the global phase; ``identifiability_report``
detects and flags the structure when winding labels are available.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError

__all__ = [
    "InversionProblem",
    "InversionResult",
    "IdentifiabilityReport",
    "build_problem",
    "spectral_init",
    "solve",
    "aligned_error",
    "identifiability_report",
]

_UNIT_MODULUS_TOL = 1e-12
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class InversionProblem:
    """Intensity data plus the sensing phases that produced it.

    Attributes
    ----------
    intensities : ndarray, shape (n_sets,)
        Measured (possibly noisy) detector intensities.
    phases : ndarray, shape (n_sets, n_classes)
        Unit-modulus phase of every class under every flux set.
    gauge_anchor : int
        Column whose recovered amplitude is constrained to be real and
        non-negative, fixing the unobservable global phase.
    classes : tuple or None
        Optional homotopy classes labelling the columns; recovered
        amplitudes are keyed by them when present, by column index
        otherwise.
    """

    intensities: np.ndarray
    phases: np.ndarray
    gauge_anchor: int
    classes: tuple = None

    def __post_init__(self):
        intensities = np.asarray(self.intensities, dtype=float)
        phases = np.asarray(self.phases, dtype=complex)
        if intensities.ndim != 1 or phases.ndim != 2:
            raise DomainError("intensities must be 1-d and phases 2-d")
        if phases.shape[0] != intensities.shape[0]:
            raise DomainError(
                f"{intensities.shape[0]} intensities for "
                f"{phases.shape[0]} phase rows")
        if phases.shape[1] < 1:
            raise DomainError("need at least one class column")
        if not np.all(np.isfinite(intensities)):
            raise DomainError("intensities must be finite")
        off = np.max(np.abs(np.abs(phases) - 1.0))
        if not off <= _UNIT_MODULUS_TOL:
            raise DomainError(
                f"phases must have unit modulus (worst deviation {off:.3e})")
        if not 0 <= self.gauge_anchor < phases.shape[1]:
            raise DomainError(
                f"gauge anchor {self.gauge_anchor} outside "
                f"[0, {phases.shape[1]})")
        if self.classes is not None:
            classes = tuple(self.classes)
            if len(classes) != phases.shape[1]:
                raise DomainError(
                    f"{len(classes)} class labels for "
                    f"{phases.shape[1]} columns")
            object.__setattr__(self, "classes", classes)
        intensities.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "intensities", intensities)
        object.__setattr__(self, "phases", phases)

    @property
    def n_sets(self):
        return self.intensities.shape[0]

    @property
    def n_classes(self):
        return self.phases.shape[1]

    @property
    def underdetermined(self):
        """True when there are too few measurements to overdetermine
        the 2*n_classes - 1 real unknowns with margin."""
        return self.n_sets <= 2 * self.n_classes


@dataclass(frozen=True)
class InversionResult:
    """Outcome of one multistart solve."""

    amplitudes: dict
    converged: bool
    iterations: int
    residual_rms: float
    gradient_norm: float
    n_starts: int
    best_start: int


def spectral_init(intensities, phases):
    """Initial amplitude guess from the intensity-weighted sensing
    correlation: the leading eigenvector of (1/n) P^H diag(I) P,
    rescaled to fit the measured intensities in least squares."""
    intensities = np.asarray(intensities, dtype=float)
    phases = np.asarray(phases, dtype=complex)
    n_sets = intensities.shape[0]
    corr = phases.conj().T @ (intensities[:, None] * phases) / n_sets
    eigvals, eigvecs = np.linalg.eigh(corr)
    lead = eigvecs[:, -1]
    model = np.abs(phases @ lead) ** 2
    denom = float(model @ model)
    scale = float(intensities @ model) / denom if denom > 0.0 else 0.0
    return math.sqrt(max(scale, 0.0)) * lead


def build_problem(intensities, phases, classes=None, gauge_anchor=None):
    """Assemble an InversionProblem; when no anchor is given, pick the
    class with the largest spectral-guess magnitude so the gauge
    constraint binds the best-determined amplitude."""
    problem = InversionProblem(intensities=intensities, phases=phases,
                               gauge_anchor=0, classes=classes)
    if gauge_anchor is None:
        guess = spectral_init(problem.intensities, problem.phases)
        gauge_anchor = int(np.argmax(np.abs(guess)))
    if gauge_anchor == problem.gauge_anchor:
        return problem
    return InversionProblem(intensities=problem.intensities,
                            phases=problem.phases,
                            gauge_anchor=gauge_anchor, classes=classes)


def _rotate_anchor_real(vec, anchor):
    """Apply the global phase that makes vec[anchor] real >= 0."""
    pivot = vec[anchor]
    if pivot != 0.0:
        vec = vec * (np.conj(pivot) / abs(pivot))
    vec = vec.copy()
    vec[anchor] = vec[anchor].real
    return vec

def _pack(vec, anchor):
    imag = np.delete(vec.imag, anchor)
    return np.concatenate([vec.real, imag])


def _unpack(x, n_classes, anchor):
    vec = x[:n_classes].astype(complex)
    imag = np.insert(x[n_classes:], anchor, 0.0)
    return vec + 1j * imag


def _jacobian(residual_weight, phases, anchor):
    """d(residual)/d(parameters) for residual_f = I_f - |c_f|^2 with
    c = P K: columns are all real parts then all imaginary parts of K
    except the anchor's (structurally zero)."""
    mixed = residual_weight[:, None] * phases  # conj(c_f) * P_fh
    j_re = -2.0 * mixed.real
    j_im = 2.0 * np.delete(mixed.imag, anchor, axis=1)
    return np.hstack([j_re, j_im])


def _levenberg_marquardt(x0, intensities, phases, anchor, tol, max_iter):
    """Damped Gauss-Newton descent on the squared intensity misfit.

    Returns (x, converged, iterations, gradient_norm).  Convergence
    means the residual gradient norm dropped below tol; a damping
    blow-up ends the run unconverged.
    """
    n_classes = phases.shape[1]
    x = x0.copy()
    vec = _unpack(x, n_classes, anchor)
    field = phases @ vec
    residual = intensities - np.abs(field) ** 2
    cost = float(residual @ residual)
    damping = 1e-3
    gradient_norm = math.inf
    for iteration in range(1, max_iter + 1):
        jac = _jacobian(np.conj(field), phases, anchor)
        gradient = jac.T @ residual
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm <= tol:
            return x, True, iteration - 1, gradient_norm
        normal = jac.T @ jac
        curv = np.diag(normal).copy()
        floor = max(curv.max(), 1.0) * 1e-14
        np.clip(curv, floor, None, out=curv)
        accepted = False
        while damping <= 1e14:
            try:
                step = np.linalg.solve(normal + damping * np.diag(curv),
                                       -gradient)
            except np.linalg.LinAlgError:
                damping *= 4.0
                continue
            x_new = x + step
            vec_new = _unpack(x_new, n_classes, anchor)
            field_new = phases @ vec_new
            residual_new = intensities - np.abs(field_new) ** 2
            cost_new = float(residual_new @ residual_new)
            if cost_new < cost or (cost_new == cost
                                   and np.linalg.norm(step) < 1e-15):
                x, vec, field = x_new, vec_new, field_new
                residual, cost = residual_new, cost_new
                damping = max(damping / 3.0, 1e-15)
                accepted = True
                break
            damping *= 4.0
        if not accepted:
            return x, False, iteration, gradient_norm
    return x, False, max_iter, gradient_norm


# Multistart screening: candidates drawn per polished start, and the
# alternating-projection sweep counts used to screen and to refine.
_POOL_FACTOR = 10
_SCREEN_SWEEPS = 80
_REFINE_SWEEPS = 400


def _alternating_projections(vec, moduli, phases, pseudo_inverse, sweeps):
    """Classic modulus-replacement iteration: impose the measured
    moduli on the modelled field, then least-squares re-fit the
    amplitudes.  Cheap and far better than raw descent at escaping
    the shallow minima of the quartic misfit."""
    for _ in range(sweeps):
        field = phases @ vec
        scale = np.abs(field)
        scale[scale == 0.0] = 1.0
        vec = pseudo_inverse @ (moduli * field / scale)
    return vec


def solve(problem, tol=1e-10, max_iter=200, n_starts=6, seed=0):
    """Multistart amplitude recovery.

    A pool of candidates (the spectral guess plus seeded tilted and
    random vectors) is screened by a short alternating-projection
    refinement; the ``n_starts`` best-fitting survivors get a long
    refinement and a damped least-squares polish.  The result keeps the
    lowest final misfit, with ties broken by start order so the outcome
    is deterministic.  An underdetermined problem is refused before any
    iteration.
    """
    if problem.underdetermined:
        raise StructuralError(
            f"{problem.n_sets} measurements cannot overdetermine "
            f"{2 * problem.n_classes - 1} real unknowns; need more than "
            f"{2 * problem.n_classes}")
    if n_starts < 1:
        raise DomainError(f"n_starts must be >= 1, got {n_starts}")
    intensities = problem.intensities
    phases = problem.phases
    anchor = problem.gauge_anchor
    n_classes = problem.n_classes

    moduli = np.sqrt(np.clip(intensities, 0.0, None))
    pseudo_inverse = np.linalg.pinv(phases)
    spectral = spectral_init(intensities, phases)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    norm_target = math.sqrt(max(float(np.mean(intensities)), 0.0))
    spectral_norm = float(np.linalg.norm(spectral))
    tilt = 0.5 * max(spectral_norm, norm_target)

    pool = [spectral]
    for draw in range(_POOL_FACTOR * n_starts - 1):
        raw = rng.standard_normal(n_classes) + 1j * rng.standard_normal(
            n_classes)
        raw_norm = float(np.linalg.norm(raw))
        if raw_norm == 0.0:
            continue
        if draw % 2 == 0:
            pool.append(spectral + tilt * raw / raw_norm)
        else:
            pool.append(raw * (norm_target / raw_norm if norm_target > 0.0
                               else 1.0))
    screened = []
    for order, candidate in enumerate(pool):
        refined = _alternating_projections(candidate, moduli, phases,
                                           pseudo_inverse, _SCREEN_SWEEPS)
        misfit = intensities - np.abs(phases @ refined) ** 2
        screened.append((float(misfit @ misfit), order, refined))
    screened.sort(key=lambda item: (item[0], item[1]))

    best = None
    for index, (_, _, candidate) in enumerate(screened[:n_starts], start=1):
        vec0 = _alternating_projections(candidate, moduli, phases,
                                        pseudo_inverse, _REFINE_SWEEPS)
        x0 = _pack(_rotate_anchor_real(vec0, anchor), anchor)
        x, converged, iterations, gradient_norm = _levenberg_marquardt(
            x0, intensities, phases, anchor, tol, max_iter)
        vec = _unpack(x, n_classes, anchor)
        if vec[anchor].real < 0.0:
            vec = -vec  # global phase flip keeps the fit, fixes the sign
        residual = intensities - np.abs(phases @ vec) ** 2
        cost = float(residual @ residual)
        candidate = (cost, index, vec, converged, iterations, gradient_norm)
        if best is None or cost < best[0]:
            best = candidate
    cost, index, vec, converged, iterations, gradient_norm = best
    vec = _canonicalize_twin(vec, phases, problem.classes, anchor)
    if vec[anchor].real < 0.0:
        vec = -vec
    keys = problem.classes if problem.classes is not None else range(n_classes)
    amplitudes = {key: complex(v) for key, v in zip(keys, vec)}
    return InversionResult(
        amplitudes=amplitudes,
        converged=converged,
        iterations=iterations,
        residual_rms=math.sqrt(cost / problem.n_sets),
        gradient_norm=gradient_norm,
        n_starts=n_starts,
        best_start=index,
    )


def _as_winding_dict(mapping):
    out = {}
    for key in mapping:
        winding = getattr(key, "winding", key)
        out[tuple(int(n) for n in winding)] = complex(mapping[key])
    return out


def aligned_error(estimate, truth):
    """Relative L2 error after removing the unobservable global phase.

    Rotates the estimate by the phase that best aligns it with the
    truth (the argument of <truth, estimate>) and returns
    ||rot * estimate - truth|| / ||truth||.
    """
    est = _as_winding_dict(estimate)
    tru = _as_winding_dict(truth)
    if set(est) != set(tru):
        raise StructuralError("estimate and truth cover different classes")
    keys = sorted(tru)
    e = np.array([est[k] for k in keys])
    t = np.array([tru[k] for k in keys])
    t_norm = np.linalg.norm(t)
    if t_norm == 0.0:
        raise DomainError("truth amplitudes are all zero")
    overlap = np.vdot(e, t)  # sum conj(e) * t
    rot = overlap / abs(overlap) if overlap != 0.0 else 1.0
    return float(np.linalg.norm(rot * e - t) / t_norm)


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Diagnostics on whether a problem determines its amplitudes."""

    n_sets: int
    n_classes: int
    n_parameters: int
    underdetermined: bool
    linearized_svals: np.ndarray
    linearized_rank: int
    lifted_svals: np.ndarray
    n_duplicate_sets: int
    flags: tuple
    # True when the sensing family carries the conjugate-reflection
    # twin (see module docstring); informational, since the solver
    # resolves it by a deterministic convention rather than failing.
    twin_structure: bool = None


def _mirror_permutation(classes):
    """Column permutation sending each winding label to its negation,
    or None when labels are absent or not closed under negation."""
    if classes is None:
        return None
    windings = [tuple(getattr(c, "winding", c)) for c in classes]
    column = {w: j for j, w in enumerate(windings)}
    try:
        return [column[tuple(-n for n in w)] for w in windings], windings
    except KeyError:
        return None


def _twin_structure(phases, classes):
    """Detect the conjugate-reflection twin: with winding labels that
    form a negation-closed set, the twin exists exactly when
    P[f, -h] * P[f, h] is independent of h for every row f (then
    conj-reflecting any amplitude vector reproduces all intensities).
    Returns True/False, or None when the labels do not decide it."""
    mirrored = _mirror_permutation(classes)
    if mirrored is None:
        return None
    mirror, _ = mirrored
    product = phases * phases[:, mirror]
    spread = np.abs(product - product[:, :1]).max() if product.size else 0.0
    return bool(spread <= 1e-10)


def _canonicalize_twin(vec, phases, classes, anchor):
    """Pick a deterministic representative of the twin pair.

    The intensity misfit is exactly invariant under reflecting the
    winding labels and conjugating the amplitudes, so both twins fit
    any data equally well; without a convention the returned component
    flips with harmless numerical perturbations.  The convention keeps
    the representative whose magnitude-weighted reflection asymmetry
    sum_h s_h |K_h|^2 is non-negative, where s_h is the sign of the
    first nonzero winding component (odd under reflection)."""
    if not _twin_structure(phases, classes):
        return vec
    mirror, windings = _mirror_permutation(classes)
    signs = np.array([next((1.0 if n > 0 else -1.0 for n in w if n != 0),
                           0.0) for w in windings])
    asymmetry = float(signs @ (np.abs(vec) ** 2))
    if asymmetry < 0.0:
        vec = np.conj(vec[mirror])
        vec = _rotate_anchor_real(vec, anchor)
    return vec


def identifiability_report(problem, seed=0):
    """Singular spectra of the linearized intensity map at a random
    amplitude point and of the lifted map on class-pair products, with
    human-readable degeneracy flags."""
    from .forward import lifted_sensing_matrix, structural_lifted_rank

    intensities = problem.intensities
    phases = problem.phases
    anchor = problem.gauge_anchor
    n_classes = problem.n_classes
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vec = rng.standard_normal(n_classes) + 1j * rng.standard_normal(n_classes)
    norm_target = math.sqrt(max(float(np.mean(intensities)), 0.0))
    if norm_target > 0.0:
        vec *= norm_target / np.linalg.norm(vec)
    vec = _rotate_anchor_real(vec, anchor)
    field = phases @ vec
    jac = _jacobian(np.conj(field), phases, anchor)
    linearized_svals = np.linalg.svd(jac, compute_uv=False)
    linearized_rank = int(
        np.sum(linearized_svals > _RANK_RTOL * linearized_svals.max()))
    lifted_svals = np.linalg.svd(lifted_sensing_matrix(phases),
                                 compute_uv=False)
    # the lifted map has a class-structure kernel (see
    # forward.structural_lifted_rank), so degeneracy is judged at that
    # rank when winding labels are available
    lifted_cap = lifted_svals.size
    if problem.classes is not None:
        windings = [tuple(getattr(c, "winding", c))
                    for c in problem.classes]
        lifted_cap = min(lifted_cap, structural_lifted_rank(windings))
    rounded = np.round(phases, 12)
    n_duplicates = phases.shape[0] - len({row.tobytes() for row in rounded})

    flags = []
    n_parameters = 2 * n_classes - 1
    if problem.underdetermined:
        flags.append("underdetermined: too few flux sets for the unknowns")
    if linearized_rank < min(n_parameters, problem.n_sets):
        flags.append("linearized map is rank deficient at a random point")
    if lifted_svals[lifted_cap - 1] <= _RANK_RTOL * lifted_svals.max():
        flags.append("lifted class-pair system is degenerate")
    if n_duplicates:
        flags.append(f"{n_duplicates} duplicate flux sets")
    return IdentifiabilityReport(
        n_sets=problem.n_sets,
        n_classes=n_classes,
        n_parameters=n_parameters,
        underdetermined=problem.underdetermined,
        linearized_svals=linearized_svals,
        linearized_rank=linearized_rank,
        lifted_svals=lifted_svals,
        n_duplicate_sets=int(n_duplicates),
        flags=tuple(flags),
        twin_structure=_twin_structure(phases, problem.classes),
    )
