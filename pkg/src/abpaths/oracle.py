"""Lattice ground truth for class amplitudes, and a monitored-path
sampler.

Covering-space propagation
--------------------------
``free_class_amplitudes`` evolves the free one-step kernel on a
covering space: the field carries, besides the spatial grid index, one
winding integer per solenoid.  Each time step applies the exact
one-step free kernel as two one-dimensional passes (first along x,
then along y).  Because every hop is axis-aligned, a hop changes a
solenoid's winding integer exactly when it crosses the horizontal
branch-cut ray extending leftward from that solenoid — which only
vertical hops can do.  Counting signed cut crossings and correcting
with the principal endpoint azimuths reproduces the continuous
accumulated angle of the hop sequence losslessly, so binning by
crossing count at the detector is identical to tracking continuous
angles and rounding once at detection.

Two scheme parameters beyond the physical ones control accuracy:

* ``time_damping`` tilts the time into the lower half plane,
  T -> T*(1 - i*eps).  The undamped one-step kernel has unit modulus
  at every hop distance, so window-truncation artifacts would never
  decay; the damping suppresses them exponentially.  Cross-checks
  against quadrature values must evaluate both sides at the same
  damped time (both extend analytically).
* the grid is offset by a third of a cell from the window edge, which
  keeps every puncture of the shipped geometries strictly between
  grid lines at every refinement level (grids are nested under
  doubling).  No hop can then pass through a solenoid and no crossing
  is ambiguous; the constructor rejects geometries that violate this.

Resolution ladders refine the grid and the time step together (cell
size proportional to time step, i.e. ballistic refinement), holding
window and endpoints fixed; see ``refine_lattice`` and
``richardson_band`` for the measured-convergence error bars.
"""
import math
from collections.abc import Mapping
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from abpaths.errors import CapacityError, DomainError
from abpaths.homotopy import HomotopyClass, class_index

#: refuse lattice runs whose working set would exceed this many bytes
MEMORY_BUDGET_BYTES = 3_000_000_000

#: minimum distance (in cells) between a solenoid and any grid line
_MIN_PUNCTURE_CLEARANCE = 0.2


@dataclass(frozen=True)
class LatticeSpec:
    """Discretization of the covering-space propagation.

    ``grid_extent`` is the half-width of the square spatial window
    centred at (``center_x``, ``center_y``); ``winding_clamp`` bounds
    each tracked winding component, anything escaping the clamp box
    lands in an absorbing overflow bucket; ``time_damping`` is the
    dimensionless tilt of the time into the lower half plane.

    ``grid_offset_cells`` shifts all grid nodes off the symmetric
    positions by that fraction of a cell.  The default third of a cell
    keeps punctures placed on round coordinates strictly between grid
    lines, and ``refine_lattice`` doubles it so the absolute node
    positions of coarser levels are preserved exactly (nested grids:
    endpoints that are nodes stay the same physical points across a
    refinement ladder).
    """

    time_steps: int
    grid_extent: float
    grid_points_per_axis: int
    winding_clamp: int
    time_damping: float = 0.3
    center_x: float = 0.0
    center_y: float = 0.0
    grid_offset_cells: float = 1.0 / 3.0

    def __post_init__(self):
        if int(self.time_steps) < 2:
            raise DomainError(
                f"time_steps must be >= 2, got {self.time_steps}")
        if not self.grid_extent > 0:
            raise DomainError(
                f"grid_extent must be > 0, got {self.grid_extent}")
        if int(self.grid_points_per_axis) < 8:
            raise DomainError(
                f"grid_points_per_axis must be >= 8, got "
                f"{self.grid_points_per_axis}")
        if int(self.winding_clamp) < 1:
            raise DomainError(
                f"winding_clamp must be >= 1, got {self.winding_clamp}")
        if not self.time_damping > 0:
            raise DomainError(
                f"time_damping must be > 0, got {self.time_damping}")
        if not (math.isfinite(self.center_x)
                and math.isfinite(self.center_y)
                and math.isfinite(self.grid_offset_cells)):
            raise DomainError("window center and offset must be finite")


def refine_lattice(lattice, factor=2):
    """Next ladder level: grid and time step refined together.

    The offset is scaled so absolute node positions are preserved
    (every coarse node is a fine node).
    """
    if int(factor) < 2:
        raise DomainError(f"factor must be >= 2, got {factor}")
    return replace(lattice,
                   time_steps=lattice.time_steps * int(factor),
                   grid_points_per_axis=(lattice.grid_points_per_axis
                                         * int(factor)),
                   grid_offset_cells=(lattice.grid_offset_cells
                                      * int(factor)))


def resolution_ladder(lattice, levels):
    """Base spec plus ``levels - 1`` successive twofold refinements."""
    if int(levels) < 1:
        raise DomainError(f"levels must be >= 1, got {levels}")
    out = [lattice]
    for _ in range(int(levels) - 1):
        out.append(refine_lattice(out[-1]))
    return out


class ClassAmplitudeMap(Mapping):
    """Per-class amplitudes keyed by winding vector, plus overflow.

    Mapping keys are ``HomotopyClass`` instances (lookup also accepts
    bare winding tuples); ``overflow`` is the total amplitude that
    arrived at the detector outside the class box.
    """

    def __init__(self, classes, amplitudes, overflow, snapped_source,
                 snapped_detector, cell_size, lattice):
        self.classes = list(classes)
        self._by_winding = dict(amplitudes)
        self.overflow = complex(overflow)
        self.snapped_source = np.asarray(snapped_source, dtype=float)
        self.snapped_detector = np.asarray(snapped_detector, dtype=float)
        self.cell_size = float(cell_size)
        self.lattice = lattice

    @staticmethod
    def _key(key):
        if isinstance(key, HomotopyClass):
            return key.winding
        return tuple(int(n) for n in key)

    def __getitem__(self, key):
        return self._by_winding[self._key(key)]

    def __contains__(self, key):
        return self._key(key) in self._by_winding

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def tracked_total(self):
        """Sum over all tracked classes, excluding overflow."""
        return sum(self._by_winding.values(), 0.0 + 0.0j)


def _axis_nodes(center, extent, n, offset_cells):
    cell = 2.0 * extent / n
    origin = center - extent + cell * (offset_cells % 1.0)
    return origin + cell * np.arange(n), cell


def _snap(nodes_x, nodes_y, point):
    ix = int(np.argmin(np.abs(nodes_x - point[0])))
    iy = int(np.argmin(np.abs(nodes_y - point[1])))
    return ix, iy


class _Geometry:
    """Grid nodes, snapped endpoints, and cut-crossing block layout."""

    def __init__(self, array, lattice):
        ext = lattice.grid_extent
        g = int(lattice.grid_points_per_axis)
        center = (lattice.center_x, lattice.center_y)
        self.xs, self.cell = _axis_nodes(center[0], ext, g,
                                         lattice.grid_offset_cells)
        self.ys, _ = _axis_nodes(center[1], ext, g,
                                 lattice.grid_offset_cells)
        margin = 2.0 * array.spacing
        for name, pt in (("source", array.source),
                         ("detector", array.detector),
                         *((f"solenoid {i}", p)
                           for i, p in enumerate(array.positions))):
            if (abs(pt[0] - center[0]) > ext - margin
                    or abs(pt[1] - center[1]) > ext - margin):
                raise DomainError(
                    f"{name} at {tuple(pt)} is within {margin} of the "
                    f"window edge (extent {ext} about {tuple(center)})")
        for i, p in enumerate(array.positions):
            dx = np.abs(self.xs - p[0]).min() / self.cell
            dy = np.abs(self.ys - p[1]).min() / self.cell
            if min(dx, dy) < _MIN_PUNCTURE_CLEARANCE:
                raise DomainError(
                    f"solenoid {i} lies within {min(dx, dy):.3f} cells "
                    f"of a grid line; adjust grid_points_per_axis, the "
                    f"grid offset, or the geometry so punctures fall "
                    f"between lines")
        self.src = _snap(self.xs, self.ys, array.source)
        self.det = _snap(self.xs, self.ys, array.detector)
        if self.src == self.det:
            raise DomainError(
                "grid too coarse: source and detector snap to the "
                "same node")
        pos = array.positions
        self.n_s = pos.shape[0]
        ux = np.unique(pos[:, 0]) if self.n_s else np.zeros(0)
        uy = np.unique(pos[:, 1]) if self.n_s else np.zeros(0)
        self.col_group = np.searchsorted(ux, self.xs)   # in [0, len(ux)]
        self.row_band = np.searchsorted(uy, self.ys)    # in [0, len(uy)]
        self.n_groups = len(ux) + 1
        self.n_bands = len(uy) + 1
        # solenoid i's cut covers a column iff the column is left of
        # the solenoid: active for every column group below its wall
        if self.n_s:
            wall = np.searchsorted(ux, pos[:, 0])
            self.active = (np.arange(self.n_groups)[:, None]
                           <= wall[None, :])
        else:
            self.active = np.zeros((self.n_groups, 0), dtype=bool)
        # a hop from row band p to band q > p crosses cut levels
        # p..q-1; solenoid i sits at cut level searchsorted(uy, y_i)
        self.cut_level = (np.searchsorted(uy, pos[:, 1])
                          if self.n_s else np.zeros(0, dtype=int))


def _one_step_matrix(nodes, cell, dt_c, mass, hbar):
    pref = np.sqrt(np.complex128(mass / (2j * math.pi * hbar * dt_c)))
    diff = nodes[:, None] - nodes[None, :]
    return cell * pref * np.exp(1j * mass * diff ** 2 / (2 * hbar * dt_c))


def _estimate_bytes(g, n_sheets):
    # two sheet buffers plus matrices and GEMM scratch
    return (2 * n_sheets + 6) * g * g * 16


def _propagate_sheets(array, params, lattice, n_cut, track_length):
    """Shared covering-space stepping core.

    Evolves the winding-tracked field; with ``track_length`` it also
    evolves the companion accumulator carrying sum over lattice paths
    of (path length so far) * amplitude, where the length of one time
    step is the taxicab length |dx| + |dy| of its two axis-aligned
    hops.  Returns (field, length_field_or_None, bookkeeping...).
    """
    n_cut = int(n_cut)
    if n_cut < 0:
        raise DomainError(f"n_cut must be >= 0, got {n_cut}")
    clamp = int(lattice.winding_clamp)
    if clamp < n_cut:
        raise DomainError(
            f"winding_clamp {clamp} must be >= n_cut {n_cut}")
    geo = _Geometry(array, lattice)
    g = int(lattice.grid_points_per_axis)
    n_s = geo.n_s
    sheet_windings = list(product(range(-clamp, clamp + 1), repeat=n_s))
    n_sheets = len(sheet_windings) + 1      # + absorbing overflow slot
    over = n_sheets - 1
    cost_sheets = n_sheets * (2 if track_length else 1)
    if _estimate_bytes(g, cost_sheets) > MEMORY_BUDGET_BYTES:
        raise CapacityError(
            f"covering-space working set ~"
            f"{_estimate_bytes(g, cost_sheets) / 1e9:.2f} GB exceeds the "
            f"{MEMORY_BUDGET_BYTES / 1e9:.2f} GB budget "
            f"(grid {g}^2 x {cost_sheets} sheet buffers)")
    sheet_of = {w: k for k, w in enumerate(sheet_windings)}

    n_t = int(lattice.time_steps)
    dt_c = (params.total_time * (1.0 - 1j * lattice.time_damping)) / n_t
    mx = _one_step_matrix(geo.xs, geo.cell, dt_c, params.mass, params.hbar)
    my = _one_step_matrix(geo.ys, geo.cell, dt_c, params.mass, params.hbar)

    # precompute the y-pass block plan: per column group and ordered
    # band pair, the sheet increment applied to crossing amplitude
    rows_of_band = [np.flatnonzero(geo.row_band == b)
                    for b in range(geo.n_bands)]
    cols_of_group = [np.flatnonzero(geo.col_group == v)
                     for v in range(geo.n_groups)]
    col_slices = []
    for v in range(geo.n_groups):
        cols = cols_of_group[v]
        if cols.size:
            col_slices.append((v, slice(cols[0], cols[-1] + 1)))
    band_slices = {}
    for b in range(geo.n_bands):
        rows = rows_of_band[b]
        if rows.size:
            band_slices[b] = slice(rows[0], rows[-1] + 1)

    def sheet_delta(v, p, q):
        """Sheet increment for a hop from band p to band q in column
        group v (zero vector when nothing is crossed)."""
        if n_s == 0 or p == q:
            return (0,) * n_s
        lo, hi = (p, q) if p < q else (q, p)
        sign = -1 if q > p else 1   # upward hop lowers the winding
        d = [0] * n_s
        for i in range(n_s):
            if lo <= geo.cut_level[i] < hi and geo.active[v, i]:
                d[i] = sign
        return tuple(d)

    plan = []
    for v, csl in col_slices:
        for p, psl in band_slices.items():
            for q, qsl in band_slices.items():
                plan.append((csl, psl, qsl,
                             sheet_delta(v, p, q), my[qsl, psl]))

    def shift_sheet(s, d):
        if s == over:
            return over
        w = sheet_windings[s]
        w2 = tuple(wi + di for wi, di in zip(w, d))
        return sheet_of.get(w2, over)

    targets = [np.array([shift_sheet(s, d) for s in range(n_sheets)])
               for (_, _, _, d, _) in plan]

    field = np.zeros((n_sheets, g, g), dtype=np.complex128)
    field[sheet_of[(0,) * n_s], geo.src[1], geo.src[0]] = \
        1.0 / geo.cell ** 2
    mxt = np.ascontiguousarray(mx.T)
    scratch = np.empty_like(field)
    if track_length:
        hop_x = np.abs(geo.xs[:, None] - geo.xs[None, :])
        hop_y = np.abs(geo.ys[:, None] - geo.ys[None, :])
        mxdt = np.ascontiguousarray((mx * hop_x).T)
        dplan = [my[qsl, psl] * hop_y[qsl, psl]
                 for (_, psl, qsl, _, _) in plan]
        length_field = np.zeros_like(field)
        length_scratch = np.empty_like(field)
    for _ in range(n_t):
        # x pass: no cut can be crossed by a horizontal hop
        if track_length:
            np.matmul(length_field, mxt, out=length_scratch)
            length_scratch += field @ mxdt
            length_field, length_scratch = length_scratch, length_field
        np.matmul(field, mxt, out=scratch)
        field, scratch = scratch, field
        # y pass: block GEMMs scattering into shifted sheets
        scratch[:] = 0.0
        if track_length:
            length_scratch[:] = 0.0
        for entry, (csl, psl, qsl, _, block), tgt in zip(
                range(len(plan)), plan, targets):
            moved = np.matmul(block, field[:, psl, csl])
            if track_length:
                carried = np.matmul(block, length_field[:, psl, csl])
                carried += np.matmul(dplan[entry], field[:, psl, csl])
                np.add.at(length_scratch[:, qsl, csl], tgt, carried)
            np.add.at(scratch[:, qsl, csl], tgt, moved)
        field, scratch = scratch, field
        if track_length:
            length_field, length_scratch = length_scratch, length_field

    return (field, length_field if track_length else None,
            geo, sheet_windings, over)


def _collect_map(field, geo, sheet_windings, over, n_cut, lattice):
    iy, ix = geo.det[1], geo.det[0]
    classes = []
    amplitudes = {}
    overflow = complex(field[over, iy, ix])
    for s, w in enumerate(sheet_windings):
        amp = complex(field[s, iy, ix])
        if all(abs(n) <= n_cut for n in w):
            classes.append(HomotopyClass(
                winding=w, cutoff=n_cut, index=class_index(w, n_cut)))
            amplitudes[w] = amp
        else:
            overflow += amp
    classes.sort(key=lambda c: c.index)
    return ClassAmplitudeMap(
        classes, amplitudes, overflow,
        snapped_source=(geo.xs[geo.src[0]], geo.ys[geo.src[1]]),
        snapped_detector=(geo.xs[geo.det[0]], geo.ys[geo.det[1]]),
        cell_size=geo.cell, lattice=lattice)


def free_class_amplitudes(array, params, lattice, n_cut):
    """Free per-class amplitudes from covering-space propagation.

    Returns a ``ClassAmplitudeMap`` over the classes with all
    |winding_i| <= n_cut; amplitude arriving with any component beyond
    n_cut (including past the clamp) is accumulated into ``overflow``.
    """
    field, _, geo, sheet_windings, over = _propagate_sheets(
        array, params, lattice, n_cut, track_length=False)
    return _collect_map(field, geo, sheet_windings, over, int(n_cut),
                        lattice)


def length_weighted_class_amplitudes(array, params, lattice, n_cut):
    """Per-class amplitude and length-weighted amplitude, jointly.

    Returns ``(amplitudes, length_products)``: two aligned class maps
    where ``length_products[h]`` is the sum over lattice paths in class
    h of (taxicab path length) * amplitude.  The complex ratio
    ``length_products[h] / amplitudes[h]`` is then the amplitude-
    weighted mean path length of the class, and summing numerators and
    denominators over any grouping of classes gives exactly the same
    overall ratio — the independent check used for weighted-average
    consistency.
    """
    field, length_field, geo, sheet_windings, over = _propagate_sheets(
        array, params, lattice, n_cut, track_length=True)
    n_cut = int(n_cut)
    return (_collect_map(field, geo, sheet_windings, over, n_cut, lattice),
            _collect_map(length_field, geo, sheet_windings, over, n_cut,
                         lattice))


def lattice_free_propagator(array, params, lattice):
    """Untracked lattice propagation (single sheet, no winding).

    Uses the same window, grid and snapped endpoints as
    ``free_class_amplitudes`` on the same array, so the covering-space
    completeness identity (tracked classes + overflow = untracked
    total) is an exact reordering of the same arithmetic.
    """
    geo = _Geometry(array, lattice)
    g = int(lattice.grid_points_per_axis)
    n_t = int(lattice.time_steps)
    dt_c = (params.total_time * (1.0 - 1j * lattice.time_damping)) / n_t
    mx = _one_step_matrix(geo.xs, geo.cell, dt_c, params.mass, params.hbar)
    my = _one_step_matrix(geo.ys, geo.cell, dt_c, params.mass, params.hbar)
    field = np.zeros((g, g), dtype=np.complex128)
    field[geo.src[1], geo.src[0]] = 1.0 / geo.cell ** 2
    mxt = np.ascontiguousarray(mx.T)
    for _ in range(n_t):
        field = field @ mxt
        field = my @ field
    return complex(field[geo.det[1], geo.det[0]])


def lattice_length_accumulation(array, params, lattice):
    """Untracked propagation with taxicab length accumulation.

    Returns ``(total_amplitude, total_length_product)`` at the
    detector; the ratio is the amplitude-weighted mean lattice path
    length with no winding bookkeeping at all, an independent oracle
    for any grouped weighted average over the same lattice.
    """
    geo = _Geometry(array, lattice)
    g = int(lattice.grid_points_per_axis)
    n_t = int(lattice.time_steps)
    dt_c = (params.total_time * (1.0 - 1j * lattice.time_damping)) / n_t
    mx = _one_step_matrix(geo.xs, geo.cell, dt_c, params.mass, params.hbar)
    my = _one_step_matrix(geo.ys, geo.cell, dt_c, params.mass, params.hbar)
    hop_x = np.abs(geo.xs[:, None] - geo.xs[None, :])
    hop_y = np.abs(geo.ys[:, None] - geo.ys[None, :])
    mxdt = np.ascontiguousarray((mx * hop_x).T)
    myd = my * hop_y
    field = np.zeros((g, g), dtype=np.complex128)
    field[geo.src[1], geo.src[0]] = 1.0 / geo.cell ** 2
    mxt = np.ascontiguousarray(mx.T)
    length_field = np.zeros_like(field)
    for _ in range(n_t):
        length_field = length_field @ mxt + field @ mxdt
        field = field @ mxt
        length_field = my @ length_field + myd @ field
        field = my @ field
    return (complex(field[geo.det[1], geo.det[0]]),
            complex(length_field[geo.det[1], geo.det[0]]))


def richardson_band(maps, safety=8.0):
    """Measured convergence error bars from a resolution ladder.

    Given class-amplitude maps at two or more successive refinement
    levels, returns ``{winding: band}`` where ``band`` is ``safety``
    times the largest difference between consecutive levels — a
    deliberately conservative bracket for the finest level's distance
    to the continuum (winding sectors converge slowly and irregularly,
    so a fitted-rate extrapolation would under-cover).
    """
    if len(maps) < 2:
        raise DomainError("need at least two resolution levels")
    windings = [c.winding for c in maps[0].classes]
    bands = {}
    for w in windings:
        diffs = [abs(maps[k + 1][w] - maps[k][w])
                 for k in range(len(maps) - 1)]
        bands[w] = safety * max(diffs)
    return bands


def convergence_report(maps, safety=8.0, settled_ratio=0.5):
    """Classify each sector of a resolution ladder as settled or not.

    A sector whose last refinement still changed it by
    ``settled_ratio`` of its own magnitude (or more) is not yet in the
    convergent regime: its consecutive differences say nothing about
    its distance to the continuum, so no error band can honestly be
    attached.  Returns ``{winding: (value, band, ratio, settled)}``
    with the finest-level value, the ``richardson_band`` bracket, the
    last diff-to-magnitude ratio, and the settled flag.
    """
    bands = richardson_band(maps, safety=safety)
    report = {}
    for c in maps[0].classes:
        w = c.winding
        value = maps[-1][w]
        last_diff = abs(maps[-1][w] - maps[-2][w])
        mag = abs(value)
        ratio = last_diff / mag if mag > 0 else math.inf
        report[w] = (value, bands[w], ratio, ratio < settled_ratio)
    return report


def monitored_length(delta_x, params, n_steps, samples, seed,
                     kick_scale=1.0):
    """Mean measured length of a position-monitored trajectory.

    The particle drifts at unit speed along x for ``total_time``; at
    each of ``n_steps`` intervals its position is localized to width
    ``delta_x``, adding an isotropic Gaussian displacement whose
    standard deviation combines the momentum kick hbar*dt/(mass*dx)
    with localization jitter of width dx.  ``kick_scale`` scales the
    whole stochastic part (0 recovers the classical drift exactly).
    Returns ``(mean, standard_error)`` of the sampled polyline length;
    deterministic for fixed seed, independent of worker count.
    """
    if not delta_x > 0:
        raise DomainError(f"delta_x must be > 0, got {delta_x}")
    if int(n_steps) < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    if int(samples) < 100:
        raise DomainError(
            f"samples must be >= 100 for a meaningful standard error, "
            f"got {samples}")
    if kick_scale < 0:
        raise DomainError(f"kick_scale must be >= 0, got {kick_scale}")
    n_steps = int(n_steps)
    samples = int(samples)
    dt = params.total_time / n_steps
    sigma_kick = params.hbar * dt / (params.mass * delta_x)
    sigma = kick_scale * math.hypot(sigma_kick, delta_x)
    children = np.random.SeedSequence(seed).spawn(samples)
    lengths = np.empty(samples)
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        steps = rng.normal(0.0, 1.0, size=(n_steps, 2)) * sigma
        steps[:, 0] += dt
        lengths[k] = np.hypot(steps[:, 0], steps[:, 1]).sum()
    mean = float(lengths.mean())
    sem = float(lengths.std(ddof=1) / math.sqrt(samples))
    return mean, sem
