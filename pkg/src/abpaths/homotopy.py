"""Winding-number bookkeeping for solenoid arrays.

A path in the punctured plane is classified, up to deformation that
never crosses a solenoid, by one signed winding integer per solenoid.
This module measures those integers for concrete polylines, enumerates
the classes inside a cutoff box, attaches the unit-modulus flux phase
common to every path of a class, and constructs shortest representative
polylines through the gaps of the array.

Angle conventions used throughout:

* azimuths about a center use the ``atan2`` principal branch (-pi, pi];
* the accumulated angle of a polyline about a center is the sum of
  exact per-segment increments, each strictly inside (-pi, pi);
* the winding integer n completes  acc = (theta' - theta) + 2*pi*n
  with theta, theta' the principal endpoint azimuths.

Representative paths travel between a fixed waypoint set: the two
endpoints, the midpoints of nearest-neighbour solenoid pairs ("through
the gaps"), and a ring of bypass points half a spacing outside the
array's bounding box (so edge classes remain reachable).  Minimality
is a single shortest-path search on the covering graph whose states
pair a waypoint with the partial winding vector, components clamped to
[-(n_cut+1), n_cut+1]; one search serves every class of the box and is
cached per (array, n_cut).
"""
import heapq
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from abpaths._backend import accumulate_angles
from abpaths.errors import (CapacityError, DomainError, TopologyError,
                            UnrepresentableClassError)

#: refuse to enumerate more classes than this (combinatorial guard)
ENUMERATION_LIMIT = 1_000_000

#: segments closer to a solenoid than this (relative to spacing) are
#: treated as passing through it
_CLEARANCE_REL = 1e-9


def _as_point(p, name):
    a = np.asarray(p, dtype=float).reshape(-1)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise DomainError(f"{name} must be a finite 2-vector, got {p!r}")
    return a


@dataclass
class SolenoidArray:
    """Puncture points, their fluxes, and the experiment's endpoints.

    ``positions`` is an (N_S, 2) array (N_S may be 0); ``fluxes`` holds
    one dimensionless flux per solenoid in natural units, entering
    phases as alpha_i = flux_i / (2*pi); ``spacing`` is the nominal
    nearest-neighbour distance used for waypoint construction.
    """

    positions: np.ndarray
    spacing: float
    fluxes: np.ndarray
    source: np.ndarray
    detector: np.ndarray

    def __post_init__(self):
        self.positions = np.atleast_2d(
            np.asarray(self.positions, dtype=float))
        if self.positions.size == 0:
            self.positions = np.zeros((0, 2))
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise DomainError(
                f"positions must be an (N, 2) array, got shape "
                f"{self.positions.shape}")
        if not np.all(np.isfinite(self.positions)):
            raise DomainError("positions must be finite")
        self.fluxes = np.asarray(self.fluxes, dtype=float).reshape(-1)
        if self.fluxes.shape[0] != self.positions.shape[0]:
            raise DomainError(
                f"need one flux per solenoid: {self.fluxes.shape[0]} "
                f"fluxes for {self.positions.shape[0]} solenoids")
        if not np.all(np.isfinite(self.fluxes)):
            raise DomainError("fluxes must be finite")
        if not self.spacing > 0:
            raise DomainError(f"spacing must be > 0, got {self.spacing}")
        self.source = _as_point(self.source, "source")
        self.detector = _as_point(self.detector, "detector")
        n = self.positions.shape[0]
        if n >= 2:
            d = self.positions[:, None, :] - self.positions[None, :, :]
            dist = np.hypot(d[..., 0], d[..., 1])
            np.fill_diagonal(dist, np.inf)
            if dist.min() < _CLEARANCE_REL * self.spacing:
                raise DomainError("solenoid positions must be distinct")
        for name, pt in (("source", self.source),
                         ("detector", self.detector)):
            if n and np.hypot(*(self.positions - pt).T).min() \
                    < _CLEARANCE_REL * self.spacing:
                raise DomainError(f"{name} coincides with a solenoid")
        if np.hypot(*(self.detector - self.source)) == 0.0:
            raise DomainError("source and detector must differ")

    @property
    def n_solenoids(self):
        return self.positions.shape[0]

    def endpoint_azimuths(self):
        """Per-solenoid principal azimuths (theta_i, theta_prime_i)."""
        out = []
        for p in self.positions:
            s, d = self.source - p, self.detector - p
            out.append((math.atan2(s[1], s[0]), math.atan2(d[1], d[0])))
        return out


@dataclass(frozen=True)
class HomotopyClass:
    """One winding vector inside the cutoff box, with its 1-based index.

    Classes are ordered lexicographically by winding vector over the
    box {-n_cut..n_cut}^N_S (first component most significant); index
    is the 1-based rank in that order.
    """

    winding: tuple
    cutoff: int
    index: int

    def __post_init__(self):
        object.__setattr__(self, "winding",
                           tuple(int(n) for n in self.winding))
        if self.cutoff < 0:
            raise DomainError(f"cutoff must be >= 0, got {self.cutoff}")
        if any(abs(n) > self.cutoff for n in self.winding):
            raise DomainError(
                f"winding {self.winding} outside cutoff {self.cutoff}")
        if self.index != class_index(self.winding, self.cutoff):
            raise DomainError(
                f"index {self.index} does not encode winding "
                f"{self.winding} at cutoff {self.cutoff}")


def class_index(winding, n_cut):
    """1-based lexicographic rank of a winding vector in its box."""
    base = 2 * n_cut + 1
    h = 0
    for n in winding:
        h = h * base + (int(n) + n_cut)
    return h + 1


def winding_of_index(index, n_cut, n_solenoids):
    """Inverse of class_index."""
    base = 2 * n_cut + 1
    k = index - 1
    if not 0 <= k < base ** n_solenoids:
        raise DomainError(
            f"index {index} outside 1..{base ** n_solenoids}")
    out = []
    for _ in range(n_solenoids):
        out.append(k % base - n_cut)
        k //= base
    return tuple(reversed(out))


@dataclass(frozen=True)
class Polyline:
    """Piecewise-straight path; first vertex is the source, last the
    detector."""

    vertices: np.ndarray = field(compare=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise DomainError(
                f"polyline needs an (N>=2, 2) vertex array, got shape "
                f"{v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("polyline vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def length(self):
        d = np.diff(self.vertices, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


def winding_vector(path, array):
    """Winding integers and accumulated angles of a polyline.

    Returns ``(winding, accumulated_angles)`` with one entry per
    solenoid.  The polyline must run from the array's source to its
    detector and keep clear of every solenoid.
    """
    v = path.vertices
    scale = max(1.0, float(np.abs(v).max()))
    if np.hypot(*(v[0] - array.source)) > 1e-9 * scale:
        raise DomainError("polyline must start at the array source")
    if np.hypot(*(v[-1] - array.detector)) > 1e-9 * scale:
        raise DomainError("polyline must end at the array detector")
    if array.n_solenoids == 0:
        return [], []
    acc, clearance = accumulate_angles(v, array.positions)
    acc = np.asarray(acc)
    if clearance <= _CLEARANCE_REL * array.spacing:
        raise TopologyError(
            f"polyline passes through a solenoid (clearance "
            f"{clearance:.3g})")
    winding = []
    for i, (th, thp) in enumerate(array.endpoint_azimuths()):
        winding.append(int(round((acc[i] - (thp - th))
                                 / (2.0 * math.pi))))
    return winding, [float(a) for a in acc]


def enumerate_classes(array, n_cut):
    """All winding vectors of the cutoff box, in lexicographic order."""
    n_cut = int(n_cut)
    if n_cut < 0:
        raise DomainError(f"n_cut must be >= 0, got {n_cut}")
    n_s = array.n_solenoids
    n_h = (2 * n_cut + 1) ** n_s
    if n_h > ENUMERATION_LIMIT:
        raise CapacityError(
            f"{n_h} classes exceed the enumeration limit "
            f"{ENUMERATION_LIMIT}")
    rng = range(-n_cut, n_cut + 1)
    return [HomotopyClass(winding=w, cutoff=n_cut, index=k + 1)
            for k, w in enumerate(product(rng, repeat=n_s))]


def flux_phase(winding, fluxes, endpoint_angles):
    """Unit-modulus phase exp[i sum_i alpha_i((theta'_i - theta_i)
    + 2 pi n_i)] with alpha_i = flux_i / (2 pi).

    The endpoint-angle part is common to every class (independent of
    the winding), so only the 2*pi*n_i part drives interference
    between classes; both are kept so the phase is the exact gauge
    line integral.
    """
    if not (len(winding) == len(fluxes) == len(endpoint_angles)):
        raise DomainError(
            f"winding/fluxes/angles lengths differ: {len(winding)}, "
            f"{len(fluxes)}, {len(endpoint_angles)}")
    total = 0.0
    for flux, n, (th, thp) in zip(fluxes, winding, endpoint_angles):
        total += (flux / (2.0 * math.pi)) * (
            (thp - th) + 2.0 * math.pi * n)
    return complex(math.cos(total), math.sin(total))


def generalized_phase(cls, array, endpoint_angles):
    """Unit-modulus flux phase shared by all paths of one class.

    ``endpoint_angles`` lists per-solenoid (theta_i, theta_prime_i);
    see ``flux_phase`` for the formula.
    """
    if len(endpoint_angles) != array.n_solenoids:
        raise DomainError(
            f"need {array.n_solenoids} endpoint angle pairs, got "
            f"{len(endpoint_angles)}")
    return flux_phase(cls.winding, array.fluxes, endpoint_angles)


def _nearest_neighbor_midpoints(array):
    pos = array.positions
    n = pos.shape[0]
    mids = []
    for i in range(n):
        for j in range(i + 1, n):
            d = np.hypot(*(pos[i] - pos[j]))
            if d <= array.spacing * (1.0 + 1e-9):
                mids.append(0.5 * (pos[i] + pos[j]))
    return mids


def _bypass_ring(array):
    """Points half a spacing outside the array's bounding box."""
    pos, s = array.positions, array.spacing
    if pos.shape[0] == 0:
        return []
    lo = pos.min(axis=0) - 0.5 * s
    hi = pos.max(axis=0) + 0.5 * s
    nx = max(1, int(round((hi[0] - lo[0]) / s)))
    ny = max(1, int(round((hi[1] - lo[1]) / s)))
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    ring = []
    for x in xs:
        ring.append((x, lo[1]))
        ring.append((x, hi[1]))
    for y in ys[1:-1]:
        ring.append((lo[0], y))
        ring.append((hi[0], y))
    return [np.array(p) for p in ring]


def _segment_clear(u, v, positions, min_clear):
    if positions.shape[0] == 0:
        return True
    _, clearance = accumulate_angles(np.array([u, v]), positions)
    return clearance > min_clear


class _CoveringGraph:
    """Waypoint graph with per-edge winding increments, plus the result
    of one exhaustive lex-min shortest-path search over the clamped
    winding box."""

    def __init__(self, array, n_cut):
        self.array = array
        self.n_cut = n_cut
        self.bound = n_cut + 1
        self._build_waypoints()
        self._build_edges()
        self._search()

    def _build_waypoints(self):
        arr = self.array
        pts = [arr.source, arr.detector]
        pts += _nearest_neighbor_midpoints(arr)
        pts += _bypass_ring(arr)
        uniq = []
        for p in pts:
            if not any(np.hypot(*(p - q)) < 1e-12 for q in uniq):
                uniq.append(p)
        # canonical coordinate order makes index-tuple comparison the
        # lexicographic comparison of vertex sequences
        uniq.sort(key=lambda p: (p[0], p[1]))
        self.waypoints = np.array(uniq)
        self.src = next(i for i, p in enumerate(uniq)
                        if np.hypot(*(p - arr.source)) < 1e-12)
        self.det = next(i for i, p in enumerate(uniq)
                        if np.hypot(*(p - arr.detector)) < 1e-12)
        pos = arr.positions
        if pos.shape[0]:
            rel = self.waypoints[:, None, :] - pos[None, :, :]
            self.azimuth = np.arctan2(rel[..., 1], rel[..., 0])
        else:
            self.azimuth = np.zeros((len(uniq), 0))

    def _build_edges(self):
        arr = self.array
        w = self.waypoints
        n_w = len(w)
        min_clear = _CLEARANCE_REL * arr.spacing
        self.adj = [[] for _ in range(n_w)]
        for i in range(n_w):
            for j in range(i + 1, n_w):
                if not _segment_clear(w[i], w[j], arr.positions,
                                      min_clear):
                    continue
                length = float(np.hypot(*(w[j] - w[i])))
                if arr.n_solenoids:
                    acc, _ = accumulate_angles(w[[i, j]], arr.positions)
                    dth = self.azimuth[j] - self.azimuth[i]
                    k = np.rint((np.asarray(acc) - dth)
                                / (2.0 * math.pi)).astype(int)
                else:
                    k = np.zeros(0, dtype=int)
                self.adj[i].append((j, length, tuple(k)))
                self.adj[j].append((i, length, tuple(-k)))

    def _search(self):
        """Lex-min shortest path from (source, 0) to (detector, c) for
        every winding vector c in the clamped box."""
        n_s = self.array.n_solenoids
        bound = self.bound
        zero = (0,) * n_s
        start = (self.src, zero)
        heap = [(0.0, (self.src,), start)]
        done = set()
        self.paths = {}
        while heap:
            dist, path, (u, c) = heapq.heappop(heap)
            if (u, c) in done:
                continue
            done.add((u, c))
            if u == self.det:
                self.paths[c] = (dist, path)
            for v, length, k in self.adj[u]:
                c2 = tuple(ci + ki for ci, ki in zip(c, k))
                if any(abs(x) > bound for x in c2):
                    continue
                if (v, c2) in done:
                    continue
                heapq.heappush(heap,
                               (dist + length, path + (v,), (v, c2)))


_GRAPH_CACHE = {}


def _graph_for(array, n_cut):
    key = (array.positions.tobytes(), float(array.spacing),
           array.source.tobytes(), array.detector.tobytes(), int(n_cut))
    g = _GRAPH_CACHE.get(key)
    if g is None:
        g = _CoveringGraph(array, int(n_cut))
        if len(_GRAPH_CACHE) > 32:
            _GRAPH_CACHE.clear()
        _GRAPH_CACHE[key] = g
    return g


def representative_path(cls, array):
    """Shortest waypoint polyline realizing the class's winding vector.

    Vertices are restricted to the endpoint/midpoint/bypass waypoint
    set; among equal-length minima the lexicographically smallest
    vertex sequence is returned.  Classes whose winding cannot be
    realized inside the search clamp raise
    ``UnrepresentableClassError``.
    """
    if len(cls.winding) != array.n_solenoids:
        raise DomainError(
            f"class has {len(cls.winding)} winding components for "
            f"{array.n_solenoids} solenoids")
    g = _graph_for(array, cls.cutoff)
    hit = g.paths.get(cls.winding)
    if hit is None:
        raise UnrepresentableClassError(
            f"winding {cls.winding} unreachable on the waypoint graph "
            f"within clamp +-{g.bound}")
    _, path = hit
    return Polyline(vertices=g.waypoints[list(path)])


def class_length(cls, array):
    """Euclidean length of the class's representative polyline."""
    if len(cls.winding) != array.n_solenoids:
        raise DomainError(
            f"class has {len(cls.winding)} winding components for "
            f"{array.n_solenoids} solenoids")
    g = _graph_for(array, cls.cutoff)
    hit = g.paths.get(cls.winding)
    if hit is None:
        raise UnrepresentableClassError(
            f"winding {cls.winding} unreachable on the waypoint graph "
            f"within clamp +-{g.bound}")
    return hit[0]
