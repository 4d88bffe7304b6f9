"""Tiny-scale probe of 2D tensor-network boundary states.

Site tensors sit on the square lattice with legs ``(phys, right, up,
left, down)``.  Interior edges carry the maximally entangled pair state
``sum_j |jj> / sqrt(D)``; contracting a rectangle yields a linear map
from its boundary virtual space into the bulk physical space.  The
boundary slots are the crossing edges, ordered counterclockwise from
the lower-left corner (bottom row left to right, right side bottom to
top, top row right to left, left side top to bottom), and that cyclic
ordering is the metric used for all decay statements.

Everything here is exact dense linear algebra behind hard dimension
guardrails (``d <= 4``, ``D <= 2``, at most 9 sites, boundary spaces at
most ``2**12``); claims never extrapolate beyond the materialized
geometry, which is recorded in every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import _embed_matrix, _matrix_norm
from .series import DecayProfile, Explicit

__all__ = [
    "Rect",
    "SiteTensor",
    "RegionMap",
    "BoundaryHamiltonian",
    "TensorGrid",
    "boundary_edges",
    "contract_region",
    "boundary_state",
    "injectivity_report",
    "boundary_hamiltonian",
    "boundary_hamiltonian_from_tensors",
    "homogeneity_audit",
    "factorization_residuals",
    "parent_gap",
    "product_tensor",
    "random_injective_tensor",
]

MAX_PHYS_DIM = 4
MAX_BOND_DIM = 2
MAX_SITES = 9
MAX_BOUNDARY_DIM = 2**12
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle of lattice sites, ``w x h`` from ``(x0, y0)``."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("rectangle must contain at least one site")

    @property
    def sites(self) -> tuple:
        """Sites in raster order: bottom row first, left to right."""
        return tuple((x, y) for y in range(self.y0, self.y0 + self.h)
                     for x in range(self.x0, self.x0 + self.w))

    def __contains__(self, site) -> bool:
        x, y = site
        return self.x0 <= x < self.x0 + self.w and self.y0 <= y < self.y0 + self.h

    def union_box(self, other: "Rect") -> "Rect":
        x0 = min(self.x0, other.x0)
        y0 = min(self.y0, other.y0)
        x1 = max(self.x0 + self.w, other.x0 + other.w)
        y1 = max(self.y0 + self.h, other.y0 + other.h)
        return Rect(x0, y0, x1 - x0, y1 - y0)


# An edge is ((x, y), axis) with axis "r" (towards (x+1,y)) or "u" (towards
# (x, y+1)); this canonical id is shared by every region touching the edge.
Edge = tuple


def _site_edges(site) -> dict:
    x, y = site
    return {
        "r": ((x, y), "r"),
        "u": ((x, y), "u"),
        "l": ((x - 1, y), "r"),
        "d": ((x, y - 1), "u"),
    }


def interior_edges(rect: Rect) -> list:
    out = []
    for (x, y) in rect.sites:
        if (x + 1, y) in rect:
            out.append(((x, y), "r"))
        if (x, y + 1) in rect:
            out.append(((x, y), "u"))
    return out


def boundary_edges(rect: Rect) -> list:
    """Boundary-crossing edges in the documented counterclockwise order."""
    bottom = [((x, rect.y0 - 1), "u") for x in range(rect.x0, rect.x0 + rect.w)]
    right = [((rect.x0 + rect.w - 1, y), "r")
             for y in range(rect.y0, rect.y0 + rect.h)]
    top = [((x, rect.y0 + rect.h - 1), "u")
           for x in range(rect.x0 + rect.w - 1, rect.x0 - 1, -1)]
    left = [((rect.x0 - 1, y), "r")
            for y in range(rect.y0 + rect.h - 1, rect.y0 - 1, -1)]
    return bottom + right + top + left


@dataclass(frozen=True)
class SiteTensor:
    """One lattice tensor: array of shape ``(d, D, D, D, D)``.

    Leg order is ``(phys, right, up, left, down)``.
    """

    array: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=complex)
        if arr.ndim != 5:
            raise ValueError("site tensor needs 5 legs (phys + 4 virtual)")
        if len({arr.shape[1], arr.shape[2], arr.shape[3], arr.shape[4]}) != 1:
            raise ValueError("virtual legs must share one bond dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("site tensor entries must be finite")
        object.__setattr__(self, "array", arr)

    @property
    def d(self) -> int:
        return self.array.shape[0]

    @property
    def D(self) -> int:
        return self.array.shape[1]


class TensorGrid:
    """Assignment of site tensors to lattice points.

    Either one tensor repeated everywhere (translation invariant) or an
    explicit mapping ``{(x, y): SiteTensor}``.
    """

    def __init__(self, tensors, d: int | None = None, D: int | None = None):
        if isinstance(tensors, SiteTensor):
            self._uniform = tensors
            self._map = None
            self.d, self.D = tensors.d, tensors.D
        else:
            self._uniform = None
            self._map = {tuple(k): v for k, v in tensors.items()}
            some = next(iter(self._map.values()))
            self.d, self.D = some.d, some.D
            for t in self._map.values():
                if (t.d, t.D) != (self.d, self.D):
                    raise ValueError("all site tensors must share (d, D)")

    def at(self, site) -> SiteTensor:
        if self._uniform is not None:
            return self._uniform
        try:
            return self._map[tuple(site)]
        except KeyError:
            raise ValueError(f"no tensor assigned to site {site}") from None


@dataclass(frozen=True)
class RegionMap:
    """Dense map from boundary virtual space into bulk physical space.

    Rows run over physical configurations of the region's sites in
    raster order; columns over boundary slots in counterclockwise
    order (``slots``).
    """

    region: Rect
    matrix: np.ndarray
    d: int
    D: int
    slots: tuple

    @property
    def boundary_dim(self) -> int:
        return self.matrix.shape[1]


def _check_guardrails(grid: TensorGrid, rect: Rect, need_map: bool = False):
    if grid.d > MAX_PHYS_DIM or grid.D > MAX_BOND_DIM:
        raise ValueError(f"dimension guardrails: d <= {MAX_PHYS_DIM}, "
                         f"D <= {MAX_BOND_DIM}")
    n_sites = rect.w * rect.h
    if n_sites > MAX_SITES:
        raise ValueError(f"region guardrail: at most {MAX_SITES} sites")
    n_slots = len(boundary_edges(rect))
    if grid.D**n_slots > MAX_BOUNDARY_DIM:
        raise ValueError("boundary space exceeds the dense guardrail")
    if need_map and grid.d**n_sites * grid.D**n_slots > 2**24:
        raise ValueError("region map too large to materialize densely")


def contract_region(tensors, region: Rect) -> RegionMap:
    """Contract the tensors of ``region`` into its boundary-to-bulk map.

    Interior edges carry the normalized pair state; the 1/sqrt(D)
    weights are included.  Column (boundary) ordering follows
    :func:`boundary_edges`; row ordering is raster order of the sites.
    """
    grid = tensors if isinstance(tensors, TensorGrid) else TensorGrid(tensors)
    _check_guardrails(grid, region, need_map=True)
    d, D = grid.d, grid.D
    acc = np.ones((), dtype=complex)
    legs: list = []  # ("phys", site) or ("edge", edge_id)
    scale = 1.0 / math.sqrt(D)
    for x in range(region.x0, region.x0 + region.w):
        for y in range(region.y0, region.y0 + region.h):
            site = (x, y)
            edges = _site_edges(site)
            ten = grid.at(site).array
            joins_acc, joins_site = [], []
            for axis_name, axis_idx in (("l", 3), ("d", 4)):
                eid = edges[axis_name]
                tag = ("edge", eid)
                if tag in legs:
                    joins_acc.append(legs.index(tag))
                    joins_site.append(axis_idx)
            if joins_acc:
                acc = np.tensordot(acc, ten, axes=(joins_acc, joins_site))
                acc *= scale ** len(joins_acc)
                kept = [lg for i, lg in enumerate(legs) if i not in joins_acc]
            else:
                acc = np.tensordot(acc, ten, axes=0)
                kept = list(legs)
            new_site_axes = [("phys", site)]
            for axis_name, axis_idx in (("r", 1), ("u", 2), ("l", 3), ("d", 4)):
                if axis_idx in joins_site:
                    continue
                new_site_axes.append(("edge", edges[axis_name]))
            legs = kept + new_site_axes
    phys_order = [legs.index(("phys", s)) for s in region.sites]
    slot_list = boundary_edges(region)
    slot_order = [legs.index(("edge", e)) for e in slot_list]
    extra = [i for i in range(len(legs)) if i not in phys_order + slot_order]
    if extra:
        raise RuntimeError("internal contraction error: dangling legs")
    acc = np.transpose(acc, phys_order + slot_order)
    n_sites = region.w * region.h
    return RegionMap(region, acc.reshape(d**n_sites, D**len(slot_list)),
                     d, D, tuple(slot_list))


def boundary_state(tensors, region: Rect) -> tuple[np.ndarray, tuple]:
    """Boundary state ``rho = T^dag T`` without materializing ``T``.

    Contracts the doubled (bra x ket) network directly, so regions too
    large for an explicit region map still yield their boundary state.
    Returns ``(rho, slots)`` with rows of ``rho`` on the conjugated
    side, columns on the plain side, both in slot order.
    """
    grid = tensors if isinstance(tensors, TensorGrid) else TensorGrid(tensors)
    _check_guardrails(grid, region)
    D = grid.D
    dd = D * D
    acc = np.ones((), dtype=complex)
    legs: list = []
    for x in range(region.x0, region.x0 + region.w):
        for y in range(region.y0, region.y0 + region.h):
            site = (x, y)
            edges = _site_edges(site)
            t = grid.at(site).array
            # doubled tensor on merged (bra, ket) legs
            e8 = np.tensordot(t.conj(), t, axes=([0], [0]))
            e8 = np.transpose(e8, (0, 4, 1, 5, 2, 6, 3, 7))
            ten = e8.reshape(dd, dd, dd, dd)  # (R, U, L, Dn)
            joins_acc, joins_site = [], []
            for axis_name, axis_idx in (("l", 2), ("d", 3)):
                tag = ("edge", edges[axis_name])
                if tag in legs:
                    joins_acc.append(legs.index(tag))
                    joins_site.append(axis_idx)
            if joins_acc:
                acc = np.tensordot(acc, ten, axes=(joins_acc, joins_site))
                acc *= (1.0 / D) ** len(joins_acc)
                kept = [lg for i, lg in enumerate(legs) if i not in joins_acc]
            else:
                acc = np.tensordot(acc, ten, axes=0)
                kept = list(legs)
            new_axes = []
            for axis_name, axis_idx in (("r", 0), ("u", 1), ("l", 2), ("d", 3)):
                if axis_idx in joins_site:
                    continue
                new_axes.append(("edge", edges[axis_name]))
            legs = kept + new_axes
    slot_list = boundary_edges(region)
    order = [legs.index(("edge", e)) for e in slot_list]
    acc = np.transpose(acc, order)
    m = len(slot_list)
    acc = acc.reshape((D, D) * m)
    bra = tuple(range(0, 2 * m, 2))
    ket = tuple(range(1, 2 * m, 2))
    acc = np.transpose(acc, bra + ket)
    return acc.reshape(D**m, D**m), tuple(slot_list)


def injectivity_report(T: RegionMap) -> dict:
    """Smallest singular value and the injectivity verdict of a region map."""
    sv = np.linalg.svd(T.matrix, compute_uv=False)
    sigma_min = float(sv[-1]) if T.matrix.shape[0] >= T.matrix.shape[1] else 0.0
    return {
        "injective": bool(T.matrix.shape[0] >= T.matrix.shape[1]
                          and sigma_min > RANK_TOL),
        "sigma_min": sigma_min,
        "shape": T.matrix.shape,
    }


class BoundaryHamiltonian:
    """Half-log of a boundary state with its interval decomposition.

    ``G`` satisfies ``rho = exp(2 G)``.  Decomposition terms are keyed
    by position intervals ``(i, j)`` of the linearized slot circle and
    obtained by the mixed difference of conditional expectations
    (normalized partial traces); single-slot terms absorb the scalar
    mean, so the terms sum back to ``G`` exactly.  The linearization
    starts at ``slots[0]``; the decay profile is measured in the cyclic
    metric of the slot circle.

    ``max_term_len`` caps the materialized interval length (the cap is
    only used internally when a caller needs nothing longer); the
    profile requires the full set and is ``None`` when skipped.
    """

    def __init__(self, G, slots, D, rho_eigs, rho_vectors, mean, table,
                 max_term_len, profile):
        self.G = G
        self.slots = tuple(slots)
        self.D = D
        self.rho_eigs = rho_eigs
        self.rho_vectors = rho_vectors
        self.mean = mean
        self._table = table
        self.max_term_len = max_term_len
        self.profile = profile
        self._terms: dict = {}

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def term(self, i: int, j: int) -> np.ndarray:
        """Decomposition term on positions ``i..j`` (computed on demand)."""
        key = (i, j)
        if key in self._terms:
            return self._terms[key]
        if j - i + 1 > self.max_term_len:
            raise ValueError(f"interval {key} exceeds the materialized "
                             f"length cap {self.max_term_len}")
        D = self.D
        dim = D ** (j - i + 1)
        eye = np.eye(dim, dtype=complex)
        out = np.array(self._table[(i, j)], dtype=complex)
        for (a, b, sign) in ((i + 1, j, -1.0), (i, j - 1, -1.0),
                             (i + 1, j - 1, 1.0)):
            if a > b:
                out += sign * self.mean * eye
            else:
                sub = tuple(range(a, b + 1))
                out += sign * _embed_matrix(self._table[(a, b)], sub,
                                            tuple(range(i, j + 1)), D)
        if i == j:
            out += (self.mean / self.n_slots) * np.eye(D, dtype=complex)
        self._terms[key] = out
        return out

    @property
    def terms(self) -> dict:
        """All materialized terms up to the length cap."""
        for i in range(self.n_slots):
            for j in range(i, min(self.n_slots, i + self.max_term_len)):
                self.term(i, j)
        return dict(self._terms)

    def term_for_edges(self, edge_subset) -> np.ndarray | None:
        """Decomposition term whose interval covers exactly these edges.

        Returns ``None`` when the edge set is not a linearization
        interval of this boundary.  The matrix legs are ordered by the
        boundary's own slot order restricted to the interval.
        """
        if not all(e in self.slots for e in edge_subset):
            return None
        positions = sorted(self.slots.index(e) for e in edge_subset)
        if positions != list(range(positions[0], positions[-1] + 1)):
            return None
        return self.term(positions[0], positions[-1])

    def segment_sum(self, edge_subset) -> tuple[np.ndarray, list]:
        """Sum of all terms supported inside ``edge_subset``.

        Returns ``(matrix, positions)`` where ``positions`` lists the
        slot indices (ascending) carrying the matrix.
        """
        pos = sorted(self.slots.index(e) for e in edge_subset)
        pos_set = set(pos)
        dim = self.D ** len(pos)
        total = np.zeros((dim, dim), dtype=complex)
        frame = tuple(pos)
        for i in pos:
            j = i
            while j in pos_set:
                total += _embed_matrix(self.term(i, j),
                                       tuple(range(i, j + 1)), frame, self.D)
                j += 1
        return total, pos


def _trace_first(mat: np.ndarray, D: int) -> np.ndarray:
    """Normalized trace over the leading slot of a (rows, cols) operator."""
    r = mat.shape[0] // D
    view = mat.reshape(D, r, D, r)
    return np.einsum("jrjs->rs", view) / D


def _trace_last(mat: np.ndarray, D: int) -> np.ndarray:
    """Normalized trace over the trailing slot of a (rows, cols) operator."""
    r = mat.shape[0] // D
    view = mat.reshape(r, D, r, D)
    return np.einsum("rjsj->rs", view) / D


def _expectation_table(G: np.ndarray, m: int, D: int, max_len: int) -> dict:
    """Normalized partial traces of ``G`` onto every interval up to a length.

    Walks a left-trace chain and, for each start, shrinks the right end
    one slot at a time, so the whole table costs a constant number of
    passes over the input.
    """
    table: dict = {}
    left = G
    for a in range(m):
        right = left
        for b in range(m - 1, a - 1, -1):
            kk = b - a + 1
            if kk <= max_len:
                table[(a, b)] = np.array(right)
            if b > a:
                right = _trace_last(right, D)
        if a < m - 1:
            left = _trace_first(left, D)
    return table


def _boundary_from_rho(rho: np.ndarray, slots: tuple, D: int, cut_edge=None,
                       max_term_len: int | None = None,
                       measure_profile: bool = True) -> BoundaryHamiltonian:
    m = len(slots)
    slots = tuple(slots)
    if cut_edge is not None:
        k = slots.index(cut_edge)
        slots = slots[k:] + slots[:k]
        perm = list(range(k, m)) + list(range(0, k))
        ten = rho.reshape((D,) * (2 * m))
        ten = np.transpose(ten, perm + [m + p for p in perm])
        rho = np.ascontiguousarray(ten.reshape(D**m, D**m))
    w, v = np.linalg.eigh(rho)
    if w[0] <= RANK_TOL**2 * max(w[-1], 1.0) or w[0] <= 0:
        raise ValueError("boundary state is rank deficient; "
                         "the half-log Hamiltonian is undefined")
    G = (v * (0.5 * np.log(w))) @ v.conj().T
    G = (G + G.conj().T) / 2
    mean = float(np.real(np.trace(G))) / D**m
    if measure_profile or max_term_len is None:
        max_term_len = m
    table = _expectation_table(G, m, D, max_term_len) if max_term_len else {}
    bh = BoundaryHamiltonian(G, slots, D, w, v, mean, table, max_term_len,
                             None)
    if measure_profile:
        bh.profile = _measure_boundary_profile(bh)
    return bh


def _measure_boundary_profile(bh: BoundaryHamiltonian) -> DecayProfile:
    m = bh.n_slots
    norms = {k: _matrix_norm(mat) for k, mat in bh.terms.items()}
    entries = []
    for k in range(m // 2 + 1):
        best = 0.0
        for p in range(m):
            s = sum(n for (i, j), n in norms.items()
                    if i <= p <= j and min(j - i, m - (j - i)) >= k)
            best = max(best, s)
        entries.append(best)
    for k in range(1, len(entries)):
        entries[k] = min(entries[k], entries[k - 1])
    return DecayProfile(tuple(entries), Explicit())


def boundary_hamiltonian(T: RegionMap, cut_edge=None,
                         measure_profile: bool = True) -> BoundaryHamiltonian:
    """Boundary Hamiltonian of an explicit region map (``rho = T^dag T``)."""
    rho = T.matrix.conj().T @ T.matrix
    return _boundary_from_rho(rho, T.slots, T.D, cut_edge,
                              measure_profile=measure_profile)


def boundary_hamiltonian_from_tensors(tensors, region: Rect, cut_edge=None,
                                      max_term_len: int | None = None,
                                      measure_profile: bool = True,
                                      ) -> BoundaryHamiltonian:
    """Boundary Hamiltonian via the doubled-layer contraction."""
    rho, slots = boundary_state(tensors, region)
    return _boundary_from_rho(rho, slots, tensors.D if isinstance(
        tensors, TensorGrid) else TensorGrid(tensors).D, cut_edge,
        max_term_len=max_term_len, measure_profile=measure_profile)


def _permute_to_sorted(mat: np.ndarray, positions: list, D: int):
    """Reorder tensor legs so the carried positions ascend."""
    order = np.argsort(positions)
    if list(order) == list(range(len(positions))):
        return mat, list(positions)
    k = len(positions)
    ten = mat.reshape((D,) * (2 * k))
    perm = list(order) + [k + o for o in order]
    ten = np.transpose(ten, perm)
    return ten.reshape(mat.shape), sorted(positions)


def _embed_by_edges(mat: np.ndarray, edges: list, target_slots: tuple,
                    D: int) -> np.ndarray:
    """Identity-pad an operator carried on ``edges`` onto ``target_slots``."""
    positions = [target_slots.index(e) for e in edges]
    mat, positions = _permute_to_sorted(mat, positions, D)
    frame = tuple(range(len(target_slots)))
    return _embed_matrix(mat, tuple(positions), frame, D)


def _expm_h(mat: np.ndarray, sign: float) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return (v * np.exp(sign * w)) @ v.conj().T


# --------------------------------------------------------------------------
# Homogeneity of the interval decomposition across adjacent rectangles


def homogeneity_audit(tensors, pairs, max_interval: int = 4) -> dict:
    """Empirical homogeneity ratios of decomposition terms across regions.

    For each adjacent pair ``(A, B)`` the interval decompositions on
    the joined boundary and on A's own boundary are compared term by
    term over the shared arc (A's outer boundary), bucketed by the
    cyclic distance, within the joined boundary, from the term's
    support to B's part of it.  The bucket maxima are the empirical
    homogeneity sequence; buckets where both terms vanish are reported
    as degenerate zeros.
    """
    grid = tensors if isinstance(tensors, TensorGrid) else TensorGrid(tensors)
    buckets: dict = {}
    for rect_a, rect_b in pairs:
        ab = rect_a.union_box(rect_b)
        edges_a = set(boundary_edges(rect_a))
        edges_b = set(boundary_edges(rect_b))
        edges_ab = boundary_edges(ab)
        shared_arc = [e for e in edges_ab if e in edges_a and e not in edges_b]
        b_part = [e for e in edges_ab if e not in edges_a]
        if not shared_arc or not b_part:
            raise ValueError("rectangles do not form an adjacent pair")
        cut_ab = b_part[0]
        interface = [e for e in boundary_edges(rect_a) if e in edges_b]
        cut_a = interface[0]
        bh_ab = boundary_hamiltonian_from_tensors(grid, ab, cut_edge=cut_ab)
        bh_a = boundary_hamiltonian_from_tensors(grid, rect_a, cut_edge=cut_a)
        m_ab = bh_ab.n_slots
        pos_b = [bh_ab.slots.index(e) for e in b_part]
        arc_positions = sorted(bh_ab.slots.index(e) for e in shared_arc)
        for left in range(len(arc_positions)):
            for right in range(left, min(left + max_interval,
                                         len(arc_positions))):
                span = arc_positions[left:right + 1]
                if span != list(range(span[0], span[-1] + 1)):
                    continue
                edges = [bh_ab.slots[p] for p in span]
                g_ab = bh_ab.term_for_edges(edges)
                g_a = bh_a.term_for_edges(edges)
                if g_ab is None or g_a is None:
                    continue
                g_ab = _canonical_legs(g_ab, edges, bh_ab, grid.D)
                g_a = _canonical_legs(g_a, edges, bh_a, grid.D)
                num = _matrix_norm(g_ab - g_a)
                den = _matrix_norm(g_ab) + _matrix_norm(g_a)
                dist = min(min(abs(p - q), m_ab - abs(p - q))
                           for p in span for q in pos_b)
                entry = buckets.setdefault(dist, {"eta": 0.0, "count": 0,
                                                  "degenerate": True})
                entry["count"] += 1
                if den > 1e-14:
                    entry["degenerate"] = False
                    entry["eta"] = max(entry["eta"], num / den)
    return dict(sorted(buckets.items()))


def _canonical_legs(mat: np.ndarray, edges: list, bh: BoundaryHamiltonian,
                    D: int) -> np.ndarray:
    """Permute term legs into sorted-edge-id order for comparisons."""
    own = sorted(range(len(edges)), key=lambda i: bh.slots.index(edges[i]))
    ranks = [sorted(edges).index(edges[i]) for i in own]
    out, _ = _permute_to_sorted(mat, ranks, D)
    return out


# --------------------------------------------------------------------------
# Approximate factorization at an admissible triple


def _edge_coord(edge: Edge) -> float:
    (x, _y), axis = edge
    return x + 0.5 if axis == "r" else float(x)


def admissible_segments(A: Rect, B: Rect, C: Rect, ell: int) -> dict:
    """Boundary segment table for a shielding triple, keyed by name.

    ``B`` must shield ``A`` from ``C`` along the x axis with width at
    least ``2 * ell`` (``4 * ell`` for the proper admissibility; the
    relaxed minimum scale is flagged in the result).  Segments ``x`` and
    ``y`` are the central column pairs of B's horizontal sides; ``a``
    and ``c`` the remaining arcs of the triple's boundary; ``alpha`` and
    ``gamma`` the corresponding arcs of B's own boundary, overlapping
    ``a``/``c`` when B is wide enough.
    """
    if not (A.y0 == B.y0 == C.y0 and A.h == B.h == C.h):
        raise ValueError("rectangles must share rows")
    if A.x0 + A.w != B.x0 or B.x0 + B.w != C.x0:
        raise ValueError("rectangles must be adjacent left to right")
    if B.w < 2 * ell:
        raise ValueError(f"shield width {B.w} is below the minimum 2*ell")
    pad = (B.w - 2 * ell) // 2
    x_cols = list(range(B.x0 + pad, B.x0 + pad + ell))
    y_cols = list(range(B.x0 + pad + ell, B.x0 + pad + 2 * ell))
    abc = Rect(A.x0, A.y0, A.w + B.w + C.w, A.h)
    lo, hi = float(x_cols[0]), float(y_cols[-1])

    def horiz(cols):
        out = []
        for cc in cols:
            out.append(((cc, A.y0 - 1), "u"))
            out.append(((cc, A.y0 + A.h - 1), "u"))
        return out

    segments = {
        "x": horiz(x_cols),
        "y": horiz(y_cols),
        "a": [e for e in boundary_edges(abc) if _edge_coord(e) < lo],
        "c": [e for e in boundary_edges(abc) if _edge_coord(e) > hi],
        "alpha": [e for e in boundary_edges(B) if _edge_coord(e) < lo],
        "gamma": [e for e in boundary_edges(B) if _edge_coord(e) > hi],
    }
    segments["z"] = segments["x"] + segments["y"]
    segments["cut"] = ((x_cols[0], A.y0 - 1), "u")
    segments["relaxed"] = B.w < 4 * ell
    return segments


def _factor(bh: BoundaryHamiltonian, parts) -> tuple:
    """Ordered product of segment exponentials and its exact inverse.

    ``parts`` lists ``(edge_set, sign)`` left to right.  Returns
    ``(matrix, inverse, edges)`` on the union of the segments.
    """
    union_pos: list = []
    for edges, _sign in parts:
        for e in edges:
            p = bh.slots.index(e)
            if p not in union_pos:
                union_pos.append(p)
    union_pos = sorted(union_pos)
    union_edges = [bh.slots[p] for p in union_pos]
    dim = bh.D ** len(union_pos)
    mat = np.eye(dim, dtype=complex)
    inv = np.eye(dim, dtype=complex)
    frame = tuple(range(len(union_pos)))
    for edges, sign in parts:
        seg, pos = bh.segment_sum(edges)
        local = [union_pos.index(p) for p in pos]
        plus = _embed_matrix(_expm_h(seg, sign), tuple(local), frame, bh.D)
        minus = _embed_matrix(_expm_h(seg, -sign), tuple(local), frame, bh.D)
        mat = mat @ plus
        inv = minus @ inv
    return mat, inv, union_edges


def factorization_residuals(tensors, A: Rect, B: Rect, C: Rect,
                            ell: int = 1) -> dict:
    """Residuals of the segment-exponential factorization of boundary states.

    Builds the boundary Hamiltonians of the four regions (triple,
    left pair, right pair, shield), restricts them to the documented
    segment table, forms the bridge/clamp factor products and, for each
    region, measures how far ``rho^{1/2} sigma^{-1} rho^{1/2}`` is from
    the identity.  Condition numbers of the factorized approximants are
    certified below ``1e12`` (an error otherwise).
    """
    grid = tensors if isinstance(tensors, TensorGrid) else TensorGrid(tensors)
    seg = admissible_segments(A, B, C, ell)
    cut = seg["cut"]
    abc = Rect(A.x0, A.y0, A.w + B.w + C.w, A.h)
    ab = A.union_box(B)
    bc = B.union_box(C)

    need_q = len(seg["a"]) + len(seg["x"]) + len(seg["y"])
    need_t = len(seg["alpha"]) + len(seg["x"]) + len(seg["y"])
    bh_q = boundary_hamiltonian_from_tensors(grid, abc, cut_edge=cut,
                                             max_term_len=max(need_q, len(seg["x"]) + len(seg["y"]) + len(seg["c"])),
                                             measure_profile=False)
    bh_r = boundary_hamiltonian_from_tensors(grid, ab, cut_edge=cut,
                                             max_term_len=0,
                                             measure_profile=False)
    bh_s = boundary_hamiltonian_from_tensors(grid, bc, cut_edge=cut,
                                             max_term_len=0,
                                             measure_profile=False)
    bh_t = boundary_hamiltonian_from_tensors(grid, B, cut_edge=cut,
                                             max_term_len=max(need_t, len(seg["x"]) + len(seg["y"]) + len(seg["gamma"])),
                                             measure_profile=False)

    sanity = set(seg["a"]) | set(seg["z"]) | set(seg["gamma"])
    if sanity != set(bh_r.slots):
        raise RuntimeError("segment table does not tile the pair boundary")

    ax = seg["a"] + seg["x"]
    axy = ax + seg["y"]
    xyc = seg["x"] + seg["y"] + seg["c"]
    yc = seg["y"] + seg["c"]
    alx = seg["alpha"] + seg["x"]
    alxy = alx + seg["y"]
    xyg = seg["x"] + seg["y"] + seg["gamma"]
    yg = seg["y"] + seg["gamma"]

    bridge_left = _factor(bh_q, [(ax, 1.0), (seg["y"], -1.0), (axy, 1.0)])
    bridge_right = _factor(bh_q, [(xyc, 1.0), (seg["x"], -1.0), (yc, 1.0)])
    clamp_left = _factor(bh_t, [(alx, 1.0), (seg["y"], -1.0), (alxy, 1.0)])
    clamp_right = _factor(bh_t, [(xyg, 1.0), (seg["x"], -1.0), (yg, 1.0)])

    combos = {
        "ABC": (bh_q, bridge_right, bridge_left),
        "AB": (bh_r, clamp_right, bridge_left),
        "BC": (bh_s, bridge_right, clamp_left),
        "B": (bh_t, clamp_right, clamp_left),
    }
    report: dict = {"ell": ell, "relaxed_scale": seg["relaxed"],
                    "regions": {}}
    for name, (bh, second, first) in combos.items():
        slots = bh.slots
        s_mat = (_embed_by_edges(second[0], second[2], slots, bh.D)
                 @ _embed_by_edges(first[0], first[2], slots, bh.D))
        s_inv = (_embed_by_edges(first[1], first[2], slots, bh.D)
                 @ _embed_by_edges(second[1], second[2], slots, bh.D))
        cond = _matrix_norm(s_mat) * _matrix_norm(s_inv)
        if cond > 1e12:
            raise ValueError(f"factorized approximant on {name} is numerically "
                             f"singular (condition number {cond:.3g})")
        root = (bh.rho_vectors * np.sqrt(bh.rho_eigs)) @ bh.rho_vectors.conj().T
        mid = root @ s_inv @ root
        residual = _matrix_norm(mid - np.eye(mid.shape[0]))
        report["regions"][name] = {
            "residual": float(residual),
            "condition": float(cond),
            "boundary_slots": len(slots),
        }
    return report


# --------------------------------------------------------------------------
# Parent Hamiltonian gap


def parent_gap(tensors, region: Rect, degeneracy_tol: float = 1e-10) -> dict:
    """Exact spectrum summary of the edge-projector parent Hamiltonian.

    Each interior edge contributes the projector onto the orthogonal
    complement of the two-site map's image; the report carries the
    ground energy, the dimension of the (numerically) degenerate ground
    band, the gap to the next distinct level, and the edges whose
    two-site maps fail injectivity (flagged, not fatal).
    """
    grid = tensors if isinstance(tensors, TensorGrid) else TensorGrid(tensors)
    _check_guardrails(grid, region)
    d = grid.d
    sites = region.sites
    n = len(sites)
    dim = d**n
    ham = np.zeros((dim, dim), dtype=complex)
    non_injective = []
    edges = interior_edges(region)
    if not edges:
        raise ValueError("region has no interior edges")
    for edge in edges:
        (x, y), axis = edge
        pair = Rect(x, y, 2, 1) if axis == "r" else Rect(x, y, 1, 2)
        tmap = contract_region(grid, pair)
        u, sv, _ = np.linalg.svd(tmap.matrix, full_matrices=False)
        rank = int(np.sum(sv > RANK_TOL * max(sv[0], 1e-300)))
        if rank < tmap.matrix.shape[1]:
            non_injective.append(edge)
        basis = u[:, :rank]
        h_edge = np.eye(d * d, dtype=complex) - basis @ basis.conj().T
        positions = tuple(sorted(sites.index(s) for s in pair.sites))
        ham += _embed_matrix(h_edge, positions, tuple(range(n)), d)
    w = np.linalg.eigvalsh(ham)
    ground = float(w[0])
    band = w[w <= ground + degeneracy_tol]
    above = w[w > ground + degeneracy_tol]
    gap = float(above[0] - ground) if above.size else 0.0
    return {
        "ground_energy": ground,
        "ground_dim": int(band.size),
        "gap": gap,
        "non_injective_edges": non_injective,
        "dimension": dim,
        "n_edges": len(edges),
    }


# --------------------------------------------------------------------------
# Tensor factories used by presets and tests


def product_tensor(state, bond_states=None) -> SiteTensor:
    """Rank-one site tensor ``|state> <b_r b_u b_l b_d|``.

    With ``bond_states=None`` the bond dimension is one (every region
    map is then a product of per-site vectors and all boundary objects
    are scalars).
    """
    state = np.asarray(state, dtype=complex)
    if bond_states is None:
        bond_states = [np.ones(1)] * 4
    arr = state.reshape(-1, 1, 1, 1, 1)
    for axis, b in enumerate(bond_states, start=1):
        b = np.asarray(b, dtype=complex).conj()
        shape = [1] * 5
        shape[axis] = b.size
        arr = arr * b.reshape(shape)
    return SiteTensor(arr)


def ghz_tensor(d: int = 2) -> SiteTensor:
    """Copy tensor: physical and all virtual indices forced equal."""
    arr = np.zeros((d,) * 5, dtype=complex)
    for k in range(d):
        arr[k, k, k, k, k] = 1.0
    return SiteTensor(arr)


def random_injective_tensor(seed: int, d: int = 4, D: int = 2) -> SiteTensor:
    """Gaussian site tensor; injectivity is generic and must be checked."""
    rng = np.random.default_rng(np.random.Philox(key=seed))
    arr = rng.standard_normal((d, D, D, D, D)) \
        + 1j * rng.standard_normal((d, D, D, D, D))
    return SiteTensor(arr / np.linalg.norm(arr))
