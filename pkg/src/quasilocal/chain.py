"""Finite spin-chain model: operators, embeddings and interactions.

Operators are dense complex matrices tagged with a sorted tuple of
integer sites.  Supports may be any finite site set; an operator is
materialized on its own sites and identity-padded into larger frames on
demand, which keeps the embedding logic uniform.

Frames are capped so that dense linear algebra stays desk-sized:
``2**MAX_DIM_EXPONENT`` Hilbert-space dimensions at most (12 sites for
qubits).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .series import DecayProfile, Explicit, FiniteRange, Tail, tail_from_json

__all__ = [
    "MAX_DIM_EXPONENT",
    "LocalOperator",
    "InteractionSpec",
    "site_cap",
    "assemble_hamiltonian",
    "reframe_operator",
    "partial_trace",
    "operator_norm",
    "sample_random_interaction",
    "ising_spec",
    "transverse_field_ising_spec",
    "single_site_field_spec",
    "classical_ising_spec",
]

# Hard dimension cap: d**n_sites <= 2**MAX_DIM_EXPONENT.
MAX_DIM_EXPONENT = 12

HERMITIAN_TOL = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def site_cap(d: int) -> int:
    """Largest frame length allowed at local dimension ``d``."""
    return max(1, int(math.floor(MAX_DIM_EXPONENT / math.log2(d))))


def _check_cap(d: int, n_sites: int):
    if d**n_sites > 2**MAX_DIM_EXPONENT:
        raise ValueError(
            f"frame of {n_sites} sites at local dimension {d} exceeds the "
            f"dense cap ({d}**{n_sites} > 2**{MAX_DIM_EXPONENT})")


@dataclass(frozen=True)
class LocalOperator:
    """Dense complex matrix supported on a finite sorted site list."""

    matrix: np.ndarray
    support: tuple[int, ...]
    d: int

    def __post_init__(self):
        sup = tuple(int(s) for s in self.support)
        if sorted(set(sup)) != list(sup):
            raise ValueError("support must be sorted and duplicate-free")
        object.__setattr__(self, "support", sup)
        mat = np.ascontiguousarray(np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, "matrix", mat)
        dim = self.d ** len(sup)
        if mat.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {mat.shape} does not match d**|support| = {dim}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.linalg.norm(self.matrix - self.matrix.conj().T, 2) <= tol
                    * max(1.0, np.linalg.norm(self.matrix, 2)))

    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.matrix.conj().T, self.support, self.d)

    def shifted(self, j: int) -> "LocalOperator":
        """Lattice translation by ``j`` sites (same matrix, moved support)."""
        return LocalOperator(self.matrix, tuple(s + j for s in self.support), self.d)


def identity_operator(support, d: int) -> LocalOperator:
    support = tuple(support)
    return LocalOperator(np.eye(d ** len(support), dtype=complex), support, d)


def _embed_matrix(mat: np.ndarray, sup: tuple[int, ...],
                  frame: tuple[int, ...], d: int) -> np.ndarray:
    """Identity-pad ``mat`` (sites ``sup``) onto the sorted site list ``frame``."""
    if sup == frame:
        return mat
    k = len(sup)
    m = len(frame)
    pos = {s: i for i, s in enumerate(frame)}
    try:
        op_positions = [pos[s] for s in sup]
    except KeyError as exc:
        raise ValueError(f"support site {exc.args[0]} escapes the frame") from exc
    rest = [i for i in range(m) if i not in set(op_positions)]
    ten = mat.reshape((d,) * (2 * k))
    eye = np.eye(d ** (m - k), dtype=complex).reshape((d,) * (2 * (m - k)))
    # full legs: (op rows, op cols, id rows, id cols) -> reorder to frame order
    full = np.tensordot(ten, eye, axes=0)
    full = np.moveaxis(full, list(range(k, 2 * k)), list(range(m, m + k)))
    # now rows = op rows + id rows, cols likewise; scatter to frame positions
    perm = [0] * m
    for leg, p in enumerate(op_positions):
        perm[p] = leg
    for leg, p in enumerate(rest):
        perm[p] = k + leg
    full = np.transpose(full, perm + [m + q for q in perm])
    return np.ascontiguousarray(full.reshape(d**m, d**m))


def reframe_operator(op: LocalOperator, target_interval, shift: int = 0) -> LocalOperator:
    """Translate by ``shift`` and identity-pad onto ``target_interval``.

    ``target_interval`` is ``(a, b)`` inclusive; the shifted support
    must be contained in it.  Norm and spectrum (up to padding
    degeneracy) are preserved.
    """
    a, b = int(target_interval[0]), int(target_interval[1])
    _check_cap(op.d, b - a + 1)
    frame = tuple(range(a, b + 1))
    sup = tuple(s + shift for s in op.support)
    if sup and (sup[0] < a or sup[-1] > b):
        raise ValueError(f"shifted support {sup} escapes frame [{a},{b}]")
    return LocalOperator(_embed_matrix(op.matrix, sup, frame, op.d), frame, op.d)


def partial_trace(op: LocalOperator, traced_sites, normalized: bool = True) -> LocalOperator:
    """Trace out ``traced_sites``; divide by their dimension if ``normalized``."""
    traced = tuple(sorted(set(int(s) for s in traced_sites)))
    if not set(traced) <= set(op.support):
        raise ValueError("traced sites must lie inside the support")
    keep = tuple(s for s in op.support if s not in traced)
    k = len(op.support)
    d = op.d
    ten = op.matrix.reshape((d,) * (2 * k))
    idx = {s: i for i, s in enumerate(op.support)}
    for s in traced:
        i = idx[s]
        ten = np.trace(ten, axis1=i, axis2=i + (ten.ndim // 2))
        # removing a row leg and a col leg shifts the indices of later sites
        for t in idx:
            if idx[t] > i:
                idx[t] -= 1
        del idx[s]
    dim = d ** len(keep)
    mat = ten.reshape(dim, dim)
    if normalized:
        mat = mat / d ** len(traced)
    return LocalOperator(mat, keep, d)


def operator_norm(op: LocalOperator | np.ndarray) -> float:
    """Spectral norm; Hermitian inputs go through the eigenvalue path."""
    mat = op.matrix if isinstance(op, LocalOperator) else np.asarray(op)
    return _matrix_norm(mat)


def _matrix_norm(mat: np.ndarray) -> float:
    n = mat.shape[0]
    herm = np.linalg.norm(mat - mat.conj().T, ord="fro") <= 1e-13 * max(
        1.0, np.linalg.norm(mat, ord="fro"))
    if n <= 512:
        if herm:
            w = np.linalg.eigvalsh(mat)
            return float(max(abs(w[0]), abs(w[-1])))
        return float(np.linalg.norm(mat, 2))
    return _power_norm(mat)


def _power_norm(mat: np.ndarray, tol: float = 1e-11, max_iter: int = 500) -> float:
    """Certified spectral norm via Lanczos on the Gram operator.

    The returned value is the upper end of the residual enclosure
    ``[rho, rho + ||Gx - rho x||]`` of the top Gram eigenvalue, so it
    never underestimates regardless of how well the iteration
    converged.  Falls back to plain power iteration when the sparse
    eigensolver declines.
    """
    n = mat.shape[1]
    fro = np.linalg.norm(mat, "fro")
    if fro == 0.0:
        return 0.0
    x = None
    try:
        from scipy.sparse.linalg import LinearOperator, eigsh
        gram = LinearOperator((n, n), dtype=complex,
                              matvec=lambda v: mat.conj().T @ (mat @ v))
        _, vecs = eigsh(gram, k=1, which="LA", tol=tol, maxiter=max_iter)
        x = vecs[:, 0].astype(complex)
    except Exception:
        rng = np.random.default_rng(7)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x /= np.linalg.norm(x)
        for _ in range(max_iter):
            y = mat.conj().T @ (mat @ x)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0
            x_new = y / ny
            step = float(np.linalg.norm(x_new - x))
            x = x_new
            if step <= tol:
                break
    y = mat.conj().T @ (mat @ x)
    rho = float(np.real(np.vdot(x, y)))
    resid = float(np.linalg.norm(y - rho * x))
    return math.sqrt(max(rho + resid, 0.0))


@dataclass
class InteractionSpec:
    """Local interaction: explicit terms plus a translation-invariant part.

    ``cells`` lists unit cells ``(offsets, matrix)`` replicated over all
    translations (restricted to ``replication_range`` when set);
    ``terms`` holds explicit one-off terms keyed by support.  Every
    matrix must be Hermitian.
    """

    d: int
    cells: list = field(default_factory=list)
    terms: dict = field(default_factory=dict)
    tail: Tail = field(default_factory=Explicit)
    replication_range: tuple[int, int] | None = None

    def __post_init__(self):
        norm_cells = []
        for offsets, matrix in self.cells:
            offsets = tuple(sorted(int(o) for o in offsets))
            base = offsets[0]
            offsets = tuple(o - base for o in offsets)
            matrix = np.asarray(matrix, dtype=complex)
            self._check_term(offsets, matrix)
            norm_cells.append((offsets, matrix))
        self.cells = norm_cells
        norm_terms = {}
        for sup, matrix in self.terms.items():
            sup = tuple(sorted(int(s) for s in sup))
            matrix = np.asarray(matrix, dtype=complex)
            self._check_term(sup, matrix)
            norm_terms[sup] = matrix
        self.terms = norm_terms

    def _check_term(self, sup, matrix):
        dim = self.d ** len(sup)
        if matrix.shape != (dim, dim):
            raise ValueError(f"term on {sup} has shape {matrix.shape}, "
                             f"expected {(dim, dim)}")
        if np.linalg.norm(matrix - matrix.conj().T, 2) > HERMITIAN_TOL * max(
                1.0, np.linalg.norm(matrix, 2)):
            raise ValueError(f"term on {sup} is not Hermitian")

    @property
    def translation_invariant(self) -> bool:
        return not self.terms

    def max_diameter(self) -> int:
        diam = 0
        for offsets, _ in self.cells:
            diam = max(diam, offsets[-1] if offsets else 0)
        for sup in self.terms:
            diam = max(diam, sup[-1] - sup[0])
        return diam

    def terms_in(self, interval):
        """Yield ``(support, matrix)`` for every term fully inside ``interval``."""
        a, b = int(interval[0]), int(interval[1])
        for offsets, matrix in self.cells:
            width = offsets[-1] if offsets else 0
            lo, hi = a, b - width
            if self.replication_range is not None:
                lo = max(lo, self.replication_range[0])
                hi = min(hi, self.replication_range[1] - width)
            for j in range(lo, hi + 1):
                yield tuple(j + o for o in offsets), matrix
        for sup, matrix in self.terms.items():
            if sup[0] >= a and sup[-1] <= b:
                yield sup, matrix

    def scaled(self, factor: float) -> "InteractionSpec":
        """Interaction with every term multiplied by ``factor``."""
        return InteractionSpec(
            d=self.d,
            cells=[(o, factor * m) for o, m in self.cells],
            terms={s: factor * m for s, m in self.terms.items()},
            tail=self.tail,
            replication_range=self.replication_range,
        )

    def to_json(self) -> dict:
        if self.terms:
            raise ValueError("only translation-invariant interactions serialize; "
                             "explicit terms are in-memory objects")
        return {
            "d": self.d,
            "tail_kind": self.tail.to_json(),
            "generator": [
                {"offsets": list(offsets), "matrix": _matrix_to_json(matrix)}
                for offsets, matrix in self.cells
            ],
            "replication_range": list(self.replication_range)
            if self.replication_range is not None else None,
        }

    @staticmethod
    def from_json(obj: dict) -> "InteractionSpec":
        cells = [(tuple(c["offsets"]), _matrix_from_json(c["matrix"]))
                 for c in obj.get("generator", [])]
        rng = obj.get("replication_range")
        return InteractionSpec(
            d=int(obj["d"]),
            cells=cells,
            tail=tail_from_json(obj["tail_kind"]),
            replication_range=tuple(rng) if rng is not None else None,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @staticmethod
    def loads(text: str) -> "InteractionSpec":
        return InteractionSpec.from_json(json.loads(text))


def _matrix_to_json(matrix: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in matrix.reshape(-1)]


def _matrix_from_json(pairs: list) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs])
    n = int(round(math.sqrt(flat.size)))
    return flat.reshape(n, n)


def assemble_hamiltonian(spec: InteractionSpec, interval) -> LocalOperator:
    """Total energy on ``interval``: sum of all terms fully contained in it."""
    a, b = int(interval[0]), int(interval[1])
    n = b - a + 1
    if n < 1:
        raise ValueError("interval must contain at least one site")
    _check_cap(spec.d, n)
    frame = tuple(range(a, b + 1))
    dim = spec.d**n
    total = np.zeros((dim, dim), dtype=complex)
    for sup, matrix in spec.terms_in((a, b)):
        total += _embed_matrix(matrix, sup, frame, spec.d)
    return LocalOperator(total, frame, spec.d)


def sample_random_interaction(seed: int, d: int, profile_target: DecayProfile,
                              max_support: int) -> InteractionSpec:
    """Reproducible translation-invariant interaction under a decay target.

    One symmetrized complex-Gaussian cell per support diameter, rescaled
    so that the measured profile never exceeds ``profile_target``
    entrywise.  The counter-based generator makes the draw bit-exact for
    a given seed regardless of evaluation order elsewhere.
    """
    if max_support < 1:
        raise ValueError("max_support must be >= 1")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    cells = []
    for width in range(1, max_support + 1):
        diam = width - 1
        budget = profile_target.entry(diam) - profile_target.entry(diam + 1)
        # width translates of this cell touch any fixed site
        target_norm = budget / width
        if target_norm <= 0:
            continue
        dim = d**width
        raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        herm = (raw + raw.conj().T) / 2
        norm = np.linalg.norm(herm, 2)
        if norm == 0:
            continue
        cells.append((tuple(range(width)), herm * (target_norm / norm)))
    return InteractionSpec(d=d, cells=cells, tail=FiniteRange(max_support - 1))


# -- Named interactions used by the command-line presets and tests -----------


def ising_spec(coupling: float = 1.0, field_x: float = 1.0,
               field_z: float = 0.0) -> InteractionSpec:
    """Nearest-neighbour ZZ coupling with on-site X and Z fields."""
    cells = []
    if coupling != 0.0:
        cells.append(((0, 1), -coupling * np.kron(PAULI_Z, PAULI_Z)))
    site = -field_x * PAULI_X - field_z * PAULI_Z
    if field_x != 0.0 or field_z != 0.0:
        cells.append(((0,), site))
    return InteractionSpec(d=2, cells=cells, tail=FiniteRange(1))


def transverse_field_ising_spec(coupling: float = 1.0,
                                field: float = 1.0) -> InteractionSpec:
    return ising_spec(coupling=coupling, field_x=field, field_z=0.0)


def classical_ising_spec(coupling: float = 1.0) -> InteractionSpec:
    """Diagonal ZZ chain (no field); thermal correlations are exactly solvable."""
    return ising_spec(coupling=coupling, field_x=0.0, field_z=0.0)


def single_site_field_spec(strength: float, d: int = 2) -> InteractionSpec:
    """Commuting on-site field ``strength * Z`` on every site."""
    if d != 2:
        raise ValueError("single-site field preset is qubit-only")
    return InteractionSpec(d=2, cells=[((0,), strength * PAULI_Z)],
                           tail=FiniteRange(0))
