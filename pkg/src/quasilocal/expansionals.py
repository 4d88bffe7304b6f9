"""Expansionals: the operators relating a Gibbs weight to a perturbed one.

``right(U; H) = exp(-(H+U)) exp(H)`` and its inverse ``left(U; H)``
conjugate ``exp(-H)`` into ``exp(-(H+U))``.  Besides the closed forms we
evaluate ``left`` through its defining linear ODE (the differential form
of the iterated-integral series), and build the windowed objects that
split a chain Gibbs weight at a cut, together with the series constants
that bound them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import (
    InteractionSpec,
    LocalOperator,
    assemble_hamiltonian,
    operator_norm,
    reframe_operator,
)
from .series import DecayProfile, build_profile, spread_coefficients

__all__ = [
    "ExpansionalPair",
    "WindowExpansionals",
    "expansional_closed",
    "expansional_ode",
    "window_expansionals",
    "expansional_limit_tail",
    "tilde_expansional",
    "two_block_bounds",
    "cross_coupling",
]


@dataclass(frozen=True)
class ExpansionalPair:
    """Right/left expansional pair on one frame; ``left @ right = 1``."""

    right: LocalOperator
    left: LocalOperator
    frame: tuple[int, int]


def _expm_hermitian(mat: np.ndarray, scale: float = 1.0) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.exp(scale * w)) @ v.conj().T


def expansional_closed(H: LocalOperator, U: LocalOperator) -> ExpansionalPair:
    """Both expansionals by Hermitian eigendecomposition of ``H`` and ``H+U``."""
    frame = (H.support[0], H.support[-1])
    if not H.is_hermitian() :
        raise ValueError("H must be Hermitian")
    if not U.is_hermitian():
        raise ValueError("U must be Hermitian")
    um = reframe_operator(U, frame).matrix
    hm = H.matrix
    exp_plus_h = _expm_hermitian(hm, 1.0)
    exp_minus_h = _expm_hermitian(hm, -1.0)
    exp_minus_hu = _expm_hermitian(hm + um, -1.0)
    exp_plus_hu = _expm_hermitian(hm + um, 1.0)
    right = LocalOperator(exp_minus_hu @ exp_plus_h, H.support, H.d)
    left = LocalOperator(exp_minus_h @ exp_plus_hu, H.support, H.d)
    return ExpansionalPair(right, left, frame)


def expansional_ode(H: LocalOperator, U: LocalOperator, step: float) -> LocalOperator:
    """``left(U; H)`` by integrating ``F' = (e^{-tH} U e^{tH}) F`` to ``t = 1``.

    Classical fourth-order steps in the eigenbasis of ``H``; the driver
    matrix is elementwise there, so each stage is a single product.
    """
    if not (0 < step <= 0.1):
        raise ValueError("step must lie in (0, 0.1]")
    frame = (H.support[0], H.support[-1])
    if not H.is_hermitian() or not U.is_hermitian():
        raise ValueError("H and U must be Hermitian")
    w, v = np.linalg.eigh(H.matrix)
    ub = v.conj().T @ reframe_operator(U, frame).matrix @ v
    dim = ub.shape[0]

    def driver(t: float) -> np.ndarray:
        phase = np.exp(-t * w)
        return ub * np.outer(phase, 1.0 / phase)

    f = np.eye(dim, dtype=complex)
    t = 0.0
    n_steps = int(math.ceil(1.0 / step))
    h = 1.0 / n_steps
    for _ in range(n_steps):
        a1 = driver(t)
        a2 = driver(t + h / 2)
        a4 = driver(t + h)
        k1 = a1 @ f
        k2 = a2 @ (f + (h / 2) * k1)
        k3 = a2 @ (f + (h / 2) * k2)
        k4 = a4 @ (f + h * k3)
        f = f + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return LocalOperator(v @ f @ v.conj().T, H.support, H.d)


def tilde_expansional(spec: InteractionSpec, n: int, a: int) -> LocalOperator:
    """``exp(-H_[1,a]/2) exp(+H_[1+n,a]/2)`` on the frame ``[1, a]``."""
    if not 1 <= n < a:
        raise ValueError("need 1 <= n < a")
    H_full = assemble_hamiltonian(spec, (1, a))
    H_right = reframe_operator(assemble_hamiltonian(spec, (1 + n, a)), (1, a))
    mat = _expm_hermitian(H_full.matrix, -0.5) @ _expm_hermitian(H_right.matrix, 0.5)
    return LocalOperator(mat, H_full.support, spec.d)


@dataclass(frozen=True)
class WindowExpansionals:
    """Split objects for the cut after site ``n`` of the frame ``[1, a]``.

    ``split`` maps the full Gibbs weight to the product over the two
    halves, ``half_split`` only strips the left block; ``two_block`` is
    the symmetric cut object at halo ``p = a - n - 1`` on its own frame.
    ``decomposition_residual`` checks the defining factorization
    identity and should vanish to rounding.
    """

    split: LocalOperator        # E_(n,a)
    half_split: LocalOperator   # tilde version
    two_block: LocalOperator
    two_block_halo: int
    beta: float
    decomposition_residual: float


def window_expansionals(spec: InteractionSpec, n: int, a: int,
                        beta: float = 1.0) -> WindowExpansionals:
    """Windowed expansionals and the symmetric two-block object.

    ``beta`` is absorbed by scaling the interaction, so one code path
    covers all temperatures.  The two-block object uses halo
    ``p = a - n - 1``; its frame ``2p + 2`` must fit the dense cap.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    scaled = spec.scaled(beta) if beta != 1.0 else spec
    H_full = assemble_hamiltonian(scaled, (1, a))
    frame = (1, a)
    H_left = reframe_operator(assemble_hamiltonian(scaled, (1, n)), frame)
    H_right = reframe_operator(assemble_hamiltonian(scaled, (1 + n, a)), frame)
    exp_minus_full = _expm_hermitian(H_full.matrix, -0.5)
    split = LocalOperator(
        exp_minus_full @ _expm_hermitian(H_left.matrix + H_right.matrix, 0.5),
        H_full.support, spec.d)
    half_split = LocalOperator(
        exp_minus_full @ _expm_hermitian(H_right.matrix, 0.5),
        H_full.support, spec.d)
    residual = operator_norm(
        exp_minus_full - half_split.matrix @ _expm_hermitian(H_right.matrix, -0.5))

    p = a - n - 1
    cut = n  # two-block object centred on the same cut, frame [n-p, n+1+p]
    lo, hi = cut - p, cut + 1 + p
    Hb = assemble_hamiltonian(scaled, (lo, hi))
    bframe = (lo, hi)
    Hb_left = reframe_operator(assemble_hamiltonian(scaled, (lo, cut)), bframe)
    Hb_right = reframe_operator(assemble_hamiltonian(scaled, (cut + 1, hi)), bframe)
    two_block = LocalOperator(
        _expm_hermitian(Hb.matrix, -1.0)
        @ _expm_hermitian(Hb_left.matrix + Hb_right.matrix, 1.0),
        Hb.support, spec.d)
    return WindowExpansionals(split, half_split, two_block, p, beta,
                              float(residual))


def two_block_bounds(profile: DecayProfile, beta: float, p: int,
                     q: int | None = None) -> tuple[float, float | None]:
    """Series bounds for the two-block expansional at halos ``p <= q``.

    Returns ``(norm_bound_p, difference_bound_pq)`` where the second is
    ``None`` when ``q`` is not given.  Requires the profile cutoff to
    reach ``q + 1`` (or ``p + 1``).
    """
    top = (q if q is not None else p) + 1
    coeffs = spread_coefficients(profile, 4 * beta, top)
    w = 4 * profile.head * beta
    terms = [math.exp(w * k) * coeffs[k] for k in range(top + 1)]
    norm_bound = math.exp(0.5 * sum(terms[1:p + 2]))
    if q is None:
        return norm_bound, None
    mid = 0.5 * sum(terms[p + 1:q + 2])
    diff_bound = mid * math.exp(0.5 * sum(terms[1:q + 2]))
    return norm_bound, diff_bound


def cross_coupling(spec: InteractionSpec, cut: int, p: int) -> LocalOperator:
    """Sum of the terms crossing the cut between ``cut`` and ``cut + 1``.

    Collects every term inside ``[cut - p, cut + 1 + p]`` that touches
    both halves, on that frame.
    """
    lo, hi = cut - p, cut + 1 + p
    frame = tuple(range(lo, hi + 1))
    dim = spec.d ** len(frame)
    total = np.zeros((dim, dim), dtype=complex)
    from .chain import _embed_matrix
    for sup, matrix in spec.terms_in((lo, hi)):
        if sup[0] <= cut and sup[-1] >= cut + 1:
            total += _embed_matrix(matrix, sup, frame, spec.d)
    return LocalOperator(total, frame, spec.d)


@dataclass(frozen=True)
class TailRecord:
    """One Cauchy increment of the windowed expansional against its envelope."""

    a: int
    a_next: int
    difference: float
    inverse_difference: float
    envelope: float


def expansional_limit_tail(spec: InteractionSpec, n: int, a_list,
                           profile: DecayProfile | None = None) -> list[TailRecord]:
    """Cauchy tails of the windowed expansionals as the frame grows.

    Successive differences (and inverse differences) between
    ``split(n, a)`` at consecutive frame lengths, identity-padded onto
    the larger frame, each paired with the analytic envelope at cut
    distance ``a - n``.
    """
    a_list = sorted(set(int(a) for a in a_list))
    if len(a_list) < 2:
        raise ValueError("need at least two frame lengths")
    if profile is None:
        profile = build_profile(spec, max(spec.max_diameter(), 1))
    from .series import expansional_constants
    constants = expansional_constants(profile, max(a_list) - n)
    records = []
    prev = None
    for a in a_list:
        we = window_expansionals(spec, n, a)
        cur = we.split
        cur_inv = np.linalg.inv(cur.matrix)
        if prev is not None:
            a_prev, op_prev, inv_prev = prev
            pad = reframe_operator(op_prev, (1, a)).matrix
            pad_inv = reframe_operator(
                LocalOperator(inv_prev, op_prev.support, spec.d), (1, a)).matrix
            diff = float(np.linalg.norm(cur.matrix - pad, 2))
            inv_diff = float(np.linalg.norm(cur_inv - pad_inv, 2))
            records.append(TailRecord(a_prev, a, diff, inv_diff,
                                      constants.tail_sum(a_prev - n)))
        prev = (a, cur, cur_inv)
    return records
