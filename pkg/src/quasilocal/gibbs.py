"""Finite-volume thermal states and their correlation decay.

Densities are built by Hermitian eigendecomposition with fast paths for
diagonal and real-symmetric Hamiltonians (the classical chain never
needs a full solver).  Correlation profiles, exponential fits, and the
three convergence audits tying growing-volume expectations to the
transfer-operator functional live here.
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
from .transfer import build_window, fixed_point_solve

__all__ = [
    "GibbsState",
    "DecayFit",
    "ConvergenceAudit",
    "gibbs_density",
    "correlation_profile",
    "decay_fit",
    "convergence_audit",
]

NOISE_FLOOR = 1e-13
DEGENERATE_FLOOR = 1e-14


@dataclass(frozen=True)
class GibbsState:
    """Normalized thermal density on an interval."""

    interval: tuple[int, int]
    beta: float
    density: LocalOperator

    def expect(self, Q: LocalOperator) -> complex:
        """Expectation value of an observable supported inside the interval."""
        qm = reframe_operator(Q, self.interval).matrix
        return complex(np.trace(self.density.matrix @ qm))


def gibbs_density(spec: InteractionSpec, interval, beta: float) -> GibbsState:
    """``exp(-beta H) / trace`` on ``interval``.

    Diagonal Hamiltonians (classical interactions) avoid the
    eigensolver entirely; real-symmetric ones use the real solver.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    a, b = int(interval[0]), int(interval[1])
    H = assemble_hamiltonian(spec, (a, b))
    hm = H.matrix
    diag = np.diag(np.diag(hm))
    if np.linalg.norm(hm - diag, "fro") <= 1e-14 * max(1.0, np.linalg.norm(hm, "fro")):
        e = np.real(np.diag(hm))
        weights = np.exp(-beta * (e - e.min()))
        rho = np.diag(weights / weights.sum()).astype(complex)
    else:
        if np.linalg.norm(hm.imag, "fro") <= 1e-14 * np.linalg.norm(hm, "fro"):
            w, v = np.linalg.eigh(hm.real)
            v = v.astype(complex)
        else:
            w, v = np.linalg.eigh(hm)
        weights = np.exp(-beta * (w - w.min()))
        rho = (v * (weights / weights.sum())) @ v.conj().T
    return GibbsState((a, b), beta, LocalOperator(rho, H.support, spec.d))


def correlation_profile(spec: InteractionSpec, interval, beta: float,
                        Q1: LocalOperator, Q2: LocalOperator,
                        separations) -> dict:
    """Truncated correlations of two observables at growing separation.

    ``Q2`` is translated so that its support starts ``k`` sites to the
    right of the last site of ``Q1`` for each ``k`` in ``separations``;
    separations whose translate escapes the interval are skipped and
    reported.  Returns ``{"separations", "values", "skipped"}``.
    """
    state = gibbs_density(spec, interval, beta)
    a, b = state.interval
    q1_hi = Q1.support[-1]
    if Q1.support[0] < a or q1_hi > b:
        raise ValueError("Q1 support escapes the interval")
    e1 = state.expect(Q1)
    values, used, skipped = [], [], []
    for k in separations:
        shift = q1_hi + int(k) - Q2.support[0]
        q2 = Q2.shifted(shift)
        if q2.support[0] < a or q2.support[-1] > b:
            skipped.append(int(k))
            continue
        joint = LocalOperator(
            reframe_operator(Q1, (a, b)).matrix @ reframe_operator(q2, (a, b)).matrix,
            state.density.support, spec.d)
        val = state.expect(joint) - e1 * state.expect(q2)
        values.append(complex(val))
        used.append(int(k))
    return {"separations": used, "values": values, "skipped": skipped}


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit ``values ~ C * exp(-delta * k)``."""

    C: float
    delta: float
    r2: float
    points_used: int
    excluded: int


def decay_fit(separations, values, min_points: int = 3) -> DecayFit | None:
    """Fit ``log(values)`` against separation, excluding the noise floor.

    Entries at or below ``1e-13`` (and non-positive ones) are excluded
    with their count reported.  Returns ``None`` when everything sits
    below ``1e-14`` or fewer than ``min_points`` points survive: a
    degenerate profile, flagged rather than fitted.
    """
    seps = [float(s) for s in separations]
    vals = [float(v) for v in values]
    if len(seps) != len(vals):
        raise ValueError("separations and values must align")
    if all(v <= DEGENERATE_FLOOR for v in vals):
        return None
    pairs = [(s, v) for s, v in zip(seps, vals) if v > NOISE_FLOOR]
    excluded = len(vals) - len(pairs)
    if len(pairs) < min_points:
        return None
    xs = np.array([p[0] for p in pairs])
    ys = np.log(np.array([p[1] for p in pairs]))
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(float(math.exp(intercept)), float(-slope), r2,
                    len(pairs), excluded)


@dataclass
class ConvergenceAudit:
    """Three convergence sequences with their exponential fits.

    ``volume``: expectation drift as a two-sided frame grows, against
    the largest computed frame (its size is recorded, no extrapolation).
    ``functional``: one-sided frame expectations against the window
    transfer functional.  ``shift_cauchy``: increments of the functional
    under translation of the observable.
    """

    volume: dict
    functional: dict
    shift_cauchy: dict
    window_size: int
    reference_frame: tuple[int, int]


def convergence_audit(spec: InteractionSpec, Q: LocalOperator, beta: float,
                      k_grid, window_m: int = 3,
                      window_gap: int = 3) -> ConvergenceAudit:
    """Volume, functional and translation convergence of thermal expectations.

    All three sequences vanish identically for product states and decay
    exponentially for short-range interactions inside the admissible
    temperature window; each is passed through :func:`decay_fit`.
    """
    ks = sorted(set(int(k) for k in k_grid))
    if not ks or ks[0] < 0:
        raise ValueError("k_grid must be non-negative")
    a0, b0 = Q.support[0], Q.support[-1]
    kmax = ks[-1]

    # (a) two-sided volume convergence, re-indexed to start at 1
    ref_iv = (a0 - kmax, b0 + kmax)
    ref = gibbs_density(spec, ref_iv, beta).expect(Q)
    vol_vals = []
    for k in ks:
        val = gibbs_density(spec, (a0 - k, b0 + k), beta).expect(Q)
        vol_vals.append(abs(val - ref))
    volume = {"k": ks, "values": vol_vals,
              "fit": decay_fit(ks, vol_vals)}

    # (b) one-sided frames against the window functional
    scaled = spec.scaled(beta) if beta != 1.0 else spec
    q1 = Q.shifted(1 - a0)
    width = q1.support[-1]
    m = max(window_m, width + 3)
    n_step = 1
    a_win = m + n_step + window_gap
    window = build_window(scaled, n_step, a_win, m)
    report = fixed_point_solve(window, tol=1e-10, max_iter=800)
    nu_mat = report.functional
    q_win = reframe_operator(q1, (1, m)).matrix
    nu_q = float(np.real(np.trace(nu_mat @ q_win) / window.window_dim))
    func_frames, func_vals = [], []
    for k in ks:
        frame = (1, width + k)
        val = gibbs_density(scaled, frame, 1.0).expect(q1)
        func_frames.append(frame[1])
        func_vals.append(abs(val - nu_q))
    functional = {"k": ks, "frame_end": func_frames, "values": func_vals,
                  "reference": nu_q, "fit": decay_fit(ks, func_vals)}

    # (c) Cauchy increments of the functional under translation
    shift_vals, shift_ks = [], []
    prev = nu_q
    for k in range(1, m - width + 1):
        qk = reframe_operator(q1.shifted(k), (1, m)).matrix
        cur = float(np.real(np.trace(nu_mat @ qk) / window.window_dim))
        shift_ks.append(k)
        shift_vals.append(abs(cur - prev))
        prev = cur
    shift = {"k": shift_ks, "values": shift_vals,
             "fit": decay_fit(shift_ks, shift_vals)}

    return ConvergenceAudit(volume, functional, shift, m, ref_iv)
