"""Decay profiles and closed-form locality bounds.

Everything in this module is scalar combinatorics: no operators, no
Hilbert spaces.  A :class:`DecayProfile` stores the non-increasing
sequence that measures how much interaction strength a single site sees
from terms of a given diameter, together with a declared tail.  From it
we evaluate the coefficient sequences and the right-hand sides of the
locality inequalities that the rest of the package certifies
empirically.

All infinite sums are truncated at the profile cutoff and completed by
an analytic remainder computed from the declared tail, so every value
returned here remains a valid upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PASS_SLACK",
    "FiniteRange",
    "ExponentialTail",
    "Explicit",
    "DecayProfile",
    "BoundParams",
    "BoundCertificate",
    "ExpansionalConstants",
    "build_profile",
    "spread_coefficients",
    "exp_weighted_sum",
    "weighted_tail_bound",
    "expansional_constants",
    "evaluate_bound",
    "surface_bound",
    "BOUND_FAMILIES",
]

# Fixed slack for empirical-vs-theoretical comparisons (absolute).
PASS_SLACK = 1e-9

_MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class FiniteRange:
    """Entries vanish identically for diameters beyond ``r``."""

    r: int

    def label(self) -> str:
        return f"finite_range({self.r})"

    def to_json(self) -> dict:
        return {"kind": "finite_range", "r": self.r}


@dataclass(frozen=True)
class ExponentialTail:
    """Entries beyond the cutoff obey ``prefactor * exp(-rate * n)``."""

    rate: float
    prefactor: float = 1.0

    def label(self) -> str:
        return f"exponential(rate={self.rate}, prefactor={self.prefactor})"

    def to_json(self) -> dict:
        return {"kind": "exponential", "rate": self.rate, "prefactor": self.prefactor}


@dataclass(frozen=True)
class Explicit:
    """No analytic tail: the stored entries are the whole profile."""

    def label(self) -> str:
        return "explicit"

    def to_json(self) -> dict:
        return {"kind": "explicit"}


Tail = FiniteRange | ExponentialTail | Explicit


def tail_from_json(obj: dict) -> Tail:
    kind = obj.get("kind")
    if kind == "finite_range":
        return FiniteRange(int(obj["r"]))
    if kind == "exponential":
        return ExponentialTail(float(obj["rate"]), float(obj.get("prefactor", 1.0)))
    if kind == "explicit":
        return Explicit()
    raise ValueError(f"unknown tail kind {kind!r}")


@dataclass(frozen=True)
class DecayProfile:
    """Non-increasing interaction-decay sequence with a declared tail.

    ``entries[n]`` is the total norm a single site sees from terms of
    diameter at least ``n``.  ``entries[0]`` must be finite; the
    sequence must be non-negative and non-increasing.
    """

    entries: tuple[float, ...]
    tail: Tail = field(default_factory=Explicit)

    def __post_init__(self):
        ent = tuple(float(x) for x in self.entries)
        object.__setattr__(self, "entries", ent)
        if not ent:
            raise ValueError("profile needs at least one entry")
        if not math.isfinite(ent[0]):
            raise ValueError("leading profile entry must be finite")
        if any(x < -_MONOTONE_TOL for x in ent):
            raise ValueError("profile entries must be non-negative")
        for a, b in zip(ent, ent[1:]):
            if b > a + _MONOTONE_TOL:
                raise ValueError("profile entries must be non-increasing")
        if isinstance(self.tail, FiniteRange):
            if self.tail.r < 0:
                raise ValueError("finite range must be non-negative")
            if self.tail.r > self.cutoff:
                raise ValueError(
                    f"finite_range({self.tail.r}) needs entries up to that "
                    f"diameter (cutoff is {self.cutoff})"
                )
            for n in range(self.tail.r + 1, self.cutoff + 1):
                if ent[n] > _MONOTONE_TOL:
                    raise ValueError(
                        f"entry {n} is nonzero but the declared range is {self.tail.r}"
                    )
        if isinstance(self.tail, ExponentialTail) and self.tail.rate <= 0:
            raise ValueError("exponential tail needs a positive rate")

    @property
    def cutoff(self) -> int:
        return len(self.entries) - 1

    @property
    def head(self) -> float:
        """The ``n = 0`` entry (total per-site interaction norm)."""
        return self.entries[0]

    def entry(self, n: int) -> float:
        """Entry at diameter ``n``, using the tail envelope beyond the cutoff."""
        if n <= self.cutoff:
            return self.entries[n]
        if isinstance(self.tail, FiniteRange) or isinstance(self.tail, Explicit):
            return 0.0
        return self.tail.prefactor * math.exp(-self.tail.rate * n)

    def declared_rate(self) -> float | None:
        """Exponential decay rate usable in closed-form bounds, if any."""
        if isinstance(self.tail, ExponentialTail):
            return self.tail.rate
        return None

    def to_json(self) -> dict:
        return {"entries": list(self.entries), "tail": self.tail.to_json()}

    @staticmethod
    def from_json(obj: dict) -> "DecayProfile":
        return DecayProfile(tuple(obj["entries"]), tail_from_json(obj["tail"]))


def build_profile(spec, cutoff: int) -> DecayProfile:
    """Measure the decay profile of an interaction specification.

    For the translation-invariant part the per-site sum is the same at
    every site, so one unit cell suffices; explicit terms are scanned
    site by site and the maximum taken.  The spec's declared tail is
    validated against the measured entries and copied onto the result.

    Raises ``ValueError`` when the declared tail cannot dominate the
    measured entries (e.g. nonzero norm beyond a declared finite range,
    or a non-positive exponential rate, which would make the head
    entry unbounded).
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    tail = spec.tail
    if isinstance(tail, ExponentialTail) and tail.rate <= 0:
        raise ValueError("declared exponential rate must be positive; "
                         "the head entry would be unbounded")

    # Translation-invariant cells: a cell with offsets O contributes to
    # |O| translates through any fixed site.
    cell_data = []
    for offsets, matrix in spec.cells:
        diam = max(offsets) - min(offsets) if offsets else 0
        cell_data.append((diam, len(offsets) * _spectral_norm(matrix)))

    # Explicit terms: per-site sums, maximised over occurring sites.
    sites = sorted({s for sup in spec.terms for s in sup})
    term_data = [(max(sup) - min(sup), sup, _spectral_norm(mat))
                 for sup, mat in spec.terms.items()]

    entries = []
    for n in range(cutoff + 1):
        ti = sum(w for diam, w in cell_data if diam >= n)
        best = 0.0
        for x in sites:
            at_x = sum(w for diam, sup, w in term_data if x in sup and diam >= n)
            best = max(best, at_x)
        entries.append(ti + best)

    if isinstance(tail, FiniteRange):
        over = [d for d, w in cell_data if d > tail.r and w > 0]
        over += [d for d, _, w in term_data if d > tail.r and w > 0]
        if over:
            raise ValueError(
                f"terms of diameter {max(over)} exceed the declared finite "
                f"range {tail.r}"
            )
        if tail.r > cutoff:
            # Keep the invariant cutoff >= r by padding with the exact values.
            extra = [sum(w for diam, w in cell_data if diam >= n)
                     for n in range(cutoff + 1, tail.r + 1)]
            entries.extend(extra)
    return DecayProfile(tuple(entries), tail)


def _spectral_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(matrix), 2))


def spread_coefficients(profile: DecayProfile, x: float, kmax: int) -> np.ndarray:
    """Coefficients of ``exp(x * sum_{k>=1} entries[k] z^k)`` up to ``z^kmax``.

    Computed with the standard power-series exponential recurrence
    ``k b_k = x * sum_{j=1..k} j entries[j] b_{k-j}``, ``b_0 = 1``;
    cost O(kmax^2).  These coefficients weight how far an evolved
    observable has spread: term ``k`` controls leakage across distance
    ``k``.
    """
    if x < 0:
        raise ValueError("x must be non-negative")
    if kmax > profile.cutoff:
        raise ValueError(f"kmax={kmax} exceeds profile cutoff {profile.cutoff}")
    b = np.zeros(kmax + 1)
    b[0] = 1.0
    ent = profile.entries
    for k in range(1, kmax + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc += j * ent[j] * b[k - j]
        b[k] = x * acc / k
    return b


def exp_weighted_sum(profile: DecayProfile, rate: float) -> float:
    """``sum_n entries[n] * exp(rate * n)`` including the analytic tail.

    Returns ``inf`` when the declared tail cannot absorb the weight
    (rate at or above the declared exponential rate).
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    total = 0.0
    for n, e in enumerate(profile.entries):
        if e == 0.0:
            continue
        expo = rate * n + math.log(e)
        total += math.exp(expo) if expo < 700 else math.inf
    tail = profile.tail
    if isinstance(tail, ExponentialTail) and tail.prefactor > 0:
        q = math.exp(rate - tail.rate)
        if q >= 1.0:
            return math.inf
        # geometric series over n >= cutoff + 1
        k = profile.cutoff + 1
        total += tail.prefactor * q**k / (1.0 - q)
    return total


def _working_profile(profile: DecayProfile, kmax: int) -> DecayProfile:
    """Extend the stored entries to index ``kmax`` using the tail envelope.

    Padding with the (monotone-clipped) envelope keeps every downstream
    series evaluation a valid upper bound, and lets partial sums run far
    enough that the analytic remainder becomes negligible.
    """
    if kmax <= profile.cutoff:
        return profile
    ent = list(profile.entries)
    for n in range(profile.cutoff + 1, kmax + 1):
        ent.append(min(profile.entry(n), ent[-1]))
    return DecayProfile(tuple(ent), profile.tail)


def _spread_padded(profile: DecayProfile, x: float, kmax: int) -> np.ndarray:
    return spread_coefficients(_working_profile(profile, kmax), x, kmax)


def _weighted_series(profile: DecayProfile, x: float, lo: int, hi: int) -> float:
    """``sum_{k=lo..hi} exp(x * head * k) * spread_k(x)``, envelope-padded."""
    if hi < lo:
        return 0.0
    coeffs = _spread_padded(profile, x, hi)
    w = x * profile.head
    return float(sum(math.exp(w * k) * coeffs[k] for k in range(max(lo, 0), hi + 1)))


def weighted_tail_bound(profile: DecayProfile, x: float, ell: int) -> float:
    """Upper bound on ``sum_{k>ell} exp(x*head*k) * spread_k(x)``.

    Minimum over the valid closed forms: the exponential-rate bound
    ``exp((x*head - rate)*ell) * exp(x * weighted_norm(rate))`` for a
    grid of admissible rates, and the superexponential factorial form
    for profiles with zero declared tail.  Returns ``inf`` when no
    closed form applies (rate budget exhausted by ``x * head``).
    """
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0 or all(e == 0.0 for e in profile.entries[1:]) and isinstance(
            profile.tail, (FiniteRange, Explicit)):
        return 0.0
    head = profile.head
    tail = profile.tail
    candidates = []
    if isinstance(tail, (FiniteRange, Explicit)):
        rates = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0]
        rr = (tail.r if isinstance(tail, FiniteRange) else profile.cutoff) + 1
        m = x * head * rr * rr * math.exp(1.0 + x * head * rr)
        if m > 0.0:
            j = ell // rr + 1
            log_term = m + j * math.log(m) - math.lgamma(j + 1)
            candidates.append(math.exp(log_term) if log_term < 700 else math.inf)
        else:
            candidates.append(0.0)
    else:
        # strictly below the declared rate, where the envelope sum converges
        rates = [tail.rate * f for f in (0.5, 0.75, 0.9, 0.96, 0.99)]
    for rate in rates:
        if x * head > rate:
            continue
        norm = exp_weighted_sum(profile, rate)
        if not math.isfinite(norm):
            continue
        expo = (x * head - rate) * ell + x * norm
        candidates.append(math.exp(expo) if expo < 700 else math.inf)
    return min(candidates) if candidates else math.inf


def _weighted_sum_to(profile: DecayProfile, x: float, lo: int, hi: int | None) -> float:
    """``sum_{k=lo..hi}`` of the weighted spread series, ``hi=None`` meaning infinity."""
    if hi is not None:
        return _weighted_series(profile, x, lo, hi)
    work = max(profile.cutoff, lo + 16, 64)
    partial = _weighted_series(profile, x, lo, work)
    return partial + weighted_tail_bound(_working_profile(profile, work), x, work)


@dataclass(frozen=True)
class ExpansionalConstants:
    """Truncated evaluation of the expansional growth constants.

    ``envelope`` bounds the norm of every half-interaction expansional
    and its inverse; ``tail_sums[ell-1]`` is the corresponding tail
    constant at cut distance ``ell``.  ``remainder`` is the analytic
    bound on the part of the series beyond the profile cutoff; it is
    already included in the reported values, which therefore stay
    valid upper bounds.
    """

    envelope: float
    tail_sums: tuple[float, ...]
    series_sum: float
    remainder: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.envelope)

    def tail_sum(self, ell: int) -> float:
        """Tail constant at cut distance ``ell >= 1``."""
        if ell < 1:
            raise ValueError("ell must be >= 1")
        if ell <= len(self.tail_sums):
            return self.tail_sums[ell - 1]
        raise ValueError(f"tail constant {ell} beyond computed lmax")


def expansional_constants(profile: DecayProfile, lmax: int) -> ExpansionalConstants:
    """Growth constants controlling half-interaction expansionals.

    Evaluates ``exp(sum_{k>=1} e^{2*head*k} spread_k(2))`` and its tail
    sums down to cut distance ``lmax``.  Divergence (declared rate not
    above twice the head entry) surfaces as ``inf`` values; check
    ``.finite``.
    """
    x = 2.0
    work = _working_profile(profile, max(profile.cutoff, lmax + 16, 64))
    k_work = work.cutoff
    rem = weighted_tail_bound(work, x, k_work)
    coeffs = spread_coefficients(work, x, k_work)
    w = x * profile.head
    terms = [math.exp(w * k) * coeffs[k] for k in range(k_work + 1)]
    series = float(sum(terms[1:])) + rem
    envelope = math.exp(series) if series < 700 else math.inf
    tails = []
    for ell in range(1, lmax + 1):
        t = float(sum(terms[ell:])) + rem
        tails.append(envelope * t)
    return ExpansionalConstants(envelope, tuple(tails), series, rem)


BOUND_FAMILIES = (
    "series",       # term-by-term series bound, any complex time
    "exp_decay",    # closed form on the disk |s| <= rate/(4*head)
    "disk",         # neighbourhood-growth disk bound (chain graph)
    "real_time",    # real-time bound, s real
    "strip",        # strip combination, prefactor as stated
    "strip_wide",   # strip combination, prefactor from the derivation
)


@dataclass(frozen=True)
class BoundParams:
    """Parameter point of one locality-bound evaluation.

    ``s`` is the complex time, ``inner``/``outer`` the two neighbourhood
    radii being compared (``outer=None`` means the infinite-volume
    limit), ``support_size`` the site count of the observable's
    support, ``decay_rate`` the exponential rate used by the
    rate-dependent families.  The bounds are stated for unit-norm
    observables.
    """

    s: complex
    inner: int
    outer: int | None
    support_size: int
    family: str
    decay_rate: float | None = None

    def __post_init__(self):
        if self.inner < 0:
            raise ValueError("inner radius must be >= 0")
        if self.outer is not None and self.outer < self.inner:
            raise ValueError("outer radius must be >= inner radius")
        if self.support_size < 1:
            raise ValueError("support_size must be >= 1")
        if self.family not in BOUND_FAMILIES:
            raise ValueError(f"unknown bound family {self.family!r}")


@dataclass
class BoundCertificate:
    """One (parameters, theoretical, empirical) record.

    ``empirical`` may be absent when only the theoretical side has been
    evaluated.  ``passed`` uses the fixed slack :data:`PASS_SLACK`.
    """

    params: BoundParams
    theoretical: float
    empirical: float | None = None

    @property
    def margin(self) -> float | None:
        if self.empirical is None:
            return None
        if math.isinf(self.theoretical):
            return math.inf
        return self.theoretical - self.empirical

    @property
    def passed(self) -> bool | None:
        if self.empirical is None:
            return None
        return self.empirical <= self.theoretical + PASS_SLACK


def evaluate_bound(params: BoundParams, profile: DecayProfile,
                   delta_growth=None) -> BoundCertificate:
    """Evaluate the selected locality bound exactly as printed.

    Returns the right-hand side of the selected inequality for a
    unit-norm observable, with ``inf`` whenever the family's validity
    condition on ``s`` fails (outside the disk or strip, or a real-time
    bound at genuinely complex time).  ``delta_growth`` optionally
    supplies the neighbourhood growth function for the ``disk`` family
    on graphs other than the chain (``delta_growth[n]`` bounding the
    size of diameter-``n`` sets); the chain default is ``n + 1``.
    """
    fam = params.family
    s_abs = abs(params.s)
    ell = params.inner
    big = params.outer
    head = profile.head
    j = params.support_size

    if fam == "series":
        value = math.exp(2 * s_abs * head * j) * _weighted_sum_to(
            profile, 4 * s_abs, ell + 1, big)
        return BoundCertificate(params, value)

    if fam == "exp_decay":
        rate = _required_rate(params, profile)
        if 4 * s_abs * head > rate:
            return BoundCertificate(params, math.inf)
        norm = exp_weighted_sum(profile, rate)
        if not math.isfinite(norm):
            return BoundCertificate(params, math.inf)
        value = (math.exp(2 * s_abs * head * j)
                 * math.exp(4 * s_abs * norm)
                 * math.exp((4 * s_abs * head - rate) * ell))
        return BoundCertificate(params, value)

    if fam == "disk":
        rate = _required_rate(params, profile)
        if delta_growth is None:
            # Chain graph: diameter-n sets have at most n+1 sites.
            dnorm = math.exp(rate) * exp_weighted_sum(profile, rate)
        else:
            if not isinstance(profile.tail, (FiniteRange, Explicit)):
                raise ValueError("custom growth tables need a profile with "
                                 "zero declared tail")
            dnorm = sum(e * math.exp(rate * delta_growth[n])
                        for n, e in enumerate(profile.entries))
        if not math.isfinite(dnorm) or dnorm == 0.0:
            return BoundCertificate(params, math.inf if dnorm != 0.0 else 0.0)
        radius = rate / (2 * dnorm)
        if s_abs >= radius:
            return BoundCertificate(params, math.inf)
        value = (2 * math.exp(rate * j) * radius
                 * math.exp(-ell * dnorm * (radius - s_abs)) / (radius - s_abs))
        return BoundCertificate(params, value)

    if fam == "real_time":
        if abs(params.s.imag) > 0:
            return BoundCertificate(params, math.inf)
        t = abs(params.s.real)
        tail = _plain_sum_to(profile, 4 * t, ell + 1)
        value = j * math.exp(4 * t * head) * tail
        return BoundCertificate(params, value)

    if fam in ("strip", "strip_wide"):
        rate = _required_rate(params, profile)
        beta = abs(params.s.imag)
        if 4 * beta * head > rate or ell < 1:
            return BoundCertificate(params, math.inf)
        norm = exp_weighted_sum(profile, rate)
        if not math.isfinite(norm):
            return BoundCertificate(params, math.inf)
        if fam == "strip":
            pref = math.exp(2 * beta * head * j)
        else:
            pref = math.exp(6 * s_abs * head * j)
        value = (2 * j * pref * math.exp(8 * s_abs * norm)
                 * ell * math.exp((4 * beta * head - rate) * (ell // 2)))
        return BoundCertificate(params, value)

    raise ValueError(f"unknown bound family {fam!r}")


def _required_rate(params: BoundParams, profile: DecayProfile) -> float:
    rate = params.decay_rate
    if rate is None:
        rate = profile.declared_rate()
    if rate is None:
        raise ValueError(
            f"family {params.family!r} needs a decay rate; none supplied and "
            "the profile declares no exponential tail")
    if rate <= 0:
        raise ValueError("decay rate must be positive")
    return rate


def _plain_sum_to(profile: DecayProfile, x: float, lo: int) -> float:
    """Upper bound on ``sum_{k>=lo} spread_k(x)`` (no head weights)."""
    work = _working_profile(profile, max(profile.cutoff, lo + 16, 64))
    coeffs = spread_coefficients(work, x, work.cutoff)
    partial = float(sum(coeffs[max(lo, 0):]))
    # The weighted tail dominates the unweighted one.
    return partial + weighted_tail_bound(work, x, work.cutoff)


def surface_bound(W: np.ndarray, sizes, s: complex, ell: int, L: int,
                  head: float) -> float:
    """Locality bound from surface energies on a nested region sequence.

    ``W[j, k]`` is the interaction crossing from region ``j`` into the
    shell ``k``; ``sizes[k]`` the size of region ``k``; ``head`` the
    per-site interaction norm entering the shell weights.  The shell
    coefficients are evaluated by dynamic programming over strictly
    increasing index paths ``0 = b_0 < ... < b_n = k``.
    """
    W = np.asarray(W, dtype=float)
    if W.shape[0] <= L or W.shape[1] <= L:
        raise ValueError("W must cover indices 0..L")
    if np.any(W < 0):
        raise ValueError("surface energies must be non-negative")
    x = 2 * abs(s)
    # paths[n][k] = sum over increasing paths of length n ending at k
    # of the product of W along the path.
    g_prev = np.array([W[0, k] if k > 0 else 0.0 for k in range(L + 1)])
    star = np.zeros(L + 1)
    star[0] = 1.0
    star[1:] += g_prev[1:] * x
    for n in range(2, L + 1):
        g = np.zeros(L + 1)
        for k in range(n, L + 1):
            g[k] = sum(g_prev[jj] * W[jj, k] for jj in range(n - 1, k))
        star += g * x**n / math.factorial(n)
        g_prev = g
    total = 0.0
    for k in range(ell + 1, L + 1):
        total += math.exp(x * head * sizes[k]) * star[k]
    return float(total)
