"""Hyperelliptic double covers w^2 = prod (z - b_k), their canonical homology
basis, and periods of pulled-back differentials.

Branch points are real and listed in increasing order; infinity is always the
remaining branch point (the count is odd).  Branch cuts are the intervals
[b_{2j}, b_{2j+1}] together with [b_{2p}, inf).  The canonical cycles are

* A_j: counterclockwise loop around the cut [b_{2j}, b_{2j+1}], lifted to the
  cover (the loop encloses two branch points, so the lift closes up);
* B_j: clockwise loop enclosing {b_{2j+1}, b_{2j+2}}, i.e. the path that runs
  from cut j+1 to cut j+2 through the upper half-plane and returns through
  the lower half-plane on the second sheet.

Periods are evaluated either by the segment shortcut (a cycle period equals
-+2 times the one-sheet segment integral between the bracketing branch
points; sign fixed by orientation) or, when the integrand has a non-integrable
or non-half-integer exponent there, by honest loop quadrature with branch
tracking.  For integer-exponent forms (single valued downstairs) the loop
route is always used; their periods are plain residue sums.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .quad import (
    SingularFactorization,
    circle_loop,
    integrate_path,
    integrate_segment,
    rectangle_loop,
)

__all__ = [
    "HyperellipticCurve",
    "Cycle",
    "PeriodVector",
    "LiftedForm",
    "lift_form",
    "period",
    "end_loop_period",
    "canonical_cycles",
]


@dataclass(frozen=True)
class HyperellipticCurve:
    """w^2 = prod (z - b) over the real branch points b (odd count); the
    point at infinity is the remaining branch point."""

    branch_points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(b) for b in self.branch_points)
        object.__setattr__(self, "branch_points", pts)
        if len(pts) % 2 == 0:
            raise ValueError("branch point count must be odd (infinity is implicit)")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("branch points must be strictly increasing")

    @property
    def genus(self) -> int:
        return (len(self.branch_points) - 1) // 2

    def cuts(self) -> list[tuple[float, float]]:
        b = self.branch_points
        out = [(b[2 * j], b[2 * j + 1]) for j in range(self.genus)]
        out.append((b[-1], np.inf))
        return out

    def contains_on_cut(self, x: float) -> bool:
        for lo, hi in self.cuts():
            if lo < x < hi:
                return True
        return False


@dataclass(frozen=True)
class Cycle:
    """Canonical homology cycle; ``bracket`` is the pair of branch points the
    loop encloses and ``orientation`` is +1 for the canonical direction."""

    kind: str  # "A" or "B"
    index: int
    bracket: tuple[float, float]
    orientation: int = 1

    def __post_init__(self):
        if self.kind not in ("A", "B"):
            raise ValueError("cycle kind must be 'A' or 'B'")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +-1")

    def reversed(self) -> "Cycle":
        return replace(self, orientation=-self.orientation)


def canonical_cycles(curve: HyperellipticCurve) -> list[Cycle]:
    """A_0..A_{p-1}, B_0..B_{p-1} in that order."""
    b = curve.branch_points
    p = curve.genus
    cycles = [Cycle("A", j, (b[2 * j], b[2 * j + 1])) for j in range(p)]
    cycles += [Cycle("B", j, (b[2 * j + 1], b[2 * j + 2])) for j in range(p)]
    return cycles


@dataclass(frozen=True)
class PeriodVector:
    a_periods: tuple[complex, ...]
    b_periods: tuple[complex, ...]
    end_loops: tuple[complex, ...]

    def __post_init__(self):
        allv = self.a_periods + self.b_periods + self.end_loops
        if not all(np.isfinite([v.real for v in allv] + [v.imag for v in allv])):
            raise ValueError("periods must be finite")


@dataclass(frozen=True)
class LiftedForm:
    """A differential f(z) dz pulled back to the double cover.

    Crossing a branch cut toggles the sign of every square-root factor; the
    path integrator realizes that through continuous argument tracking, so no
    explicit sheet flag is kept.  Exponents at non-branch singular points must
    be integers (the form would not be single valued on the cover otherwise).
    """

    curve: HyperellipticCurve
    form: SingularFactorization

    def __post_init__(self):
        branch = set(self.curve.branch_points)
        for p, e in zip(self.form.singular_points, self.form.exponents):
            if p in branch:
                if (2 * e) % 1 != 0:
                    raise ValueError("branch-point exponent must be a half-integer")
            else:
                if e % 1 != 0:
                    raise ValueError(
                        f"exponent {e} at non-branch point {p} is not an integer"
                    )

    def exponent_at(self, x: float) -> Fraction:
        return self.form.exponent_at(x)


def lift_form(curve: HyperellipticCurve, f: SingularFactorization) -> LiftedForm:
    """Pair a factorization with a curve; validates sheet consistency."""
    if any(abs(complex(p).imag) > 0 for p in f.singular_points):
        raise ValueError("singular points must be real")
    return LiftedForm(curve, f)


def divisor_on_cover(handle: LiftedForm) -> dict:
    """Orders of the lifted form at every singular point lift and at infinity.

    At a branch point the single lift has order 2e + 1 (the +1 from dz); at a
    non-branch point each of the two lifts has order e.  At infinity (always
    branched) the order is 2*(-sum(e) - 2) + 1.
    """
    branch = set(handle.curve.branch_points)
    out = {}
    for p, e in zip(handle.form.singular_points, handle.form.exponents):
        if p in branch:
            out[p] = 2 * e + 1
        else:
            out[p] = e  # per lift; there are two lifts
    for p in handle.curve.branch_points:
        if p not in out:
            out[p] = Fraction(1)  # dz vanishes to first order at a branch lift
    s = sum(handle.form.exponents, Fraction(0))
    out["inf"] = 2 * (-s - 2) + 1
    return out


def _standoff(handle: LiftedForm, lo: float, hi: float) -> float:
    """Safe half-height for a rectangle loop around [lo, hi]: clear of every
    other singular point and branch point."""
    others = sorted(set(handle.form.singular_points) | set(handle.curve.branch_points))
    left = [x for x in others if x < lo - 1e-14 * (1 + abs(lo))]
    right = [x for x in others if x > hi + 1e-14 * (1 + abs(hi))]
    d = hi - lo + 1.0
    if left:
        d = min(d, lo - left[-1])
    if right:
        d = min(d, right[0] - hi)
    return 0.45 * d


def _segment_shortcut_valid(handle: LiftedForm, lo: float, hi: float) -> bool:
    e_lo = handle.exponent_at(lo)
    e_hi = handle.exponent_at(hi)
    half = Fraction(1, 2)
    if not (e_lo % 1 == half and e_hi % 1 == half):
        return False
    if float(e_lo) <= -1 or float(e_hi) <= -1:
        return False
    for p, e in zip(handle.form.singular_points, handle.form.exponents):
        if lo < p < hi and e != 0 and p not in (lo, hi):
            return False
    return True


def period(handle: LiftedForm, cycle: Cycle, tol: float = 1e-11) -> complex:
    """Period of the lifted form over a canonical cycle.

    A_j is counterclockwise and equals -2x the bracketing segment integral;
    B_j is clockwise and equals +2x.  When the shortcut hypotheses fail the
    loop is integrated explicitly.
    """
    lo, hi = cycle.bracket
    if cycle.kind == "A":
        sign, orient = -2.0, "ccw"
    else:
        sign, orient = 2.0, "cw"
    if _segment_shortcut_valid(handle, lo, hi):
        val = sign * integrate_segment(handle.form, lo, hi, tol)
    else:
        h = _standoff(handle, lo, hi)
        val = integrate_path(handle.form, rectangle_loop(lo, hi, h, orient), tol)
    return cycle.orientation * val


def periods(handle: LiftedForm, tol: float = 1e-11) -> PeriodVector:
    """All canonical periods plus the end loops around the first branch point
    and around infinity."""
    cyc = canonical_cycles(handle.curve)
    p = handle.curve.genus
    a = tuple(period(handle, c, tol) for c in cyc[:p])
    b = tuple(period(handle, c, tol) for c in cyc[p:])
    ends = (
        end_loop_period(handle, handle.curve.branch_points[0], tol),
        end_loop_period(handle, "inf", tol),
    )
    return PeriodVector(a, b, ends)


def end_loop_period(handle: LiftedForm, puncture, tol: float = 1e-11) -> complex:
    """Period of a small positively oriented loop around a puncture lift.

    A branch-point puncture has a single preimage; its loop projects to a
    double winding in the plane.  The loop around infinity is a large circle
    (clockwise in z, i.e. positively oriented around infinity), doubled since
    infinity is a branch point.
    """
    pts = np.asarray(handle.form.singular_points, dtype=float)
    allpts = np.union1d(pts, np.asarray(handle.curve.branch_points))
    if isinstance(puncture, str):
        if puncture != "inf":
            raise DomainError(f"unknown puncture {puncture!r}")
        radius = 2.0 * np.abs(allpts).max() + 3.0
        loop = circle_loop(0.0, radius, turns=2, orientation="cw", n_per_turn=16)
        return integrate_path(handle.form, loop, tol)
    x = float(puncture)
    others = allpts[np.abs(allpts - x) > 1e-14 * (1 + abs(x))]
    gap = np.min(np.abs(others - x)) if others.size else 1.0
    turns = 2 if x in handle.curve.branch_points else 1
    loop = circle_loop(x, 0.5 * gap, turns=turns, orientation="ccw", n_per_turn=16)
    return integrate_path(handle.form, loop, tol)
