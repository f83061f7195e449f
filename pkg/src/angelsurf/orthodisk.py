"""Enhanced generalized orthodisks and their period bookkeeping.

An enhanced orthodisk is Schwarz-Christoffel data together with a marked
odd-cardinality subset of its vertices: the branch set of the hyperelliptic
double cover.  Two such orthodisks with equal-size marked sets are e-conjugate
when the periods of their lifted forms over corresponding canonical cycles are
complex conjugates; they are e-reflexive when they additionally share vertices
and marked vertices.  Reflexive pairs are exactly the solved states that yield
minimal surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MismatchedPolygons, ParityViolation
from .hyperell import (
    HyperellipticCurve,
    LiftedForm,
    PeriodVector,
    canonical_cycles,
    end_loop_period,
    period,
)
from .quad import SingularFactorization
from .scmap import SCData

__all__ = [
    "EnhancedOrthodisk",
    "DivisorTable",
    "DivisorRow",
    "ConjugacyReport",
    "divisor",
    "build_eta",
    "conjugacy_report",
    "reflexivity_residual",
]


@dataclass(frozen=True)
class EnhancedOrthodisk:
    """SC data plus an odd marked subset of the vertices."""

    sc: SCData
    marked: tuple[float, ...]

    def __post_init__(self):
        marked = tuple(float(t) for t in self.marked)
        object.__setattr__(self, "marked", marked)
        vset = set(self.sc.vertices)
        if not set(marked) <= vset:
            raise ValueError("marked vertices must be a subset of the vertices")
        if len(marked) % 2 == 0:
            raise ValueError("marked vertex count must be odd")
        if any(b <= a for a, b in zip(marked, marked[1:])):
            raise ValueError("marked vertices must be increasing")

    @property
    def genus(self) -> int:
        return (len(self.marked) - 1) // 2

    def curve(self) -> HyperellipticCurve:
        return HyperellipticCurve(self.marked)

    def lifted_form(self) -> LiftedForm:
        return LiftedForm(self.curve(), self.sc.integrand())


@dataclass(frozen=True)
class DivisorRow:
    label: str          # vertex value as string, or "inf"
    point: float | None  # None for infinity
    lifts: int          # 1 at branch points, 2 otherwise
    order: Fraction     # order of the lifted form at each lift
    cone_angle: Fraction  # cone angle of |omega| there, in units of pi

    @property
    def degree(self) -> Fraction:
        return self.lifts * self.order


@dataclass(frozen=True)
class DivisorTable:
    rows: tuple[DivisorRow, ...]

    @property
    def total_degree(self) -> Fraction:
        return sum((r.degree for r in self.rows), Fraction(0))

    def order_at(self, point) -> Fraction:
        key = "inf" if isinstance(point, str) else None
        for r in self.rows:
            if key == "inf" and r.label == "inf":
                return r.order
            if r.point is not None and point is not None and not isinstance(point, str):
                if abs(r.point - float(point)) <= 1e-12 * (1 + abs(r.point)):
                    return r.order
        raise KeyError(f"no divisor row at {point!r}")

    def orders(self) -> tuple[Fraction, ...]:
        return tuple(r.order for r in self.rows)


def divisor(x: EnhancedOrthodisk) -> DivisorTable:
    """Orders and cone angles of the lifted form at every vertex lift and at
    infinity.

    Marked vertices lift once with order 2a - 1 and cone angle 4a*pi;
    unmarked vertices lift twice with order a - 1 and cone angle 2a*pi each.
    Infinity is always branched (odd marked count), with order derived from
    the exponent sum.
    """
    marked = set(x.marked)
    rows = []
    for t, a in zip(x.sc.vertices, x.sc.vertex_data):
        if t in marked:
            rows.append(DivisorRow(f"{t:g}", t, 1, 2 * a - 1, 4 * a))
        else:
            rows.append(DivisorRow(f"{t:g}", t, 2, a - 1, 2 * a))
    s = sum(x.sc.exponents, Fraction(0))
    o_inf = 2 * (-s - 2) + 1
    # cone angle at infinity in units of pi: 2*(order + 1)
    rows.append(DivisorRow("inf", None, 1, o_inf, 2 * (o_inf + 1)))
    return DivisorTable(tuple(rows))


def build_eta(x: EnhancedOrthodisk, y: EnhancedOrthodisk) -> SingularFactorization:
    """The square-root form zeta with exponents (a_j + b_j)/2 - 1 and
    prefactor sqrt(c1 c2); its lift satisfies omega_x * omega_y = eta^2.

    Requires matching vertices/marked sets and even sums a_j + b_j; the sign
    is fixed to the positive square root.
    """
    if x.sc.vertices != y.sc.vertices or x.marked != y.marked:
        raise MismatchedPolygons("orthodisks must share vertices and marked set")
    exps = []
    for a, b in zip(x.sc.vertex_data, y.sc.vertex_data):
        s = a + b
        if s % 2 != 0:
            raise ParityViolation(f"vertex data sum {a} + {b} is odd")
        exps.append(s / 2 - 1)
    pref = float(np.sqrt(x.sc.scale * y.sc.scale))
    return SingularFactorization(x.sc.vertices, tuple(exps), pref)


@dataclass(frozen=True)
class ConjugacyReport:
    """Per-cycle magnitudes of int(omega_x) - conj(int(omega_y))."""

    a_residuals: tuple[float, ...]
    b_residuals: tuple[float, ...]
    end_residuals: tuple[float, ...]
    periods_x: PeriodVector
    periods_y: PeriodVector

    @property
    def max_residual(self) -> float:
        vals = self.a_residuals + self.b_residuals + self.end_residuals
        return max(vals) if vals else 0.0

    def as_dict(self) -> dict:
        return {
            "a_residuals": list(self.a_residuals),
            "b_residuals": list(self.b_residuals),
            "end_residuals": list(self.end_residuals),
            "max_residual": self.max_residual,
        }


def conjugacy_report(
    x: EnhancedOrthodisk, y: EnhancedOrthodisk, tol: float = 1e-11
) -> ConjugacyReport:
    """Residuals of period conjugacy over every canonical cycle and the two
    end loops (around the first marked vertex and around infinity)."""
    if len(x.marked) != len(y.marked):
        raise MismatchedPolygons("marked sets must have equal cardinality")
    hx, hy = x.lifted_form(), y.lifted_form()
    cx, cy = canonical_cycles(hx.curve), canonical_cycles(hy.curve)
    p = x.genus
    ax = [period(hx, c, tol) for c in cx[:p]]
    ay = [period(hy, c, tol) for c in cy[:p]]
    bx = [period(hx, c, tol) for c in cx[p:]]
    by = [period(hy, c, tol) for c in cy[p:]]
    ex = [
        end_loop_period(hx, x.marked[0], tol),
        end_loop_period(hx, "inf", tol),
    ]
    ey = [
        end_loop_period(hy, y.marked[0], tol),
        end_loop_period(hy, "inf", tol),
    ]
    return ConjugacyReport(
        a_residuals=tuple(abs(u - np.conj(v)) for u, v in zip(ax, ay)),
        b_residuals=tuple(abs(u - np.conj(v)) for u, v in zip(bx, by)),
        end_residuals=tuple(abs(u - np.conj(v)) for u, v in zip(ex, ey)),
        periods_x=PeriodVector(tuple(ax), tuple(bx), tuple(ex)),
        periods_y=PeriodVector(tuple(ay), tuple(by), tuple(ey)),
    )


def _normalize(verts) -> np.ndarray:
    v = np.asarray(verts, dtype=float)
    return (v - v[0]) / (v[-1] - v[0])


def reflexivity_residual(x: EnhancedOrthodisk, y: EnhancedOrthodisk) -> float:
    """max_k |t_k - s_k| after mapping each vertex set affinely onto [0, 1];
    zero exactly when the conformal polygons coincide."""
    if x.sc.n != y.sc.n:
        raise MismatchedPolygons("vertex counts differ")
    return float(np.max(np.abs(_normalize(x.sc.vertices) - _normalize(y.sc.vertices))))
