"""Angel-surface data and solvers.

Genus-p Angel data consists of two enhanced orthodisks over a common vertex
set (t_{-1}, t_0, ..., t_{2p}) with vertex data

    A = (1, 1/2, 3/2, 1/2, ..., 3/2, 1/2)        (G*eta side, type I)
    B = (3, -1/2, 1/2, 3/2, ..., 1/2, 3/2)       (G^-1*eta side, type II)

and marked set {t_0, ..., t_{2p}}.  The genus-1 period problem is solved by a
one-dimensional bracket: with the branch conventions of :mod:`.quad`, the A_0
periods of both forms are real and the B_0 periods purely imaginary, so
conjugacy reduces to two real equations whose combination eliminates the
scale c.

For genus p >= 2 the solver works on families of partially symmetric polygon
pairs.  The type-I polygon is a monotone staircase with finite edge lengths
(l_-1, l_0, d_1, ..., d_{2p-2}, l_last); the type-II polygon shares the
staircase and exit lengths and carries two infinite edges whose relative
offset u is pinned.  Equality of corresponding edge lengths makes all A_j
(j >= 1) and B_j periods conjugate by construction, and pinning l_0 and u at
their genus-1 values makes the A_0 periods conjugate as well (the loop around
the infinite slit develops to -2u, mirroring -2*l_0 on the type-I side).
Reflexivity (equal vertex sets) is then a square system: 2p staircase-family
lengths against the 2p vertex mismatches.

The palindromic staircase slice (equal mirrored steps, all base lengths
frozen) parametrized by J in (0, inf)^{p-1} is exposed as well; it produces
e-conjugate pairs for every J but, numerically, the reflexive solutions lie
outside it: the solved staircases have unequal steps and the outer base
lengths drift from their genus-1 values.  The solver therefore explores the
full family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, root

from .errors import DomainError, NoConvergence
from .orthodisk import (
    ConjugacyReport,
    EnhancedOrthodisk,
    conjugacy_report,
    reflexivity_residual,
)
from .quad import SingularFactorization, integrate_path, integrate_segment, rectangle_loop
from .scmap import (
    DisplacementTarget,
    LengthTarget,
    SCData,
    solve_with_targets,
)

__all__ = [
    "AngelVertexData",
    "Genus1Frame",
    "StaircaseLengths",
    "PolygonPair",
    "SolveResult",
    "angel_data",
    "solve_genus1",
    "genus1_frame",
    "build_polygon_pair",
    "reflexive_mismatch",
    "solve_genus_p",
    "height_value",
]

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class AngelVertexData:
    """Exact vertex-data tuples for both orthodisks of genus p."""

    genus: int
    a_geta: tuple[Fraction, ...]
    a_ginveta: tuple[Fraction, ...]
    marked_count: int

    def parity_ok(self) -> bool:
        return all((a + b) % 2 == 0 for a, b in zip(self.a_geta, self.a_ginveta))


def angel_data(p: int) -> AngelVertexData:
    """Vertex data A and B for genus p >= 1."""
    if p < 1:
        raise DomainError("genus must be >= 1")
    a = (Fraction(1), HALF) + (3 * HALF, HALF) * p
    b = (Fraction(3), -HALF) + (HALF, 3 * HALF) * p
    return AngelVertexData(p, a, b, 2 * p + 1)


@dataclass(frozen=True)
class SolveResult:
    """Solved vertex sets and scales for one genus."""

    genus: int
    t_vector: tuple[float, ...]
    s_vector: tuple[float, ...]
    c1: float
    c2: float
    residual_reflexive: float
    residual_conjugate: float
    iterations: int

    def __post_init__(self):
        for v in (self.t_vector, self.s_vector):
            if any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("vertex vectors must be strictly increasing")
        if self.residual_reflexive < 0 or self.residual_conjugate < 0:
            raise ValueError("residuals must be >= 0")

    def orthodisks(self) -> tuple[EnhancedOrthodisk, EnhancedOrthodisk]:
        """Both enhanced orthodisks on the common (t-side) vertex set."""
        data = angel_data(self.genus)
        x = EnhancedOrthodisk(
            SCData(self.c1, self.t_vector, data.a_geta), self.t_vector[1:]
        )
        y = EnhancedOrthodisk(
            SCData(self.c2, self.t_vector, data.a_ginveta), self.t_vector[1:]
        )
        return x, y

    def as_dict(self) -> dict:
        return {
            "genus": self.genus,
            "t_vector": list(self.t_vector),
            "s_vector": list(self.s_vector),
            "c1": self.c1,
            "c2": self.c2,
            "residual_reflexive": self.residual_reflexive,
            "residual_conjugate": self.residual_conjugate,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# Genus 1
# ---------------------------------------------------------------------------


def _genus1_unit_periods(t: float, quad_tol: float) -> tuple:
    """Unit-scale A_0 and B_0 periods of both genus-1 integrands."""
    f1 = SingularFactorization((-1.0, 0.0, 1.0, t), (Fraction(0), -HALF, HALF, -HALF))
    f2 = SingularFactorization(
        (-1.0, 0.0, 1.0, t), (Fraction(2), -3 * HALF, -HALF, HALF)
    )
    h = 0.45 * min(1.0, t - 1.0)
    a1 = integrate_path(f1, rectangle_loop(0.0, 1.0, h, "ccw"), quad_tol)
    a2 = integrate_path(f2, rectangle_loop(0.0, 1.0, h, "ccw"), quad_tol)
    b1 = 2.0 * integrate_segment(f1, 1.0, t, quad_tol)
    b2 = 2.0 * integrate_segment(f2, 1.0, t, quad_tol)
    return a1, a2, b1, b2


def _genus1_gap(t: float, quad_tol: float = 1e-12) -> float:
    """Scale-eliminated residual whose root is the genus-1 modulus.

    Conjugacy on A_0 gives c^2 = Re(a2)/Re(a1); on B_0 it gives
    c^2 = -Im(b2)/Im(b1); the root equates the two.
    """
    a1, a2, b1, b2 = _genus1_unit_periods(t, quad_tol)
    return a2.real / a1.real + b2.imag / b1.imag


@lru_cache(maxsize=8)
def _solve_genus1_cached(tol: float) -> SolveResult:
    quad_tol = min(1e-12, 0.01 * tol)
    lo, hi = 1.05, 1.05
    glo = _genus1_gap(lo, quad_tol)
    found = False
    for _ in range(40):
        hi *= 1.6
        ghi = _genus1_gap(hi, quad_tol)
        if np.sign(ghi) != np.sign(glo):
            found = True
            break
        lo, glo = hi, ghi
    if not found:
        raise NoConvergence("no sign change found for the genus-1 modulus")
    t = brentq(lambda u: _genus1_gap(u, quad_tol), lo, hi, xtol=1e-14, rtol=8.9e-16)
    a1, a2, b1, b2 = _genus1_unit_periods(t, quad_tol)
    c_sq_a = a2.real / a1.real
    c_sq_b = -b2.imag / b1.imag
    if c_sq_a <= 0 or c_sq_b <= 0:
        raise NoConvergence("scale equations have no positive solution", residual=t)
    c = math.sqrt(c_sq_a)

    verts = (-1.0, 0.0, 1.0, t)
    data = angel_data(1)
    x = EnhancedOrthodisk(SCData(c, verts, data.a_geta), verts[1:])
    y = EnhancedOrthodisk(SCData(1.0 / c, verts, data.a_ginveta), verts[1:])
    rep = conjugacy_report(x, y, quad_tol)
    if rep.max_residual > tol:
        raise NoConvergence(
            f"genus-1 conjugacy stalled at {rep.max_residual:.3e}",
            best=(c, t),
            residual=rep.max_residual,
        )
    return SolveResult(
        genus=1,
        t_vector=verts,
        s_vector=verts,
        c1=c,
        c2=1.0 / c,
        residual_reflexive=0.0,
        residual_conjugate=rep.max_residual,
        iterations=0,
    )


def solve_genus1(tol: float = 1e-9) -> SolveResult:
    """Find c > 0 and t > 1 solving the genus-1 period problem."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _solve_genus1_cached(float(tol))


@dataclass(frozen=True)
class Genus1Frame:
    """Base lengths and offsets of the solved genus-1 polygon pair.

    lambda0 = (l_-1, l_0, l_last) are the finite edge lengths of the type-I
    polygon; (u, v) is the complex displacement F2(t_1) - F2(t_-1) of the
    type-II polygon, whose real part u pins the A_0 period of that side.
    """

    lambda0: tuple[float, float, float]
    u: float
    v: float
    c: float
    t: float

    @property
    def scale_hint(self) -> float:
        return float(np.mean(self.lambda0))


def genus1_frame(result: SolveResult | None = None, tol: float = 1e-9) -> Genus1Frame:
    """Extract the frozen base data from a genus-1 solution."""
    res = result if result is not None else solve_genus1(tol)
    if res.genus != 1:
        raise ValueError("genus1_frame needs a genus-1 solution")
    x, y = res.orthodisks()
    f1 = x.sc.integrand()
    verts = x.sc.vertices
    quad_tol = 1e-12
    lm1 = abs(integrate_segment(f1, verts[0], verts[1], quad_tol))
    l0 = abs(integrate_segment(f1, verts[1], verts[2], quad_tol))
    ll = abs(integrate_segment(f1, verts[2], verts[3], quad_tol))
    f2 = y.sc.integrand()
    height = 2.0 * (1.0 + abs(verts[-1]))
    disp = integrate_path(
        f2,
        [complex(verts[0]), complex(verts[0], height), complex(verts[2], height), complex(verts[2])],
        quad_tol,
    )
    return Genus1Frame((lm1, l0, ll), disp.real, disp.imag, res.c1, res.t_vector[-1])


# ---------------------------------------------------------------------------
# Polygon pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaircaseLengths:
    """Full edge-length data of the staircase family for one genus.

    ``steps`` are the 2(p-1) staircase step lengths in traversal order;
    ``first`` is the l_-1 edge of the type-I polygon and ``last`` the common
    exit edge length of both polygons.
    """

    first: float
    steps: tuple[float, ...]
    last: float

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if len(self.steps) % 2 != 0:
            raise ValueError("step count must be even")
        if self.first <= 0 or self.last <= 0 or any(s <= 0 for s in self.steps):
            raise ValueError("lengths must be positive")

    @property
    def genus(self) -> int:
        return len(self.steps) // 2 + 1


def _expand_stairs(frame: Genus1Frame, stairs) -> StaircaseLengths:
    if isinstance(stairs, StaircaseLengths):
        return stairs
    steps = tuple(float(s) for s in stairs)
    # palindromic expansion of the p-1 independent steps
    return StaircaseLengths(
        first=frame.lambda0[0],
        steps=steps + steps[::-1],
        last=frame.lambda0[2],
    )


@dataclass(frozen=True)
class PolygonPair:
    """A genus-p partially symmetric polygon pair, given by its edge data.

    ``q1_chain`` and ``q2_chain`` are the finite vertex polylines of the two
    polygons built from lengths and the raw-frame edge directions (type I:
    alternating -i and +1; type II: +1 and +i).  ``q2_anchor`` is the vertex
    on the type-II infinite vertical line, placed at S_1 - (u + i v).
    """

    base: tuple[float, float, float]
    stairs: tuple[float, ...]
    genus: int
    staircase: StaircaseLengths
    u: float
    v: float
    q1_lengths: tuple[float, ...]
    q2_lengths: tuple[float, ...]
    q1_chain: tuple[complex, ...]
    q2_chain: tuple[complex, ...]
    q2_anchor: complex

    def q1_staircase_edges(self) -> tuple[complex, ...]:
        """Complex displacement of each staircase edge of the type-I polygon."""
        ch = self.q1_chain
        return tuple(ch[k + 1] - ch[k] for k in range(2, 2 + len(self.staircase.steps)))

    def q2_staircase_edges(self) -> tuple[complex, ...]:
        ch = self.q2_chain
        return tuple(ch[k + 1] - ch[k] for k in range(len(self.staircase.steps)))


def build_polygon_pair(base, stairs=()) -> PolygonPair:
    """Build the genus-p partially symmetric pair from base data and
    staircase lengths.

    ``base`` is a :class:`Genus1Frame` or genus-1 :class:`SolveResult`;
    ``stairs`` is either the p-1 independent palindromic step lengths or a
    :class:`StaircaseLengths` giving the full family member.  With empty
    stairs the genus-1 pair is returned unchanged.
    """
    frame = base if isinstance(base, Genus1Frame) else genus1_frame(base)
    st = _expand_stairs(frame, stairs)
    p = st.genus
    lm1, l0, _ = frame.lambda0

    q1_lengths = (st.first, l0) + st.steps + (st.last,)
    q2_lengths = st.steps + (st.last,)

    # type-I chain: edge directions -i, +1, -i, +1, ... starting at 0
    z = 0.0 + 0.0j
    q1 = [z]
    for k, ell in enumerate(q1_lengths):
        d = -1j if k % 2 == 0 else 1.0
        z = z + d * ell
        q1.append(z)
    # type-II finite chain: directions +i, +1, +i, ... from S_1 = 0
    z = 0.0 + 0.0j
    q2 = [z]
    for k, ell in enumerate(q2_lengths):
        d = 1j if k % 2 == 0 else 1.0
        z = z + d * ell
        q2.append(z)
    anchor = q2[0] - complex(frame.u, frame.v)

    j = tuple(float(s) for s in (stairs if not isinstance(stairs, StaircaseLengths) else ()))
    return PolygonPair(
        base=frame.lambda0,
        stairs=j,
        genus=p,
        staircase=st,
        u=frame.u,
        v=frame.v,
        q1_lengths=q1_lengths,
        q2_lengths=q2_lengths,
        q1_chain=tuple(q1),
        q2_chain=tuple(q2),
        q2_anchor=anchor,
    )


# ---------------------------------------------------------------------------
# The genus-p parameter solves
# ---------------------------------------------------------------------------


class _PairSolver:
    """Warm-started Schwarz-Christoffel solves for one polygon family."""

    def __init__(self, frame: Genus1Frame, p: int, quad_tol: float = 1e-11):
        self.frame = frame
        self.p = p
        self.data = angel_data(p)
        self.quad_tol = quad_tol
        self.x1 = None
        self.x2 = None

    def solve_pair(self, st: StaircaseLengths):
        """Solve both polygons for one staircase member; returns
        (T, c1, S, c2)."""
        p = self.p
        l0 = self.frame.lambda0[1]
        q1_targets = [
            LengthTarget(i, v)
            for i, v in enumerate((st.first, l0) + st.steps + (st.last,))
        ]
        x1 = self.x1
        if x1 is None:
            prof = np.array([l0, *st.steps, st.last]) / l0
            x1 = np.concatenate([np.log(np.maximum(prof, 1e-3)), [math.log(2.0)]])
        sol1 = solve_with_targets(
            self.data.a_geta, q1_targets, quad_tol=self.quad_tol, tol=1e-8, x0=x1
        )
        self.x1 = sol1.x
        c1 = sol1.sc.scale
        T = sol1.sc.vertices

        q2_targets = [LengthTarget(i + 2, v) for i, v in enumerate(st.steps + (st.last,))]
        q2_targets.append(
            DisplacementTarget(0, 2, complex(self.frame.u, 0.0), real_only=True)
        )
        x2 = self.x2 if self.x2 is not None else np.log(np.diff(T)[1:])
        sol2 = solve_with_targets(
            self.data.a_ginveta,
            q2_targets,
            quad_tol=self.quad_tol,
            tol=1e-8,
            x0=x2,
            fixed_scale=1.0 / c1,
        )
        self.x2 = sol2.x
        return np.asarray(T), c1, np.asarray(sol2.sc.vertices), sol2.sc.scale

    def mismatch(self, st: StaircaseLengths) -> np.ndarray:
        T, _, S, _ = self.solve_pair(st)
        return T[2:] - S[2:]


def reflexive_mismatch(base, stairs, p: int | None = None) -> np.ndarray:
    """Vertex mismatches between the two solved polygons of a family member.

    For palindromic input (the p-1 independent step lengths) the p-1
    differences at the leading staircase vertices t_1..t_{p-1} are returned;
    for a :class:`StaircaseLengths` the full vector of 2p differences at
    t_1..t_{2p}.  Both vanish together exactly at a reflexive pair.
    """
    frame = base if isinstance(base, Genus1Frame) else genus1_frame(base)
    full = isinstance(stairs, StaircaseLengths)
    st = _expand_stairs(frame, stairs)
    if p is not None and st.genus != p:
        raise ValueError(f"staircase implies genus {st.genus}, caller said {p}")
    p = st.genus
    if p == 1:
        return np.zeros(0)
    solver = _PairSolver(frame, p)
    m = solver.mismatch(st)
    return m if full else m[: p - 1]


def _insert_seed(prev: StaircaseLengths, scale: float = 1.0) -> StaircaseLengths:
    """Continuation seed: split the previous staircase in the middle and
    insert one new block sized by the geometric mean of its neighbors."""
    steps = prev.steps
    if len(steps) == 0:
        g = 0.3 * math.sqrt(prev.first * prev.last)
    else:
        m = len(steps) // 2
        g = math.sqrt(steps[m - 1] * steps[m])
    m = len(steps) // 2
    new = steps[:m] + (scale * g, scale * g) + steps[m:]
    return StaircaseLengths(prev.first, new, prev.last)


def _result_staircase(res: SolveResult, quad_tol: float = 1e-11) -> StaircaseLengths:
    """Edge lengths of a solved result's type-I polygon."""
    x, _ = res.orthodisks()
    f = x.sc.integrand()
    verts = x.sc.vertices
    lens = [
        abs(integrate_segment(f, verts[i], verts[i + 1], quad_tol))
        for i in range(len(verts) - 1)
    ]
    return StaircaseLengths(lens[0], tuple(lens[2:-1]), lens[-1])


def solve_genus_p(p: int, seed: SolveResult | None = None, tol: float = 1e-8) -> SolveResult:
    """Find an e-reflexive genus-p pair by continuation from genus p-1.

    The outer Newton iteration runs on the logs of the 2p family lengths
    (l_-1, steps, l_last) against the 2p vertex mismatches; the genus-1 base
    quantities l_0 and u stay frozen, which keeps every family member
    e-conjugate.  On success the pair is re-assembled on the common vertex
    set and its conjugacy independently re-verified.
    """
    if p < 2:
        raise DomainError("solve_genus_p requires p >= 2; use solve_genus1")
    if tol <= 0:
        raise NoConvergence("tolerance 0 is unreachable in floating point")
    g1 = solve_genus1(min(1e-9, tol))
    frame = genus1_frame(g1)

    if seed is None:
        chain = g1
        for q in range(2, p):
            chain = solve_genus_p(q, chain, tol)
        seed = chain
    if seed.genus != p - 1:
        raise ValueError(f"seed has genus {seed.genus}, need {p - 1}")

    if seed.genus == 1:
        base_st = StaircaseLengths(frame.lambda0[0], (), frame.lambda0[2])
    else:
        base_st = _result_staircase(seed)

    solver = _PairSolver(frame, p)
    evals = 0

    def resid(x):
        nonlocal evals
        evals += 1
        vals = np.exp(x)
        st = StaircaseLengths(vals[0], tuple(vals[1:-1]), vals[-1])
        try:
            return solver.mismatch(st)
        except Exception:
            return np.full(2 * p, 10.0)

    landscape = []
    best = None
    for scale in (1.0, 1.7, 0.55, 2.6, 0.35):
        st_try = _insert_seed(base_st, scale)
        x0 = np.log([st_try.first, *st_try.steps, st_try.last])
        solver.x1 = solver.x2 = None
        sol = root(resid, x0, method="hybr", options={"xtol": 1e-12})
        m = np.max(np.abs(sol.fun))
        vals = np.exp(sol.x)
        degenerate = vals.min() / vals.sum() < 1e-6
        landscape.append((vals.tolist(), float(m)))
        if best is None or m < best[1]:
            best = (sol.x, m)
        if m <= max(tol, 1e-10) and not degenerate:
            break
    else:
        raise NoConvergence(
            f"genus-{p} reflexive solve stalled at {best[1]:.3e}",
            best=best[0],
            residual=best[1],
            landscape=landscape,
        )

    vals = np.exp(sol.x)
    st = StaircaseLengths(vals[0], tuple(vals[1:-1]), vals[-1])
    T, c1, S, c2 = solver.solve_pair(st)

    data = angel_data(p)
    x = EnhancedOrthodisk(SCData(c1, tuple(T), data.a_geta), tuple(T[1:]))
    y = EnhancedOrthodisk(SCData(c2, tuple(T), data.a_ginveta), tuple(T[1:]))
    y_s = EnhancedOrthodisk(SCData(c2, tuple(S), data.a_ginveta), tuple(S[1:]))
    rep = conjugacy_report(x, y, min(1e-11, 0.01 * tol))
    return SolveResult(
        genus=p,
        t_vector=tuple(T),
        s_vector=tuple(S),
        c1=c1,
        c2=c2,
        residual_reflexive=reflexivity_residual(x, y_s),
        residual_conjugate=rep.max_residual,
        iterations=evals,
    )


# ---------------------------------------------------------------------------
# Height function
# ---------------------------------------------------------------------------


def height_value(ext_pairs: Sequence[tuple[float, float]]) -> float:
    """Height of a conjugate pair from per-class extremal lengths.

    Sum over classes of (e^E1 - e^E2)^2 + (e^{1/E1} - e^{1/E2})^2; zero
    exactly when every pair is equal.  Callers supply the extremal lengths
    from any estimator.
    """
    total = 0.0
    for e1, e2 in ext_pairs:
        if e1 <= 0 or e2 <= 0:
            raise DomainError("extremal lengths must be positive")
        total += (math.exp(e1) - math.exp(e2)) ** 2
        total += (math.exp(1.0 / e1) - math.exp(1.0 / e2)) ** 2
    return total
