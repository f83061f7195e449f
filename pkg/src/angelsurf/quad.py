"""Numerical integration of products prod_i (t - t_i)^{e_i}.

This module is the shared engine for every period and Schwarz-Christoffel
computation in the package.  Two primitives are provided:

* :func:`integrate_segment` -- integral along a real interval whose endpoints
  may carry algebraic singularities.  Gauss-Jacobi rules absorb the endpoint
  exponents exactly; panels are graded geometrically toward the endpoints so
  that singular points just outside the interval (crowded vertices) do not
  destroy convergence.

* :func:`integrate_path` -- integral along a polygonal path in the plane with
  continuous tracking of arg(z - t_i) for every singular point.  This is what
  makes loop integrals around branch cuts well defined: the value depends only
  on the homotopy class of the path and the initial branch state.

Branch convention.  On the real axis the factor (t - t_i)^e is taken real and
positive for t > t_i and equal to |t - t_i|^e * exp(i*pi*e) for t < t_i, i.e.
the limit from the upper half-plane.  Paths started at a real point, or at a
point in the upper half-plane with principal arguments, continue that branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import roots_jacobi

from .errors import (
    BranchAmbiguity,
    InteriorSingularity,
    NoConvergence,
    NonIntegrable,
)

__all__ = [
    "SingularFactorization",
    "IntegrationPath",
    "integrate_segment",
    "integrate_path",
    "rectangle_loop",
    "circle_loop",
]

#: relative gap below which two singular points are considered coincident;
#: such configurations signal a degenerating moduli point and are rejected.
COINCIDENCE_REL = 1e-10

_MAX_DEPTH = 40
_SNAP = 1e-13


def _as_float_exponents(exponents: Sequence) -> np.ndarray:
    return np.array([float(e) for e in exponents], dtype=float)


@dataclass(frozen=True)
class SingularFactorization:
    """The integrand c * prod_i (t - t_i)^{e_i}.

    ``singular_points`` must be strictly increasing reals.  Exponents may be
    given as :class:`fractions.Fraction` (kept exact for divisor arithmetic)
    or floats.  ``prefactor`` is a positive real scale.
    """

    singular_points: tuple[float, ...]
    exponents: tuple[Fraction | float, ...]
    prefactor: float = 1.0

    def __post_init__(self):
        pts = tuple(float(p) for p in self.singular_points)
        object.__setattr__(self, "singular_points", pts)
        exps = tuple(
            e if isinstance(e, Fraction) else Fraction(e) for e in self.exponents
        )
        object.__setattr__(self, "exponents", exps)
        if len(pts) != len(exps):
            raise ValueError("points and exponents must have equal length")
        if len(pts) >= 2:
            gaps = np.diff(pts)
            if np.any(gaps <= 0):
                raise ValueError("singular points must be strictly increasing")
            span = pts[-1] - pts[0]
            if span > 0 and gaps.min() < COINCIDENCE_REL * span:
                raise InteriorSingularity(
                    "near-coincident singular points (gap < 1e-10 * span); "
                    "this configuration is degenerate"
                )
        if not (self.prefactor > 0):
            raise ValueError("prefactor must be positive")

    # -- helpers ---------------------------------------------------------

    @property
    def points_array(self) -> np.ndarray:
        return np.asarray(self.singular_points, dtype=float)

    @property
    def exponents_array(self) -> np.ndarray:
        return _as_float_exponents(self.exponents)

    def scaled(self, factor: float) -> "SingularFactorization":
        return SingularFactorization(
            self.singular_points, self.exponents, self.prefactor * factor
        )

    def exponent_at(self, x: float) -> Fraction:
        """Exponent attached to the singular point equal to x (0 if none)."""
        idx = self._index_of(x)
        return self.exponents[idx] if idx is not None else Fraction(0)

    def _index_of(self, x: float) -> int | None:
        pts = self.points_array
        if pts.size == 0:
            return None
        scale = 1.0 + np.abs(pts).max() + abs(x)
        hits = np.nonzero(np.abs(pts - x) <= _SNAP * scale)[0]
        return int(hits[0]) if hits.size else None

    def phase_right_of(self, x: float) -> complex:
        """Upper half-plane phase exp(i*pi*sum of exponents at points > x)."""
        pts = self.points_array
        exps = self.exponents_array
        s = float(exps[pts > x].sum())
        return complex(np.exp(1j * np.pi * s))

    def magnitude(self, t: np.ndarray, skip: int | None = None) -> np.ndarray:
        """prod |t - t_i|^{e_i}, optionally skipping one factor."""
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for i, (p, e) in enumerate(zip(self.singular_points, self.exponents_array)):
            if i == skip or e == 0.0:
                continue
            acc += e * np.log(np.abs(t - p))
        return np.exp(acc)


@dataclass(frozen=True)
class IntegrationPath:
    """Polygonal path with per-singular-point branch state.

    ``initial_args`` holds a continuous argument of (z0 - t_i) for every
    singular point at the first waypoint.  When omitted it defaults to the
    principal argument there, which reproduces the upper half-plane branch
    for starting points on or above the real axis.
    """

    waypoints: tuple[complex, ...]
    initial_args: tuple[float, ...] | None = None

    def __post_init__(self):
        wps = tuple(complex(w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ValueError("a path needs at least two waypoints")

    @property
    def is_closed(self) -> bool:
        return abs(self.waypoints[0] - self.waypoints[-1]) == 0.0


# ---------------------------------------------------------------------------
# Gauss rules
# ---------------------------------------------------------------------------


@lru_cache(maxsize=512)
def _jacobi_rule(n: int, alpha: float, beta: float):
    """Nodes/weights on [-1, 1] for weight (1-x)^alpha (1+x)^beta."""
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


def _panel_jacobi(g, lo: float, hi: float, e_lo: float, e_hi: float, n: int) -> float:
    """Integral over [lo, hi] of (x-lo)^e_lo (hi-x)^e_hi g(x)."""
    h = 0.5 * (hi - lo)
    x, w = _jacobi_rule(n, e_hi, e_lo)
    t = lo + h * (x + 1.0)
    scale = h ** (1.0 + e_lo + e_hi)
    return scale * float(np.dot(w, g(t)))


def _adaptive_jacobi(g, lo, hi, e_lo, e_hi, tol, depth=0):
    """Order-doubling Gauss-Jacobi with bisection fallback."""
    last = _panel_jacobi(g, lo, hi, e_lo, e_hi, 16)
    for n in (24, 32, 48, 64, 96):
        cur = _panel_jacobi(g, lo, hi, e_lo, e_hi, n)
        if abs(cur - last) <= tol * (1.0 + abs(cur)):
            return cur
        last = cur
    if depth >= _MAX_DEPTH:
        raise NoConvergence("segment quadrature failed to converge", residual=last)
    mid = 0.5 * (lo + hi)
    left = _adaptive_jacobi(g, lo, mid, e_lo, 0.0, 0.5 * tol, depth + 1)
    right = _adaptive_jacobi(g, mid, hi, 0.0, e_hi, 0.5 * tol, depth + 1)
    return left + right


# ---------------------------------------------------------------------------
# Segment integration
# ---------------------------------------------------------------------------


def integrate_segment(f: SingularFactorization, a: float, b: float, tol: float = 1e-12) -> complex:
    """Integral of f along the real interval [a, b], upper half-plane branch.

    Endpoints may coincide with singular points provided their exponents are
    > -1; interior singular points (with nonzero exponent) are rejected.  The
    result carries the constant phase exp(i*pi * sum of exponents to the
    right of the segment).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0 + 0.0j
    if b < a:
        return -integrate_segment(f, b, a, tol)

    pts = f.points_array
    exps = f.exponents_array
    scale = 1.0 + abs(a) + abs(b) + (np.abs(pts).max() if pts.size else 0.0)
    ia = f._index_of(a)
    ib = f._index_of(b)
    for i, p in enumerate(pts):
        interior = a + _SNAP * scale < p < b - _SNAP * scale
        if interior and i not in (ia, ib) and exps[i] != 0.0:
            raise InteriorSingularity(f"singular point {p} inside ({a}, {b})")
    e_a = float(exps[ia]) if ia is not None else 0.0
    e_b = float(exps[ib]) if ib is not None else 0.0
    if e_a <= -1.0 or e_b <= -1.0:
        raise NonIntegrable(f"endpoint exponent <= -1 on [{a}, {b}]")

    mid = 0.5 * (a + b)
    phase = f.phase_right_of(mid)

    # graded split so each half sees one (possibly) singular endpoint
    half_tol = 0.5 * tol / max(f.prefactor, 1.0)
    left = _graded_half(f, a, mid, e_a, ia, half_tol, toward="lo")
    right = _graded_half(f, mid, b, e_b, ib, half_tol, toward="hi")
    return f.prefactor * phase * (left + right)


def _graded_half(f, lo, hi, e_end, idx_end, tol, toward):
    """Integrate the magnitude of f over [lo, hi] whose ``toward`` endpoint
    carries the (possibly zero) exponent e_end.

    The panel touching the singular end absorbs the endpoint factor into a
    Gauss-Jacobi weight; every other panel evaluates the full magnitude with
    Gauss-Legendre.  Panels shrink geometrically toward the singular end so
    that external singular points adjacent to it are resolved.
    """
    pts = f.points_array
    length = hi - lo
    end = lo if toward == "lo" else hi
    ext = np.abs(pts - end)
    if idx_end is not None:
        ext = np.delete(ext, idx_end)
    # distance from the singular end to the nearest other singular point
    d = float(ext.min()) if ext.size else np.inf
    h0 = min(0.5 * d, length)
    if not np.isfinite(h0) or h0 <= 0:
        h0 = length

    def g_full(t):
        return f.magnitude(t)

    def g_skip(t):
        return f.magnitude(t, skip=idx_end)

    # geometric panel boundaries from the singular end outward
    bounds = [0.0]
    x = h0
    while x < length:
        bounds.append(x)
        x *= 2.0
    bounds.append(length)
    total = 0.0
    ntol = tol / max(len(bounds), 1)
    for k in range(len(bounds) - 1):
        u0, u1 = bounds[k], bounds[k + 1]
        g = g_skip if k == 0 else g_full
        if toward == "lo":
            p0, p1 = lo + u0, lo + u1
            e0 = e_end if k == 0 else 0.0
            total += _adaptive_jacobi(g, p0, p1, e0, 0.0, ntol)
        else:
            p0, p1 = hi - u1, hi - u0
            e1 = e_end if k == 0 else 0.0
            total += _adaptive_jacobi(g, p0, p1, 0.0, e1, ntol)
    return total


# ---------------------------------------------------------------------------
# Path integration with branch tracking
# ---------------------------------------------------------------------------


def _principal_args(f: SingularFactorization, z0: complex) -> np.ndarray:
    return np.angle(z0 - f.points_array) if len(f.singular_points) else np.zeros(0)


def _value_from_state(f, z, args):
    """Integrand value at points z (array) given continuous args per factor."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    logmag = np.zeros(z.shape, dtype=float)
    phase = np.zeros(z.shape, dtype=float)
    for p, e, th in zip(f.points_array, f.exponents_array, args.T):
        if e == 0.0:
            continue
        logmag += e * np.log(np.abs(z - p))
        phase += e * th
    return f.prefactor * np.exp(logmag + 1j * phase)


def _split_leg(f, z0, z1):
    """Split a straight leg until each piece subtends < pi/2 from every
    singular point, so argument increments are unambiguous."""
    pieces = [(z0, z1)]
    out = []
    pts = f.points_array
    while pieces:
        a, b = pieces.pop()
        if pts.size:
            ang = np.abs(np.angle((b - pts) / (a - pts)))
            too_wide = bool(np.any(ang > 0.5 * np.pi))
        else:
            too_wide = False
        if too_wide:
            m = 0.5 * (a + b)
            pieces.append((m, b))
            pieces.append((a, m))
        else:
            out.append((a, b))
    return out


def _leg_args(f, z0, args0, z):
    """Continue the argument state from z0 to points z on the leg z0->z1."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = f.points_array
    if pts.size == 0:
        return np.zeros((z.size, 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (z[:, None] - pts[None, :]) / (z0 - pts[None, :])
        inc = np.angle(ratio)
    return args0[None, :] + inc


def _integrate_leg(f, z0, z1, args0, tol):
    """Adaptive Gauss-Legendre along one straight sub-leg; returns value and
    the argument state at z1."""
    dz = z1 - z0

    def eval_at(tau):
        z = z0 + tau * dz
        args = _leg_args(f, z0, args0, z)
        return _value_from_state(f, z, args) * dz

    last = None
    for n in (16, 24, 32, 48, 64, 96, 128, 192, 256):
        x, w = _jacobi_rule(n, 0.0, 0.0)
        tau = 0.5 * (x + 1.0)
        vals = eval_at(tau)
        cur = 0.5 * complex(np.dot(w, vals))
        if last is not None and abs(cur - last) <= tol * (1.0 + abs(cur)):
            end_args = _leg_args(f, z0, args0, np.array([z1]))[0]
            return cur, end_args
        last = cur
    # fall back to bisection
    m = 0.5 * (z0 + z1)
    v1, args_m = _integrate_leg(f, z0, m, args0, 0.5 * tol)
    v2, args_e = _integrate_leg(f, m, z1, args_m, 0.5 * tol)
    return v1 + v2, args_e


def _integrate_leg_jacobi(f, z0, z1, args0, tol, singular_end):
    """Leg whose ``singular_end`` ('lo' -> z0, 'hi' -> z1) sits exactly on a
    singular point with integrable exponent."""
    end = z0 if singular_end == "lo" else z1
    idx = f._index_of(end.real) if end.imag == 0.0 else None
    if idx is None:
        return _integrate_leg(f, z0, z1, args0, tol)
    e = float(f.exponents_array[idx])
    if e <= -1.0:
        raise NonIntegrable("leg endpoint exponent <= -1")
    dz = z1 - z0
    p = f.singular_points[idx]
    # along the straight approach the singular factor has constant argument
    if singular_end == "hi":
        arg_fac = np.angle(z0 - p) if args0 is None else args0[idx]
        e_lo, e_hi = 0.0, e
    else:
        # argument of (z - p) just off the start: use direction of the leg
        arg_fac = np.angle(dz)
        e_lo, e_hi = e, 0.0

    def eval_smooth(tau):
        z = z0 + tau * dz
        args = _leg_args(f, z0, args0, z)
        return _value_from_state_skip(f, z, args, idx)

    last = None
    for n in (16, 24, 32, 48, 64, 96, 128, 192):
        x, w = _jacobi_rule(n, e_hi, e_lo)
        tau = 0.5 * (x + 1.0)
        vals = eval_smooth(tau)
        scale = 0.5 ** (1.0 + e) * abs(dz) ** e * np.exp(1j * e * arg_fac) * dz
        cur = complex(np.dot(w, vals)) * scale
        if last is not None and abs(cur - last) <= tol * (1.0 + abs(cur)):
            break
        last = cur
    if singular_end == "lo":
        # (z0 - p) vanishes, so continue every other factor from z1 backwards
        end_args = np.array(
            [
                np.angle(dz) if i == idx else args0[i] + _arg_increment(z0, z1, q)
                for i, q in enumerate(f.points_array)
            ]
        )
    else:
        end_args = _leg_args(f, z0, args0, np.array([z1]))[0]
    return cur, end_args


def _arg_increment(z0, z1, p):
    if z0 == p:
        return 0.0
    return float(np.angle((z1 - p) / (z0 - p)))


def _value_from_state_skip(f, z, args, skip):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    logmag = np.zeros(z.shape, dtype=float)
    phase = np.zeros(z.shape, dtype=float)
    for i, (p, e) in enumerate(zip(f.points_array, f.exponents_array)):
        if i == skip or e == 0.0:
            continue
        logmag += e * np.log(np.abs(z - p))
        phase += e * args[:, i]
    return f.prefactor * np.exp(logmag + 1j * phase)


def integrate_path(f: SingularFactorization, path: IntegrationPath | Sequence[complex],
                   tol: float = 1e-12) -> complex:
    """Path integral of f with branch continuation along the path.

    The result is invariant under waypoint refinement within the homotopy
    class of the path (relative to the singular points).  Waypoints may not
    coincide with singular points except at the two ends, where an integrable
    exponent is required.
    """
    if not isinstance(path, IntegrationPath):
        path = IntegrationPath(tuple(path))
    wps = path.waypoints
    pts = f.points_array
    scale = 1.0 + (np.abs(pts).max() if pts.size else 0.0) + max(abs(w) for w in wps)
    for k, w in enumerate(wps):
        if pts.size and np.min(np.abs(w - pts)) <= _SNAP * scale:
            if 0 < k < len(wps) - 1:
                raise BranchAmbiguity(f"waypoint {w} coincides with a singular point")
            e = f.exponent_at(w.real)
            if float(e) <= -1.0:
                raise NonIntegrable("path endpoint sits on a non-integrable singularity")

    if path.initial_args is not None:
        args = np.asarray(path.initial_args, dtype=float)
    else:
        args = _principal_args(f, wps[0])

    total = 0.0 + 0.0j
    leg_tol = tol / max(len(wps) - 1, 1)
    for k in range(len(wps) - 1):
        z0, z1 = wps[k], wps[k + 1]
        if z0 == z1:
            continue
        start_singular = k == 0 and pts.size and np.min(np.abs(z0 - pts)) <= _SNAP * scale
        end_singular = (
            k == len(wps) - 2 and pts.size and np.min(np.abs(z1 - pts)) <= _SNAP * scale
        )
        if start_singular:
            v, args = _integrate_leg_jacobi(f, z0, z1, args, leg_tol, "lo")
            total += v
            continue
        if end_singular:
            v, args = _integrate_leg_jacobi(f, z0, z1, args, leg_tol, "hi")
            total += v
            continue
        for a, b in _split_leg(f, z0, z1):
            v, args = _integrate_leg(f, a, b, args, leg_tol)
            total += v
    return total


# ---------------------------------------------------------------------------
# Standard loops
# ---------------------------------------------------------------------------


def rectangle_loop(a: float, b: float, h: float, orientation: str = "ccw") -> tuple[complex, ...]:
    """Waypoints of a rectangular loop of half-height h around [a, b].

    The loop starts and ends at b + h on the real axis.  Counterclockwise
    is the positive orientation.
    """
    if h <= 0:
        raise ValueError("standoff must be positive")
    right = b + h
    left = a - h
    ccw = (
        complex(right, 0.0),
        complex(right, h),
        complex(left, h),
        complex(left, -h),
        complex(right, -h),
        complex(right, 0.0),
    )
    if orientation == "ccw":
        return ccw
    if orientation == "cw":
        return tuple(reversed(ccw))
    raise ValueError("orientation must be 'ccw' or 'cw'")


def circle_loop(center: float, radius: float, turns: int = 1,
                orientation: str = "ccw", n_per_turn: int = 12) -> tuple[complex, ...]:
    """Waypoints of a chordal polygon winding ``turns`` times around center.

    Chords are homotopic to the circular arcs, so the integral equals the
    circle integral.  The loop starts at center + radius.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    sign = 1.0 if orientation == "ccw" else -1.0
    n = n_per_turn * turns
    angles = sign * 2.0 * np.pi * np.arange(n + 1) / n_per_turn
    return tuple(complex(center) + radius * np.exp(1j * t) for t in angles)
