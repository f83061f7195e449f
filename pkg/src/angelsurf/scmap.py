"""Schwarz-Christoffel maps of the upper half-plane and their inverse
(parameter) problem.

An SC map here is F(z) = c * int_{i}^{z} prod_i (t - t_i)^{a_i - 1} dt with
real vertices t_1 < ... < t_n and rational vertex data a_i.  The interior
angle of the image polygon at F(t_i) is a_i * pi, and the angle at the vertex
at infinity is a_inf * pi with a_inf = 2 - sum(a_i).

The parameter problem (recover the t_i from prescribed edge lengths) is solved
in log-gap coordinates with a Levenberg-Marquardt least-squares iteration.
Beyond plain edge lengths, a target may also prescribe the complex
displacement between two vertex images, evaluated along a path through the
upper half-plane; this is what unbounded polygons (vertex data <= 0) need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateTarget,
    NoConvergence,
    NonIntegrableVertex,
)
from .quad import SingularFactorization, integrate_path, integrate_segment

__all__ = [
    "SCData",
    "PolygonImage",
    "LengthTarget",
    "DisplacementTarget",
    "evaluate",
    "polygon_image",
    "solve_parameter_problem",
    "solve_with_targets",
]

_GAP_FLOOR = 1e-8


def _to_fraction(a) -> Fraction:
    return a if isinstance(a, Fraction) else Fraction(a)


@dataclass(frozen=True)
class SCData:
    """Schwarz-Christoffel data (c, T, A) with base point for the integral."""

    scale: float
    vertices: tuple[float, ...]
    vertex_data: tuple[Fraction, ...]
    base_point: complex = 1j

    def __post_init__(self):
        verts = tuple(float(t) for t in self.vertices)
        data = tuple(_to_fraction(a) for a in self.vertex_data)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "vertex_data", data)
        if len(verts) != len(data):
            raise ValueError("vertices and vertex_data must have equal length")
        if len(verts) < 3:
            raise ValueError("need at least three vertices")
        if any(b <= a for a, b in zip(verts, verts[1:])):
            raise ValueError("vertices must be strictly increasing")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def angle_at_infinity(self) -> Fraction:
        """a_inf = 2 - sum(a_i); computed, never stored."""
        return Fraction(2) - sum(self.vertex_data, Fraction(0))

    @property
    def exponents(self) -> tuple[Fraction, ...]:
        return tuple(a - 1 for a in self.vertex_data)

    def integrand(self) -> SingularFactorization:
        return SingularFactorization(self.vertices, self.exponents, self.scale)


@dataclass(frozen=True)
class PolygonImage:
    """Vertex images and edge vectors of an SC map with all-finite vertices.

    ``edge_vectors[i]`` is F(t_{i+1}) - F(t_i).  The two unbounded boundary
    edges are reported by direction only: ``direction_in`` is the image
    direction of motion approaching t_1 from -infinity, ``direction_out``
    leaving t_n toward +infinity.
    """

    vertex_images: tuple[complex, ...]
    edge_vectors: tuple[complex, ...]
    interior_angles: tuple[Fraction, ...]
    direction_in: complex
    direction_out: complex

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.abs(np.asarray(self.edge_vectors))


def _hpath(sc: SCData, z: complex) -> list[complex]:
    """Waypoints from the base point to z staying inside the upper half-plane
    until the final vertical descent."""
    pts = np.asarray(sc.vertices)
    height = 2.0 * (np.abs(pts).max() + abs(z) + 1.0)
    wps = [sc.base_point, complex(sc.base_point.real, height)]
    if abs(complex(z).imag) >= height:
        wps.append(z)
    else:
        wps.extend([complex(z.real, height), z])
    return [complex(w) for w in wps]


def evaluate(sc: SCData, z: complex, tol: float = 1e-12) -> complex:
    """F(z) along a path through the upper half-plane.

    z must lie in the closed upper half-plane; if z is a vertex its exponent
    a_i - 1 must be > -1 (otherwise the image is at infinity).
    """
    z = complex(z)
    if z.imag < -1e-15 * (1 + abs(z)):
        raise ValueError("evaluation point must lie in the closed upper half-plane")
    f = sc.integrand()
    idx = f._index_of(z.real) if z.imag == 0.0 else None
    if idx is not None and float(sc.vertex_data[idx]) <= 0.0:
        raise NonIntegrableVertex(
            f"vertex t={sc.vertices[idx]} has angle data {sc.vertex_data[idx]} <= 0"
        )
    return integrate_path(f, _hpath(sc, z), tol)


def vertex_displacement(sc: SCData, i: int, j: int, tol: float = 1e-12) -> complex:
    """F(t_j) - F(t_i) along an upper half-plane path (valid across
    non-integrable vertices in between)."""
    ti, tj = sc.vertices[i], sc.vertices[j]
    f = sc.integrand()
    pts = np.asarray(sc.vertices)
    height = 2.0 * (np.abs(pts).max() + 1.0)
    path = [complex(ti), complex(ti, height), complex(tj, height), complex(tj)]
    return integrate_path(f, path, tol)


def edge_vector(sc: SCData, i: int, tol: float = 1e-12) -> complex:
    """Finite edge F(t_{i+1}) - F(t_i) via the real-segment integral."""
    f = sc.integrand()
    return integrate_segment(f, sc.vertices[i], sc.vertices[i + 1], tol)


def _edge_direction(sc: SCData, i: int) -> complex:
    """Unit direction of the image of (t_i, t_{i+1}); i = -1 and i = n-1
    address the two unbounded boundary rays."""
    exps = np.array([float(e) for e in sc.exponents])
    pts = np.asarray(sc.vertices)
    if i < 0:
        x = pts[0] - 1.0
    elif i >= sc.n - 1:
        x = pts[-1] + 1.0
    else:
        x = 0.5 * (pts[i] + pts[i + 1])
    s = float(exps[pts > x].sum())
    return complex(np.exp(1j * np.pi * s))


def polygon_image(sc: SCData, tol: float = 1e-12) -> PolygonImage:
    """Finite vertex images, edge vectors and unbounded directions.

    Requires every consecutive segment integrable (all vertex data > 0);
    quad errors propagate otherwise.
    """
    anchor = evaluate(sc, complex(sc.vertices[0]), tol)
    edges = [edge_vector(sc, i, tol) for i in range(sc.n - 1)]
    images = [anchor]
    for e in edges:
        images.append(images[-1] + e)
    return PolygonImage(
        vertex_images=tuple(images),
        edge_vectors=tuple(edges),
        interior_angles=sc.vertex_data,
        direction_in=_edge_direction(sc, -1),
        direction_out=_edge_direction(sc, sc.n - 1),
    )


# ---------------------------------------------------------------------------
# Parameter problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LengthTarget:
    """|F(t_{edge+1}) - F(t_edge)| must equal ``value``."""

    edge: int
    value: float


@dataclass(frozen=True)
class DisplacementTarget:
    """F(t_j) - F(t_i) (complex, via an upper half-plane path) must equal
    ``value``.  Set ``real_only`` to constrain just the real part."""

    i: int
    j: int
    value: complex
    real_only: bool = False


@dataclass
class ParameterSolution:
    sc: SCData
    residual: float
    nfev: int
    x: np.ndarray = field(repr=False)


def _vertices_from_loggaps(x: np.ndarray, t1: float, t2: float) -> np.ndarray:
    gaps = np.exp(x)
    scale = t2 - t1
    return np.concatenate([[t1, t2], t2 + scale * np.cumsum(gaps)])


def solve_with_targets(
    vertex_data: Sequence,
    targets: Sequence,
    quad_tol: float = 1e-11,
    tol: float = 1e-10,
    x0: np.ndarray | None = None,
    fixed_scale: float | None = None,
    max_nfev: int = 2000,
) -> ParameterSolution:
    """Solve the SC parameter problem for a general target list.

    Unknowns are log-gaps between consecutive vertices beyond the first two
    (normalized to t_1 = -1, t_2 = 0) plus log(scale) unless ``fixed_scale``
    is given.  The target count must match the unknown count.
    """
    data = tuple(_to_fraction(a) for a in vertex_data)
    n = len(data)
    exps = tuple(a - 1 for a in data)
    n_gaps = n - 2
    n_unknown = n_gaps + (0 if fixed_scale is not None else 1)
    if len(targets) != n_unknown:
        raise ValueError(f"need exactly {n_unknown} targets, got {len(targets)}")

    t1, t2 = -1.0, 0.0

    def build(x):
        verts = _vertices_from_loggaps(x[:n_gaps], t1, t2)
        c = fixed_scale if fixed_scale is not None else math.exp(x[n_gaps])
        return verts, c

    def residual(x):
        gaps = np.exp(x[:n_gaps])
        if gaps.min() / (1.0 + gaps.sum()) < 1e-9:
            return np.full(n_unknown, 1e3)
        verts, c = build(x)
        f = SingularFactorization(tuple(verts), exps, c)
        out = []
        height = 2.0 * (np.abs(verts).max() + 1.0)
        for tg in targets:
            if isinstance(tg, LengthTarget):
                v = integrate_segment(f, verts[tg.edge], verts[tg.edge + 1], quad_tol)
                out.append(math.log(abs(v) / tg.value))
            else:
                a, b = verts[tg.i], verts[tg.j]
                path = [complex(a), complex(a, height), complex(b, height), complex(b)]
                v = integrate_path(f, path, quad_tol)
                ref = abs(tg.value) + 1e-30
                out.append((v.real - tg.value.real) / ref)
                if not tg.real_only:
                    out.append((v.imag - tg.value.imag) / ref)
        return np.asarray(out)

    if x0 is None:
        # seed gaps proportional to the target length profile
        lens = [tg.value for tg in targets if isinstance(tg, LengthTarget)]
        ref = np.median(lens) if lens else 1.0
        seed = np.full(n_gaps, 1.0)
        k = 0
        for tg in targets:
            if isinstance(tg, LengthTarget) and 0 <= tg.edge - 1 < n_gaps:
                seed[tg.edge - 1] = max(tg.value / ref, 1e-3)
        x0 = np.log(seed)
        if fixed_scale is None:
            x0 = np.concatenate([x0, [0.0]])
    x0 = np.asarray(x0, dtype=float)

    sol = least_squares(
        residual, x0, method="lm", xtol=1e-14, ftol=1e-14, max_nfev=max_nfev
    )
    res = float(np.max(np.abs(sol.fun)))
    verts, c = build(sol.x)
    sc = SCData(c, tuple(verts), data)
    if res > tol:
        raise NoConvergence(
            f"parameter problem stalled at residual {res:.3e}",
            best=ParameterSolution(sc, res, sol.nfev, sol.x),
            residual=res,
        )
    return ParameterSolution(sc, res, sol.nfev, sol.x)


def solve_parameter_problem(
    vertex_data: Sequence,
    target_lengths: Sequence[float],
    normalization: str = "fix-first-two",
    tol: float = 1e-8,
    quad_tol: float = 1e-11,
    x0: np.ndarray | None = None,
) -> SCData:
    """Recover SC data whose finite edge lengths match ``target_lengths``.

    The normalization pins t_1 = -1, t_2 = 0; the global scale comes out of
    the length system itself.  Triangles (sum a_i = 1, three vertices) are
    similarity-rigid and returned immediately.
    """
    if normalization != "fix-first-two":
        raise ValueError("only the 'fix-first-two' normalization is implemented")
    data = tuple(_to_fraction(a) for a in vertex_data)
    n = len(data)
    lengths = [float(v) for v in target_lengths]
    if len(lengths) != n - 1:
        raise ValueError(f"need {n - 1} target lengths for {n} vertices")
    if min(lengths) <= 0:
        raise DegenerateTarget("target lengths must be positive")
    if min(lengths) / max(lengths) < _GAP_FLOOR:
        raise DegenerateTarget("target length ratio below 1e-8")

    if n == 3 and sum(data, Fraction(0)) == 1:
        # genuine triangle: moduli-free, any vertex triple realizes it
        sc = SCData(1.0, (-1.0, 0.0, 1.0), data)
        ell0 = abs(edge_vector(sc, 0, quad_tol))
        return SCData(lengths[0] / ell0, (-1.0, 0.0, 1.0), data)

    targets = [LengthTarget(i, lengths[i]) for i in range(n - 1)]
    sol = solve_with_targets(data, targets, quad_tol=quad_tol, tol=tol, x0=x0)
    return sol.sc
