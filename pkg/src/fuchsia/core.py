"""Domain types: rational matrix functions, Fuchsian/special systems, paths.

Systems carry their data either exactly (entries in Q(i), see
:mod:`fuchsia.scalars`) or in floating point.  All types are immutable after
construction and every operation here is a pure function.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import scalars as sc
from .errors import EvaluationAtPole
from .scalars import EC

COINCIDENCE_TOL = 1e-12


def _is_exact_entry(x) -> bool:
    return isinstance(x, (EC, int, Fraction, str))


def spectral_norm(a: np.ndarray) -> float:
    """Operator 2-norm via singular values."""
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(np.asarray(a, dtype=complex), 2))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixPoly:
    """Matrix polynomial P(t) = sum_k coeffs[k] t^k, trailing zeros trimmed."""

    coeffs: tuple  # tuple of exact matrices or nested complex tuples
    n: int
    exact: bool

    @staticmethod
    def make(coeffs: Sequence, n: Optional[int] = None) -> "MatrixPoly":
        coeffs = list(coeffs)
        if not coeffs:
            if n is None:
                raise ValueError("empty MatrixPoly needs explicit dimension")
            return MatrixPoly((), n, True)
        first = coeffs[0]
        exact = all(_is_exact_entry(x) for m in coeffs for row in m for x in row)
        if exact:
            mats = [sc.mat_of(m) for m in coeffs]
            while mats and sc.mat_is_zero(mats[-1]):
                mats.pop()
        else:
            mats = [tuple(tuple(complex(x) for x in row) for row in m) for m in coeffs]
            while mats and max(
                (abs(x) for row in mats[-1] for x in row), default=0.0
            ) == 0.0:
                mats.pop()
        dim = n if n is not None else len(first)
        return MatrixPoly(tuple(mats), dim, exact)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def np_coeffs(self) -> np.ndarray:
        if not self.coeffs:
            return np.zeros((0, self.n, self.n), dtype=complex)
        if self.exact:
            return np.array(
                [[[x.to_complex() for x in row] for row in m] for m in self.coeffs]
            )
        return np.array(self.coeffs, dtype=complex)

    def evaluate(self, t: complex) -> np.ndarray:
        acc = np.zeros((self.n, self.n), dtype=complex)
        for m in reversed(self.np_coeffs()):
            acc = acc * t + m
        return acc

    def height(self) -> float:
        return float(sum(spectral_norm(m) for m in self.np_coeffs()))


@dataclass(frozen=True)
class FuchsianSystem:
    """dX/dt = A(t) X with A(t) = sum_j residues[j] / (t - points[j]).

    The residue at infinity is always the derived quantity
    -(A_1 + ... + A_m) and is never stored.
    """

    n: int
    points: tuple
    residues: tuple
    exact: bool

    @staticmethod
    def make(points: Sequence, residues: Sequence) -> "FuchsianSystem":
        points = list(points)
        residues = list(residues)
        if len(points) != len(residues):
            raise ValueError("points and residues must have equal length")
        if not residues:
            raise ValueError("a system needs at least one singular point")
        n = len(residues[0])
        exact = all(_is_exact_entry(p) for p in points) and all(
            _is_exact_entry(x) for m in residues for row in m for x in row
        )
        if exact:
            pts = tuple(EC.of(p) for p in points)
            mats = tuple(sc.mat_of(m) for m in residues)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    if (pts[i] - pts[j]).is_zero():
                        raise ValueError("coincident singular points")
        else:
            pts = tuple(complex(p) for p in points)
            mats = tuple(tuple(tuple(complex(x) for x in row) for row in m) for m in residues)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    if abs(pts[i] - pts[j]) < COINCIDENCE_TOL:
                        raise ValueError("coincident singular points (closer than 1e-12)")
        for m in mats:
            if len(m) != n or any(len(row) != n for row in m):
                raise ValueError("residues must be square of equal dimension")
        return FuchsianSystem(n, pts, mats, exact)

    @property
    def m(self) -> int:
        return len(self.points)

    def np_points(self) -> np.ndarray:
        if self.exact:
            return np.array([p.to_complex() for p in self.points])
        return np.array(self.points, dtype=complex)

    def np_residues(self) -> np.ndarray:
        if self.exact:
            return np.array(
                [[[x.to_complex() for x in row] for row in m] for m in self.residues]
            )
        return np.array(self.residues, dtype=complex)

    def residue_at_infinity(self):
        if self.exact:
            acc = sc.mat_zero(self.n)
            for m in self.residues:
                acc = sc.mat_add(acc, m)
            return sc.mat_neg(acc)
        return tuple(
            tuple(-x for x in row) for row in np.sum(self.np_residues(), axis=0).tolist()
        )

    def as_float(self) -> "FuchsianSystem":
        if not self.exact:
            return self
        return FuchsianSystem.make(list(self.np_points()), self.np_residues().tolist())

    def evaluate(self, t: complex) -> np.ndarray:
        pts = self.np_points()
        if self.singular_at(t):
            raise EvaluationAtPole(f"t={t} is a singular point")
        w = 1.0 / (complex(t) - pts)
        return np.tensordot(w, self.np_residues(), axes=(0, 0))

    def singular_at(self, t: complex, tol: float = COINCIDENCE_TOL) -> bool:
        return bool(np.min(np.abs(self.np_points() - complex(t))) < tol)

    def coefficient_matrix(self):
        """Vectorized A(t) evaluator for the integrators (no pole check)."""
        pts = self.np_points()
        res = self.np_residues()

        def A(t: complex) -> np.ndarray:
            return np.tensordot(1.0 / (t - pts), res, axes=(0, 0))

        return A


@dataclass(frozen=True)
class SpecialSystem:
    """Fuchsian part with all poles on [-1,1] plus a polynomial tail at infinity."""

    fuchsian: FuchsianSystem
    polypart: MatrixPoly
    growth_exponent: int

    @staticmethod
    def make(
        points: Sequence,
        residues: Sequence,
        polypart: Optional[Sequence] = None,
        growth_exponent: int = 0,
    ) -> "SpecialSystem":
        fuch = FuchsianSystem.make(points, residues)
        pp = MatrixPoly.make(polypart if polypart is not None else [], n=fuch.n)
        if pp.n != fuch.n:
            raise ValueError("polypart dimension mismatch")
        return SpecialSystem(fuch, pp, int(growth_exponent))

    @property
    def n(self) -> int:
        return self.fuchsian.n

    @property
    def m(self) -> int:
        return self.fuchsian.m

    @property
    def exact(self) -> bool:
        return self.fuchsian.exact and self.polypart.exact

    def evaluate(self, t: complex) -> np.ndarray:
        return self.fuchsian.evaluate(t) + self.polypart.evaluate(t)

    def coefficient_matrix(self):
        Af = self.fuchsian.coefficient_matrix()
        pp = self.polypart.np_coeffs()

        def A(t: complex) -> np.ndarray:
            acc = Af(t)
            if len(pp):
                tail = np.zeros_like(acc)
                for m in pp[::-1]:
                    tail = tail * t + m
                acc = acc + tail
            return acc

        return A


AnySystem = FuchsianSystem | SpecialSystem


# ---------------------------------------------------------------------------
# operations


def height(sys: AnySystem) -> float:
    """Sum of operator 2-norms of all residues, including the one at infinity."""
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    res = fuch.np_residues()
    total = float(sum(spectral_norm(m) for m in res))
    return total + spectral_norm(-np.sum(res, axis=0))


def validate_special(sys: SpecialSystem) -> list[str]:
    """Check the four membership conditions of the special class.

    Violations are returned as data, one string per failed condition.  Norm
    checks use the Frobenius norm (an upper bound for the 2-norm) so that
    budget checks are conservative on exact data.
    """
    out: list[str] = []
    fuch = sys.fuchsian
    pts = fuch.np_points()
    if np.any(np.abs(pts.imag) > COINCIDENCE_TOL) or np.any(np.abs(pts.real) > 1 + COINCIDENCE_TOL):
        out.append("points not real or outside [-1,1]")
    reality_tol = 0.0 if sys.exact else COINCIDENCE_TOL
    res = fuch.np_residues()
    ppc = sys.polypart.np_coeffs()
    if np.any(np.abs(res.imag) > reality_tol) or (len(ppc) and np.any(np.abs(ppc.imag) > reality_tol)):
        out.append("matrices not real")
    r = sys.growth_exponent
    if sys.exact:
        total = sum(
            sc.frobenius_norm_up(m) for m in fuch.residues
        ) + sum(sc.frobenius_norm_up(m) for m in sys.polypart.coeffs)
    else:
        total = float(sum(spectral_norm(m) for m in res))
        total += float(sum(spectral_norm(m) for m in ppc))
    if total > r:
        out.append(f"norm budget exceeded: total {total:.6g} > r = {r}")
    if sys.polypart.degree > r:
        out.append(f"polynomial part degree {sys.polypart.degree} > r = {r}")
    return out


def evaluate(sys: AnySystem, t: complex) -> np.ndarray:
    """A(t); raises EvaluationAtPole on the singular locus."""
    return sys.evaluate(t)


def common_denominator_form(sys: AnySystem):
    """Rewrite A(t) as P(t)/delta(t) with delta = prod (t - t_j), exactly.

    Requires exact system data; returns (MatrixPoly P, delta) where delta is
    an exact univariate polynomial (ascending coefficients).
    """
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    if not fuch.exact:
        raise ValueError("common_denominator_form needs exact system data")
    pts = fuch.points
    n = fuch.n
    delta = sc.poly_from_roots(pts)
    # P = sum_j A_j * prod_{k != j} (t - t_k)  [+ delta * polypart]
    acc: dict[int, tuple] = {}

    def add_term(k: int, mat):
        acc[k] = sc.mat_add(acc[k], mat) if k in acc else mat

    for j, Aj in enumerate(fuch.residues):
        cof = sc.poly_from_roots([p for i, p in enumerate(pts) if i != j])
        for k, c in enumerate(cof):
            if not c.is_zero():
                add_term(k, sc.mat_scale(c, Aj))
    if isinstance(sys, SpecialSystem) and sys.polypart.coeffs:
        if not sys.polypart.exact:
            raise ValueError("common_denominator_form needs exact polypart")
        for kp, mat in enumerate(sys.polypart.coeffs):
            for kd, c in enumerate(delta):
                if not c.is_zero():
                    add_term(kp + kd, sc.mat_scale(c, mat))
    top = max(acc) if acc else -1
    coeffs = [acc.get(k, sc.mat_zero(n)) for k in range(top + 1)]
    P = MatrixPoly.make(coeffs, n=n)
    return P, delta


# ---------------------------------------------------------------------------
# quasipolynomials


@dataclass(frozen=True)
class Quasipolynomial:
    """f(t) = sum over the spectrum of t^lambda * p_lambda(ln t)."""

    terms: tuple  # tuple of (lambda: complex, coeffs of p_lambda ascending)

    @staticmethod
    def make(terms) -> "Quasipolynomial":
        norm = []
        for lam, coeffs in terms:
            cs = tuple(complex(c) for c in coeffs)
            while cs and cs[-1] == 0:
                cs = cs[:-1]
            if cs:
                norm.append((complex(lam), cs))
        norm.sort(key=lambda it: (it[0].real, it[0].imag))
        return Quasipolynomial(tuple(norm))

    @property
    def degree(self) -> int:
        return sum(1 + len(cs) - 1 for _, cs in self.terms)

    @property
    def real_spectrum(self) -> bool:
        return all(abs(lam.imag) <= COINCIDENCE_TOL for lam, _ in self.terms)

    @property
    def spectrum_radius(self) -> float:
        return max((abs(lam) for lam, _ in self.terms), default=0.0)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class PathSpec:
    """Segments, circular arcs, polylines and triangle boundaries.

    Pieces are parameterized over [0,1]; `orientation` +1 keeps the stored
    direction, -1 reverses it.
    """

    kind: str  # "segment" | "circular-arc" | "polyline" | "triangle-boundary"
    vertices: tuple = ()
    center: complex = 0j
    radius: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0
    orientation: int = 1

    @staticmethod
    def segment(a: complex, b: complex) -> "PathSpec":
        return PathSpec("segment", vertices=(complex(a), complex(b)))

    @staticmethod
    def arc(center: complex, radius: float, theta0: float, theta1: float) -> "PathSpec":
        if not 0 < abs(theta1 - theta0) <= 2 * math.pi + 1e-12:
            raise ValueError("arc angular length must lie in (0, 2*pi]")
        return PathSpec(
            "circular-arc", center=complex(center), radius=float(radius), theta0=float(theta0), theta1=float(theta1)
        )

    @staticmethod
    def circle(center: complex, radius: float, ccw: bool = True) -> "PathSpec":
        t1 = 2 * math.pi if ccw else -2 * math.pi
        return PathSpec.arc(center, radius, 0.0, t1)

    @staticmethod
    def polyline(vertices: Sequence[complex]) -> "PathSpec":
        vs = tuple(complex(v) for v in vertices)
        if len(vs) < 2:
            raise ValueError("polyline needs at least two vertices")
        return PathSpec("polyline", vertices=vs)

    @staticmethod
    def triangle(a: complex, b: complex, c: complex) -> "PathSpec":
        a, b, c = complex(a), complex(b), complex(c)
        area2 = (b - a).real * (c - a).imag - (b - a).imag * (c - a).real
        if abs(area2) < 1e-14 * max(abs(b - a), abs(c - a), 1.0) ** 2:
            raise ValueError("triangle vertices are collinear")
        if area2 < 0:  # store counterclockwise
            b, c = c, b
        return PathSpec("triangle-boundary", vertices=(a, b, c))

    def reversed(self) -> "PathSpec":
        return PathSpec(
            self.kind, self.vertices, self.center, self.radius, self.theta0, self.theta1, -self.orientation
        )

    def pieces(self) -> list[tuple]:
        """Elementary pieces: ("seg", z0, z1) or ("arc", center, r, th0, th1)."""
        if self.kind == "segment":
            ps = [("seg", self.vertices[0], self.vertices[1])]
        elif self.kind == "circular-arc":
            ps = [("arc", self.center, self.radius, self.theta0, self.theta1)]
        elif self.kind == "polyline":
            ps = [("seg", a, b) for a, b in zip(self.vertices, self.vertices[1:])]
        elif self.kind == "triangle-boundary":
            a, b, c = self.vertices
            ps = [("seg", a, b), ("seg", b, c), ("seg", c, a)]
        else:
            raise ValueError(f"unknown path kind {self.kind}")
        if self.orientation < 0:
            out = []
            for p in reversed(ps):
                if p[0] == "seg":
                    out.append(("seg", p[2], p[1]))
                else:
                    out.append(("arc", p[1], p[2], p[4], p[3]))
            ps = out
        return ps

    @property
    def closed(self) -> bool:
        if self.kind == "triangle-boundary":
            return True
        if self.kind == "circular-arc":
            return abs(abs(self.theta1 - self.theta0) - 2 * math.pi) < 1e-12
        if self.kind == "polyline":
            return abs(self.vertices[0] - self.vertices[-1]) < 1e-14
        return False

    def length(self) -> float:
        total = 0.0
        for p in self.pieces():
            if p[0] == "seg":
                total += abs(p[2] - p[1])
            else:
                total += p[2] * abs(p[4] - p[3])
        return total

    def point(self, s: float) -> complex:
        """Global parameterization over [0,1], pieces traversed uniformly."""
        ps = self.pieces()
        k = min(int(s * len(ps)), len(ps) - 1)
        u = s * len(ps) - k
        p = ps[k]
        if p[0] == "seg":
            return p[1] + (p[2] - p[1]) * u
        th = p[3] + (p[4] - p[3]) * u
        return p[1] + p[2] * cmath.exp(1j * th)


# ---------------------------------------------------------------------------
# JSON interchange (format 1)


def _entry_to_json(x, exact: bool):
    if exact:
        return sc.scalar_to_json(x)
    return [x.real, x.imag]


def _entry_from_json(v):
    re, im = v
    if isinstance(re, str) or isinstance(im, str):
        return sc.scalar_from_json(v)
    return complex(re, im)


def _matrix_to_json(mat, exact: bool):
    return [[_entry_to_json(x, exact) for x in row] for row in mat]


def system_to_json(sys: AnySystem) -> dict:
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    ex = fuch.exact
    doc = {
        "format": 1,
        "n": fuch.n,
        "points": [_entry_to_json(p, ex) for p in fuch.points],
        "residues": [_matrix_to_json(m, ex) for m in fuch.residues],
    }
    if isinstance(sys, SpecialSystem):
        pex = sys.polypart.exact
        doc["polypart"] = [_matrix_to_json(m, pex) for m in sys.polypart.coeffs]
        doc["growth_exponent"] = sys.growth_exponent
    return doc


def system_from_json(doc: dict) -> AnySystem:
    points = [_entry_from_json(p) for p in doc["points"]]
    residues = [
        [[_entry_from_json(x) for x in row] for row in m] for m in doc["residues"]
    ]
    if doc.get("polypart") is not None or doc.get("growth_exponent") is not None:
        polypart = [
            [[_entry_from_json(x) for x in row] for row in m]
            for m in doc.get("polypart") or []
        ]
        return SpecialSystem.make(
            points, residues, polypart, int(doc.get("growth_exponent") or 0)
        )
    return FuchsianSystem.make(points, residues)


def path_to_json(path: PathSpec) -> dict:
    doc = {"format": 1, "kind": path.kind, "orientation": path.orientation}
    if path.kind in ("segment", "polyline", "triangle-boundary"):
        doc["vertices"] = [[v.real, v.imag] for v in path.vertices]
    else:
        doc.update(
            center=[path.center.real, path.center.imag],
            radius=path.radius,
            theta0=path.theta0,
            theta1=path.theta1,
        )
    return doc


def path_from_json(doc: dict) -> PathSpec:
    kind = doc["kind"]
    if kind == "segment":
        a, b = (complex(*v) for v in doc["vertices"])
        p = PathSpec.segment(a, b)
    elif kind == "polyline":
        p = PathSpec.polyline([complex(*v) for v in doc["vertices"]])
    elif kind == "triangle-boundary":
        a, b, c = (complex(*v) for v in doc["vertices"])
        p = PathSpec.triangle(a, b, c)
    elif kind == "circular-arc":
        p = PathSpec.arc(complex(*doc["center"]), doc["radius"], doc["theta0"], doc["theta1"])
    else:
        raise ValueError(f"unknown path kind {kind}")
    if doc.get("orientation", 1) < 0:
        p = p.reversed()
    return p
