"""Transforms of Fuchsian systems: folding, conformal placement, realification.

The pipeline aligns all singular points of a Fuchsian system on the real
axis by alternating real-line-preserving conformal isomorphisms with the
degree-2 fold z = t^2 (which doubles the dimension), then symmetrizes the
residues to real matrices by one more doubling.  Exact input data is
transformed exactly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import scalars as sc
from .core import FuchsianSystem, MatrixPoly, PathSpec, SpecialSystem, height, system_from_json, system_to_json
from .errors import (
    ChosenPointReal,
    FoldPreconditionViolated,
    PointsNotReal,
    SinglePoint,
)
from .scalars import EC

INF = None  # sentinel for the point at infinity in point lists


# ---------------------------------------------------------------------------
# Moebius maps


@dataclass(frozen=True)
class MobiusMap:
    """t -> (a t + b) / (c t + d), ad - bc != 0; exact when entries are exact."""

    a: object
    b: object
    c: object
    d: object
    exact: bool = True

    @staticmethod
    def make(a, b, c, d) -> "MobiusMap":
        vals = (a, b, c, d)
        exact = all(isinstance(v, (EC, int, Fraction, str)) for v in vals)
        if exact:
            a, b, c, d = (EC.of(v) for v in vals)
            det = a * d - b * c
            if det.is_zero():
                raise ValueError("degenerate Moebius map")
        else:
            a, b, c, d = (complex(v) for v in vals)
            if abs(a * d - b * c) < 1e-15:
                raise ValueError("degenerate Moebius map")
        return MobiusMap(a, b, c, d, exact)

    @staticmethod
    def identity() -> "MobiusMap":
        return MobiusMap.make(1, 0, 0, 1)

    def apply(self, t):
        """Image of t; INF (None) is the point at infinity."""
        a, b, c, d = self.a, self.b, self.c, self.d
        if self.exact:
            if t is INF:
                return INF if self.c.is_zero() else a / c
            t = EC.of(t)
            den = c * t + d
            if den.is_zero():
                return INF
            return (a * t + b) / den
        if t is INF:
            return INF if abs(c) < 1e-300 else a / c
        t = complex(t)
        den = c * t + d
        if den == 0:
            return INF
        return (a * t + b) / den

    def apply_c(self, t: complex) -> complex:
        """Floating application for numeric work."""
        a, b, c, d = self.as_complex()
        den = c * t + d
        return (a * t + b) / den

    def as_complex(self):
        if self.exact:
            return (self.a.to_complex(), self.b.to_complex(), self.c.to_complex(), self.d.to_complex())
        return (self.a, self.b, self.c, self.d)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """self after other: (self . other)(t) = self(other(t)); matches 2x2 product."""
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = other.a, other.b, other.c, other.d
        if not (self.exact and other.exact):
            a1, b1, c1, d1 = self.as_complex()
            a2, b2, c2, d2 = other.as_complex()
        return MobiusMap.make(
            a1 * a2 + b1 * c2,
            a1 * b2 + b1 * d2,
            c1 * a2 + d1 * c2,
            c1 * b2 + d1 * d2,
        )

    def inverse(self) -> "MobiusMap":
        return MobiusMap.make(self.d, -self.b, -self.c, self.a)

    def is_real(self) -> bool:
        if self.exact:
            return all(v.is_real() for v in (self.a, self.b, self.c, self.d))
        return all(abs(complex(v).imag) < 1e-12 for v in (self.a, self.b, self.c, self.d))

    def to_json(self) -> dict:
        if self.exact:
            return {"exact": True, "entries": [sc.scalar_to_json(v) for v in (self.a, self.b, self.c, self.d)]}
        return {"exact": False, "entries": [[v.real, v.imag] for v in (self.a, self.b, self.c, self.d)]}

    @staticmethod
    def from_json(doc: dict) -> "MobiusMap":
        if doc["exact"]:
            return MobiusMap.make(*[sc.scalar_from_json(v) for v in doc["entries"]])
        return MobiusMap.make(*[complex(*v) for v in doc["entries"]])


def apply_mobius(sys: FuchsianSystem, mob: MobiusMap) -> FuchsianSystem:
    """Transformed system in the new variable z = mob(t).

    A conformal change of the independent variable keeps all residues; the
    old point at infinity (when singular) reappears at mob(INF), and a finite
    point mapped to infinity drops from the stored (finite) list.
    """
    pairs = []
    if sys.exact and mob.exact:
        for p, A in zip(sys.points, sys.residues):
            pairs.append((mob.apply(p), A))
        Ainf = sys.residue_at_infinity()
        if not sc.mat_is_zero(Ainf):
            pairs.append((mob.apply(INF), Ainf))
        finite = [(z, A) for z, A in pairs if z is not INF]
        return FuchsianSystem.make([z for z, _ in finite], [A for _, A in finite])
    av, bv, cv, dv = mob.as_complex()
    res = sys.np_residues()
    pairs = [(mob.apply(complex(p)), res[j]) for j, p in enumerate(sys.np_points())]
    Ainf = -np.sum(res, axis=0)
    if np.max(np.abs(Ainf)) > 1e-14:
        pairs.append((mob.apply(INF), Ainf))
    finite = [(z, A) for z, A in pairs if z is not INF]
    return FuchsianSystem.make(
        [complex(z.to_complex() if isinstance(z, EC) else z) for z, _ in finite],
        [np.asarray(A, dtype=complex).tolist() for _, A in finite],
    )


# ---------------------------------------------------------------------------
# the simple fold z = t^2


def simple_fold(sys: FuchsianSystem) -> FuchsianSystem:
    """Dimension-doubled system satisfied by (x(sqrt z), sqrt z * x(sqrt z)).

    Requires 0 and infinity nonsingular (no t_j = 0 and residues summing to
    zero).  Finite output poles sit at z_j = t_j^2 (contributions of points
    t_i = -t_j merge into one simple pole) plus the new pole at z = 0; merged
    residues that vanish exactly are dropped.
    """
    if sys.exact:
        return _simple_fold_exact(sys)
    return _simple_fold_float(sys)


def _simple_fold_exact(sys: FuchsianSystem) -> FuchsianSystem:
    n = sys.n
    if any(p.is_zero() for p in sys.points):
        raise FoldPreconditionViolated("a singular point sits at the fold's critical value 0")
    total = sc.mat_zero(n)
    for A in sys.residues:
        total = sc.mat_add(total, A)
    if not sc.mat_is_zero(total):
        raise FoldPreconditionViolated("infinity is singular: residues do not sum to zero")

    half = EC.of(Fraction(1, 2))
    # per-point residue blocks (1/2)[[A_j, A_j/t_j], [t_j A_j, A_j]]; points
    # with t_i = -t_j share z = t^2 and their blocks are summed
    groups: dict = {}
    order = []
    s_inv = sc.mat_zero(n)  # sum A_j / t_j
    for p, A in zip(sys.points, sys.residues):
        z = p * p
        key = (z.re, z.im)
        if key not in groups:
            groups[key] = (z, [sc.mat_zero(2 * n)])
            order.append(key)
        pinv = EC.of(1) / p
        block = _assemble_blocks(
            sc.mat_scale(half, A),
            sc.mat_scale(half * pinv, A),
            sc.mat_scale(half * p, A),
            sc.mat_scale(half, A),
        )
        groups[key][1][0] = sc.mat_add(groups[key][1][0], block)
        s_inv = sc.mat_add(s_inv, sc.mat_scale(pinv, A))

    pts, mats = [], []
    for key in order:
        z, (B,) = groups[key]
        if not sc.mat_is_zero(B):
            pts.append(z)
            mats.append(B)
    # residue at z = 0: (1/2) [[0, -sum A_j/t_j], [0, E]]
    zero_block = sc.mat_zero(n)
    B0 = _assemble_blocks(
        zero_block, sc.mat_scale(EC.of(-1), sc.mat_scale(half, s_inv)),
        zero_block, sc.mat_scale(half, sc.mat_eye(n)),
    )
    pts.append(EC.of(0))
    mats.append(B0)
    return FuchsianSystem.make(pts, mats)


def _assemble_blocks(tl, tr, bl, br):
    n = len(tl)
    rows = []
    for i in range(n):
        rows.append(tuple(tl[i]) + tuple(tr[i]))
    for i in range(n):
        rows.append(tuple(bl[i]) + tuple(br[i]))
    return tuple(rows)


def _simple_fold_float(sys: FuchsianSystem) -> FuchsianSystem:
    n = sys.n
    pts = sys.np_points()
    res = sys.np_residues()
    if np.min(np.abs(pts)) < 1e-12:
        raise FoldPreconditionViolated("a singular point sits at the fold's critical value 0")
    if np.max(np.abs(np.sum(res, axis=0))) > 1e-12:
        raise FoldPreconditionViolated("infinity is singular: residues do not sum to zero")
    zs = pts**2
    used = np.zeros(len(pts), dtype=bool)
    out_pts, out_mats = [], []
    for j in range(len(pts)):
        if used[j]:
            continue
        group = [k for k in range(len(pts)) if not used[k] and abs(zs[k] - zs[j]) < 1e-12]
        for k in group:
            used[k] = True
        B = np.zeros((2 * n, 2 * n), dtype=complex)
        for k in group:
            A = res[k]
            t = pts[k]
            B += 0.5 * np.block([[A, A / t], [t * A, A]])
        if np.max(np.abs(B)) > 1e-15:
            out_pts.append(zs[j])
            out_mats.append(B.tolist())
    s_inv = sum(res[k] / pts[k] for k in range(len(pts)))
    B0 = 0.5 * np.block(
        [[np.zeros((n, n)), -s_inv], [np.zeros((n, n)), np.eye(n)]]
    )
    out_pts.append(0j)
    out_mats.append(B0.tolist())
    return FuchsianSystem.make(out_pts, out_mats)


def verify_fold(sys: FuchsianSystem, folded: FuchsianSystem, tol: float = 1e-8) -> bool:
    """Numerically check y(z) = (x(sqrt z), sqrt z x(sqrt z)) along matched paths.

    Integrates the original system along an arc on a large circle |t| = R and
    the folded system along its pointwise square (the arc on |z| = R^2 with
    doubled angles), then compares endpoint values.
    """
    from . import analytic as an

    n = sys.n
    pts = sys.np_points()
    R = 2.0 * (1.0 + float(np.max(np.abs(pts))))
    th0, th1 = math.pi / 7, 3 * math.pi / 5
    t_path = PathSpec.arc(0.0, R, th0, th1)
    z_path = PathSpec.arc(0.0, R * R, 2 * th0, 2 * th1)
    t0 = R * cmath.exp(1j * th0)
    t1 = R * cmath.exp(1j * th1)
    X_end = an.integrate_along(sys.as_float(), t_path, tol=min(tol * 1e-3, 1e-10))
    Y0 = np.vstack([np.eye(n), t0 * np.eye(n)]).astype(complex)
    Y_end = an.integrate_along(folded.as_float(), z_path, X0=Y0, tol=min(tol * 1e-3, 1e-10))
    target = np.vstack([X_end, t1 * X_end])
    err = float(np.max(np.abs(Y_end - target)))
    return err <= tol * max(1.0, float(np.max(np.abs(target))))


# ---------------------------------------------------------------------------
# conformal placement of poles


def _chordal_objective(zs: list) -> float:
    """min over images of min(|z|, 1/|z|); INF scores 0."""
    best = math.inf
    for z in zs:
        if z is INF:
            return 0.0
        az = abs(z)
        if az == 0.0:
            return 0.0
        best = min(best, az, 1.0 / az)
    return best


def place_poles(points: Sequence, chosen: int) -> MobiusMap:
    """Real-line-preserving Moebius map sending points[chosen] to i.

    The remaining points (INF = None stands for infinity) land in the
    annulus rho_m <= |z| <= 1/rho_m, rho_m = pi/(2m-2): after an exact affine
    normalization chosen -> i, a rotation about the i/-i axis (a map
    (t - tau)/(tau t + 1), tau real, which fixes i exactly) is selected by
    scanning equator directions and refining, maximizing the images'
    multiplicative clearance from {0, infinity}.
    """
    pts = list(points)
    p = pts[chosen]
    if p is INF:
        raise ChosenPointReal("infinity lies on the real circle")
    exact = all(q is INF or isinstance(q, (EC, int, Fraction, str)) for q in pts)
    pc = EC.of(p) if exact else None
    pcx = pc.to_complex() if exact else complex(p)
    if abs(pcx.imag) < 1e-12:
        raise ChosenPointReal(f"chosen point {pcx} is real")

    # affine normalization (t - alpha)/beta, real coefficients, chosen -> i
    if exact:
        m1 = MobiusMap.make(EC.of(1), -EC(pc.re), EC.of(0), EC(pc.im))
    else:
        m1 = MobiusMap.make(1.0 + 0j, complex(-pcx.real), 0j, complex(pcx.imag))

    others = [q for k, q in enumerate(pts) if k != chosen]
    if not others:
        return m1

    def img(q, tau: float):
        # numeric image of q under rotation(tau) . m1; INF when it escapes
        if q is INF:
            w = INF  # the affine normalization keeps infinity in place
        else:
            w = m1.apply_c(complex(q.to_complex() if isinstance(q, EC) else q))
        if w is INF:
            return INF if tau == 0.0 else complex(1.0 / tau)
        den = tau * w + 1.0
        if abs(den) < 1e-300:
            return INF
        return (w - tau) / den

    def objective(tau: float) -> float:
        return _chordal_objective([img(q, tau) for q in others])

    m = len(pts)
    rho = math.pi / (2 * m - 2) if m >= 2 else math.pi / 2
    # scan equator directions at resolution rho/4 (angle on the sphere = 2*phi)
    nscan = max(64, int(math.ceil(16 * math.pi / rho)))
    phis = [(-math.pi / 2) + math.pi * (k + 0.5) / nscan for k in range(nscan)]
    cands = [(objective(math.tan(ph)), ph) for ph in phis]
    best_val, best_phi = max(cands, key=lambda it: it[0])
    # golden-section refinement around the best direction
    lo, hi = best_phi - math.pi / nscan, best_phi + math.pi / nscan
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(80):
        d = hi - lo
        x1, x2 = hi - gr * d, lo + gr * d
        if objective(math.tan(x1)) >= objective(math.tan(x2)):
            hi = x2
        else:
            lo = x1
    phi = (lo + hi) / 2
    tau = math.tan(phi)
    if objective(tau) < best_val:
        tau = math.tan(best_phi)
    if exact:
        tau_q = Fraction(tau).limit_denominator(10**12)
        m2 = MobiusMap.make(EC.of(1), EC.of(-tau_q), EC.of(tau_q), EC.of(1))
    else:
        m2 = MobiusMap.make(1.0 + 0j, complex(-tau), complex(tau), 1.0 + 0j)
    return m2.compose(m1)


# ---------------------------------------------------------------------------
# realification


def realify(sys: FuchsianSystem) -> FuchsianSystem:
    """Dimension-doubled system with real residues at the same (real) points.

    Couples the system with its mirror image across the real axis; the
    residue of the doubled system at t_j is [[Re A, -Im A], [Im A, Re A]].
    """
    if sys.exact:
        if any(not p.is_real() for p in sys.points):
            raise PointsNotReal("realify needs all singular points real")
        pts, mats = [], []
        for p, A in zip(sys.points, sys.residues):
            re = tuple(tuple(EC(x.re) for x in row) for row in A)
            im = tuple(tuple(EC(x.im) for x in row) for row in A)
            mats.append(_assemble_blocks(re, sc.mat_neg(im), im, re))
            pts.append(p)
        return FuchsianSystem.make(pts, mats)
    pts = sys.np_points()
    if np.max(np.abs(pts.imag)) > 1e-12:
        raise PointsNotReal("realify needs all singular points real")
    res = sys.np_residues()
    mats = [
        np.block([[A.real, -A.imag], [A.imag, A.real]]).tolist() for A in res
    ]
    return FuchsianSystem.make([p.real for p in pts], mats)


# ---------------------------------------------------------------------------
# the alignment loop


@dataclass(frozen=True)
class TransformStep:
    kind: str  # "fold" | "mobius" | "realify" | "stretch"
    params: dict
    system: object  # system produced by this step


@dataclass(frozen=True)
class TransformLog:
    initial: object
    steps: tuple

    def final(self):
        return self.steps[-1].system if self.steps else self.initial

    def to_json(self) -> dict:
        return {
            "format": 1,
            "initial": system_to_json(self.initial),
            "steps": [
                {"kind": s.kind, "params": _params_to_json(s.params), "system": system_to_json(s.system)}
                for s in self.steps
            ],
        }

    def replay(self):
        """Re-apply every step to the initial system; must reproduce the log."""
        cur = self.initial
        out = []
        for s in self.steps:
            if s.kind == "mobius":
                cur = apply_mobius(cur, s.params["map"])
            elif s.kind == "fold":
                cur = simple_fold(cur)
            elif s.kind == "realify":
                cur = realify(cur)
            elif s.kind == "stretch":
                cur, _ = stretch_normalize(cur)
            else:
                raise ValueError(f"unknown step kind {s.kind}")
            out.append(TransformStep(s.kind, s.params, cur))
        return TransformLog(self.initial, tuple(out))


def _params_to_json(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, MobiusMap):
            out[k] = v.to_json()
        elif isinstance(v, EC):
            out[k] = sc.scalar_to_json(v)
        else:
            out[k] = v
    return out


def _sphere_points(sys: FuchsianSystem) -> list:
    """Finite singular points plus INF when the residue at infinity is nonzero."""
    pts = list(sys.points) if sys.exact else list(sys.np_points())
    if sys.exact:
        if not sc.mat_is_zero(sys.residue_at_infinity()):
            pts.append(INF)
    else:
        if np.max(np.abs(np.sum(sys.np_residues(), axis=0))) > 1e-14:
            pts.append(INF)
    return pts


def _is_real_point(p) -> bool:
    if p is INF:
        return True
    if isinstance(p, EC):
        return p.is_real()
    return abs(complex(p).imag) < 1e-12


def _imag_size(p) -> float:
    if p is INF:
        return 0.0
    v = p.to_complex() if isinstance(p, EC) else complex(p)
    return abs(v.imag)


def _three_point_map(p1, p2, p3, exact: bool) -> MobiusMap:
    """Moebius map sending (p1, p2, p3) to (1, -1, 0); any p_i may be INF."""
    # M0: t -> ((t - p2)(p3 - p1)) / ((t - p1)(p3 - p2)) sends p1 -> inf,
    # p2 -> 0, p3 -> 1; composing with N(w) = (w-1)/(w+1), which maps
    # (inf, 0, 1) -> (1, -1, 0), lands the triple on the real axis.
    one = EC.of(1) if exact else 1.0 + 0j
    if exact:
        P1 = None if p1 is INF else EC.of(p1)
        P2 = None if p2 is INF else EC.of(p2)
        P3 = None if p3 is INF else EC.of(p3)
    else:
        P1 = None if p1 is INF else complex(p1)
        P2 = None if p2 is INF else complex(p2)
        P3 = None if p3 is INF else complex(p3)
    zero = EC.of(0) if exact else 0j
    if P1 is None:  # p1 = inf: t -> (t - p2)/(p3 - p2)
        a, b, c, d = one, -P2, zero, P3 - P2
    elif P2 is None:  # p2 = inf: t -> (p3 - p1)/(t - p1)
        a, b, c, d = zero, P3 - P1, one, -P1
    elif P3 is None:  # p3 = inf: t -> (t - p2)/(t - p1)
        a, b, c, d = one, -P2, one, -P1
    else:
        a, b = P3 - P1, -P2 * (P3 - P1)
        c, d = P3 - P2, -P1 * (P3 - P2)
    m0 = MobiusMap.make(a, b, c, d)
    n_map = MobiusMap.make(one, -one, one, one)  # w -> (w-1)/(w+1): 0,1,inf -> -1,0,1
    return n_map.compose(m0)


def align_singularities(sys: FuchsianSystem):
    """Drive all singular points onto the real axis, then realify the residues.

    Strategy: if fewer than three sphere points are real, one conformal
    isomorphism places three of them (preferring those farthest from the
    axis) at -1, 0, 1; afterwards each remaining non-real point (largest
    |Im| first) is sent to i by a real Moebius map keeping all points away
    from {0, infinity}, and one fold makes it real.  A final realification
    doubles the dimension when the residues are not already real.

    Returns (aligned system, TransformLog); the log also carries per-step
    height data and a conservative computable height bound for each fold.
    """
    steps: list[TransformStep] = []
    cur = sys
    prepped = False

    def nonreal(points):
        return [p for p in points if not _is_real_point(p)]

    guard = 0
    while True:
        guard += 1
        if guard > 64:
            raise RuntimeError("alignment loop failed to terminate")
        pts = _sphere_points(cur)
        nr = nonreal(pts)
        if not nr:
            break
        n_real = len(pts) - len(nr)
        if not prepped and n_real < 3 and len(pts) >= 3:
            prepped = True
            chosen = sorted(nr, key=_imag_size, reverse=True)[:3]
            fill = [p for p in pts if p not in chosen][: 3 - len(chosen)]
            tri = (chosen + fill)[:3]
            mob = _three_point_map(tri[0], tri[1], tri[2], cur.exact)
            cur = apply_mobius(cur, mob)
            steps.append(TransformStep("mobius", {"map": mob, "role": "prep"}, cur))
            continue
        # choose the non-real point with the largest imaginary part
        target = max(nr, key=_imag_size)
        idx = pts.index(target)
        mob = place_poles(pts, idx)
        cur = apply_mobius(cur, mob)
        steps.append(TransformStep("mobius", {"map": mob, "role": "placement"}, cur))
        before = height(cur)
        folded = simple_fold(cur)
        zs = np.abs(cur.np_points())
        s = float(np.max(np.maximum(zs, 1.0 / zs)))
        bound = _fold_height_bound(before, s, cur.n)
        cur = folded
        steps.append(
            TransformStep(
                "fold",
                {"height_before": before, "height_after": height(cur), "clearance": s, "height_bound": bound},
                cur,
            )
        )
    needs_realify = (
        any(not x.is_real() for Arow in cur.residues for x in Arow)
        if cur.exact
        else bool(np.max(np.abs(cur.np_residues().imag)) > 1e-12)
    )
    if needs_realify:
        cur = realify(cur)
        steps.append(TransformStep("realify", {}, cur))
    return cur, TransformLog(sys, tuple(steps))


def _fold_height_bound(h: float, s: float, n: int) -> float:
    """Computable bound for the folded system's height.

    Each residue block of the folded system is (1/2)[[A, A/z],[zA, A]] with
    rho <= |z| <= 1/rho, s = max(|z|,1/|z|); block-norm accounting gives the
    factor (1 + s) per finite point, plus the constructed poles at 0 and
    infinity contribute at most s*h + n in total norm each.
    """
    return (1.0 + s) * h + 2 * (s * h + n)


# ---------------------------------------------------------------------------
# stretch normalization and the split of the singular locus


def stretch_normalize(sys: SpecialSystem):
    """Affine change t = a t' + b placing the extremal points at -1 and 1.

    Residues are unchanged; polynomial-part coefficients are re-expanded by
    the binomial theorem and can grow by at most 2^p, p the part's degree.
    Returns (normalized system, (a, b)).
    """
    fuch = sys.fuchsian
    if fuch.m < 2:
        raise SinglePoint("stretch normalization needs at least two singular points")
    if sys.exact:
        reals = [p.re for p in fuch.points]
        tmin, tmax = min(reals), max(reals)
        a = (tmax - tmin) / 2
        b = (tmax + tmin) / 2
        if a == 0:
            raise SinglePoint("degenerate point spread")
        new_pts = [EC((p.re - b) / a) for p in fuch.points]
        coeffs = list(sys.polypart.coeffs)
        deg = len(coeffs) - 1
        new_coeffs = []
        for i in range(deg + 1):
            acc = sc.mat_zero(fuch.n)
            for k in range(i, deg + 1):
                w = EC(Fraction(a) ** (i + 1) * math.comb(k, i) * Fraction(b) ** (k - i))
                acc = sc.mat_add(acc, sc.mat_scale(w, coeffs[k]))
            new_coeffs.append(acc)
        out = SpecialSystem.make(new_pts, list(fuch.residues), new_coeffs or None, sys.growth_exponent)
        return out, (float(a), float(b))
    pts = fuch.np_points().real
    tmin, tmax = float(np.min(pts)), float(np.max(pts))
    a = (tmax - tmin) / 2
    b = (tmax + tmin) / 2
    if a == 0:
        raise SinglePoint("degenerate point spread")
    new_pts = [(p - b) / a for p in pts]
    coeffs = sys.polypart.np_coeffs()
    deg = len(coeffs) - 1
    new_coeffs = []
    for i in range(deg + 1):
        acc = np.zeros((fuch.n, fuch.n), dtype=complex)
        for k in range(i, deg + 1):
            acc += (a ** (i + 1)) * math.comb(k, i) * (b ** (k - i)) * coeffs[k]
        new_coeffs.append(acc.tolist())
    out = SpecialSystem.make(
        new_pts, fuch.np_residues().tolist(), new_coeffs or None, sys.growth_exponent
    )
    return out, (a, b)


@dataclass(frozen=True)
class SplitLocus:
    line_re: float
    gap: float
    left_indices: tuple
    right_indices: tuple
    rectangles: tuple  # ((re_lo, re_hi, im_bound), ...) for U1, U2; U3 = complement
    annuli: tuple  # AnnulusSpec for each side


def split_locus(sys: SpecialSystem) -> SplitLocus:
    """Widest-gap split of a stretch-normalized singular locus.

    The vertical line sits at the midpoint of the (leftmost) widest gap, at
    distance >= 1/(m-1) from both parts; the plane is covered by the two
    rectangle halves of {|Re t| <= 2, |Im t| < 1} and the complement, and
    each part receives a surgery annulus with width parameter q <= m.
    """
    from .factorization import AnnulusSpec

    fuch = sys.fuchsian
    m = fuch.m
    if m < 2:
        raise SinglePoint("split needs at least two singular points")
    xs = sorted((float(p.real), j) for j, p in enumerate(fuch.np_points()))
    gaps = [(xs[k + 1][0] - xs[k][0], k) for k in range(m - 1)]
    gap, k = max(gaps, key=lambda it: (it[0], -it[1]))  # leftmost widest
    line = (xs[k][0] + xs[k + 1][0]) / 2
    left = tuple(j for x, j in xs[: k + 1])
    right = tuple(j for x, j in xs[k + 1 :])
    rects = ((-2.0, line, 1.0), (line, 2.0, 1.0))
    annuli = []
    for side in (left, right):
        vals = [float(fuch.np_points()[j].real) for j in side]
        c = (min(vals) + max(vals)) / 2
        spread = (max(vals) - min(vals)) / 2
        other = [float(fuch.np_points()[j].real) for j in (right if side is left else left)]
        dist = min(abs(v - c) for v in other)
        a = spread + gap / 8
        b = dist - gap / 8
        annuli.append(AnnulusSpec.make(a, b, center=c, q=m))
    return SplitLocus(line, gap, left, right, rects, tuple(annuli))
