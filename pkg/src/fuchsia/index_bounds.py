"""Closed-form index and zero-count bounds.

All bounds return exact pi-multiples (a rational coefficient times pi) so
comparisons stay sound: the float value is materialized with pi rounded
upward.  The two structural bounds expand a scalar equation D^l + sum a_k
D^(l-k) either in plain derivatives (for segments away from the poles) or in
the Euler operator at a singular point (for small circular arcs), and feed
the resulting coefficient bound into the classical index inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import scalars as sc
from .core import FuchsianSystem, MatrixPoly, PathSpec, SpecialSystem
from .errors import NoAdmissibleC, SegmentTooClose, SpectrumNotReal
from .reduction import LinearFormPoly, ScalarFuchsianODE, reduce_to_scalar
from .scalars import EC

# float just above pi: multiplying a nonnegative coefficient by it rounds up
PI_UP = Fraction(math.nextafter(math.pi, 4.0))


def _pi_value(coef: Fraction) -> float:
    v = float(Fraction(coef) * PI_UP)
    return math.nextafter(v, math.inf)


@dataclass(frozen=True)
class IndexBoundReport:
    bound: float
    pi_coefficient: Fraction
    provenance: str
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": 1,
            "bound": self.bound,
            "pi_coefficient": str(self.pi_coefficient),
            "provenance": self.provenance,
            "inputs": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.inputs.items()},
        }


# ---------------------------------------------------------------------------
# classical closed forms


def vallee_poussin_bound(n: int, C, length) -> float:
    """pi (n+1) (1 + 3 L C): index of a solution of an order-n equation with
    coefficients bounded by C along a segment of length L."""
    if C < 0 or length < 0:
        raise ValueError("C and length must be nonnegative")
    coef = Fraction(n + 1) * (1 + 3 * Fraction(length) * Fraction(C))
    return _pi_value(coef)


def _small_arc_coef(n: int, C) -> Fraction:
    return Fraction(n + 1) * (1 + 6 * PI_UP * Fraction(C))


def small_arc_bound(n: int, C) -> float:
    """pi (n+1) (1 + 6 pi C): index along circular arcs of angular length
    below a full turn around a simple pole with Euler-form coefficients
    bounded by C."""
    if C < 0:
        raise ValueError("C must be nonnegative")
    return _pi_value(_small_arc_coef(n, C))


def petrov_bound(k: int) -> float:
    """pi (k+1): index along a real segment where Im f has k isolated zeros."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return _pi_value(Fraction(k + 1))


def quasipolynomial_zero_bound(d: int, r) -> int:
    """4r + d - 1 zeros for degree <= d and real spectrum within [-r, r].

    The caller must check the real-spectrum hypothesis (SpectrumNotReal);
    with non-real exponents the count is genuinely unbounded near 0.
    """
    if d < 1 or r < 0:
        raise ValueError("need d >= 1 and r >= 0")
    return int(math.ceil(4 * r + d - 1))


def triangulation_pieces_bound(m: int, d: int) -> int:
    """Pieces needed to cover a degree-d semialgebraic domain by triangles
    avoiding m marked points: ceil((d + 1/2) m (m+1) + 2)."""
    if m < 1 or d < 1:
        raise ValueError("need m, d >= 1")
    return int(math.ceil((Fraction(d) + Fraction(1, 2)) * m * (m + 1) + 2))


# ---------------------------------------------------------------------------
# expansion of D^l + a_1 D^(l-1) + ... in plain derivatives


def _dop_plain_expansion(ode: ScalarFuchsianODE):
    """Coefficients C_i(t) with sum_i C_i y^(i) = D^l y + sum a_k D^(l-k) y.

    Built from the recurrence c_{j,i} = delta (c_{j-1,i-1} + c_{j-1,i}');
    the leading coefficient is delta^l.
    """
    delta = ode.delta
    ell = ode.order
    # c[j][i]: coefficient of y^(i) in D^j y
    c = [{0: sc.POLY_ONE}]
    for j in range(1, ell + 1):
        prev = c[-1]
        cur: dict = {}
        for i, p in prev.items():
            cur[i + 1] = sc.poly_add(cur.get(i + 1, sc.POLY_ZERO), sc.poly_mul(delta, p))
            dp = sc.poly_diff(p)
            if dp:
                cur[i] = sc.poly_add(cur.get(i, sc.POLY_ZERO), sc.poly_mul(delta, dp))
        c.append(cur)
    total: dict = dict(c[ell])
    for k, a in enumerate(ode.coeffs, start=1):
        for i, p in c[ell - k].items():
            total[i] = sc.poly_add(total.get(i, sc.POLY_ZERO), sc.poly_mul(a, p))
    return total  # {derivative order i: polynomial}


def segment_index_bound(ode: ScalarFuchsianODE, gamma: PathSpec, s: int) -> IndexBoundReport:
    """Index bound for solutions along a segment at distance >= 1/s from the
    poles and from infinity.

    Expands the equation in plain derivatives, bounds each coefficient
    |a_tilde_k / delta^k| on the segment via |delta| >= s^(-m) and |t| <= s,
    and applies the Vallee-Poussin inequality.
    """
    if gamma.kind != "segment":
        raise ValueError("segment_index_bound needs a segment path")
    z0, z1 = gamma.vertices
    pts = [c.to_complex() for c in _poly_roots_hint(ode.delta)]
    dist = min(
        (_segment_point_distance(z0, z1, p) for p in pts), default=math.inf
    )
    dist = min(dist, 1.0 / max(abs(z0), abs(z1), 1e-300))
    if dist < 1.0 / s - 1e-12:
        raise SegmentTooClose(f"segment is {dist:.3g}-close to the poles; needs >= {1.0/s:.3g}")
    ell = ode.order
    m = ode.m
    total = _dop_plain_expansion(ode)
    sF = Fraction(s)
    C = Fraction(0)
    for i in range(ell):
        p = total.get(i, sc.POLY_ZERO)
        # |a~_k / delta^k| with k = ell - i: sup |p| <= height * s^deg, |delta^ell| >= s^(-m ell)
        k = ell - i
        hp = _poly_height_fraction(p)
        bound_i = hp * sF ** max(sc.poly_deg(p), 0) * sF ** (m * ell)
        C = max(C, bound_i)
    L = Fraction(math.nextafter(abs(z1 - z0), math.inf))
    coef = Fraction(ell + 1) * (1 + 3 * L * C)
    return IndexBoundReport(
        bound=_pi_value(coef),
        pi_coefficient=coef,
        provenance="vallee-poussin-segment",
        inputs={"order": ell, "m": m, "s": s, "C": float(C), "length": float(L)},
    )


def _poly_height_fraction(p) -> Fraction:
    total = Fraction(0)
    for c in p:
        a2 = c.abs2()
        v = Fraction(math.nextafter(math.sqrt(float(a2)), math.inf))
        if v * v < a2:
            v = Fraction(math.nextafter(float(v), math.inf))
        total += v
    return total


def _segment_point_distance(z0: complex, z1: complex, p: complex) -> float:
    d = z1 - z0
    L2 = (d * d.conjugate()).real
    if L2 == 0:
        return abs(p - z0)
    u = min(1.0, max(0.0, ((p - z0) * d.conjugate()).real / L2))
    return abs(p - (z0 + u * d))


def _poly_roots_hint(delta) -> list:
    """Roots of the exact monic polynomial, via the companion matrix."""
    deg = sc.poly_deg(delta)
    if deg <= 0:
        return []
    comp = np.zeros((deg, deg), dtype=complex)
    comp[1:, :-1] = np.eye(deg - 1)
    lead = delta[-1]
    for i in range(deg):
        comp[i, -1] = -(delta[i] / lead).to_complex()
    return [EC.of(complex(z)) for z in np.linalg.eigvals(comp)]


# ---------------------------------------------------------------------------
# the Euler-operator expansion at a singular point


def _dop_euler_values_at_zero(ode: ScalarFuchsianODE):
    """Values |a_check_i(0)| of the Euler-form coefficients at the origin.

    Requires delta(0) = 0 with delta/t nonzero at 0.  Writing D = (delta/t) E
    with E = t d/dt, the equation becomes E^l + sum a_check_i E^(l-i) after
    division by (delta/t)^l; the q-polynomials follow the recurrence
    q_{j,i} = dtilde (t q'_{j-1,i} + q_{j-1,i-1}).
    """
    delta = ode.delta
    if delta and not delta[0].is_zero():
        raise ValueError("Euler expansion needs a pole at the origin")
    dtilde = sc.poly_of(list(delta[1:]))  # delta / t
    d0 = dtilde[0] if dtilde else sc.EC_ZERO
    if d0.is_zero():
        raise ValueError("origin is a multiple root of delta")
    ell = ode.order
    q = [{0: sc.POLY_ONE}]
    t_poly = sc.poly_of([0, 1])
    for j in range(1, ell + 1):
        prev = q[-1]
        cur: dict = {}
        for i, p in prev.items():
            cur[i + 1] = sc.poly_add(cur.get(i + 1, sc.POLY_ZERO), sc.poly_mul(dtilde, p))
            dp = sc.poly_diff(p)
            if dp:
                cur[i] = sc.poly_add(
                    cur.get(i, sc.POLY_ZERO), sc.poly_mul(dtilde, sc.poly_mul(t_poly, dp))
                )
        q.append(cur)
    total: dict = dict(q[ell])
    for k, a in enumerate(ode.coeffs, start=1):
        for i, p in q[ell - k].items():
            total[i] = sc.poly_add(total.get(i, sc.POLY_ZERO), sc.poly_mul(a, p))
    lead = total.get(ell, sc.POLY_ZERO)
    vals = []
    d0l = sc.poly_eval(lead, sc.EC_ZERO)
    for i in range(ell):
        p = total.get(i, sc.POLY_ZERO)
        v = sc.poly_eval(p, sc.EC_ZERO) / d0l
        av = math.sqrt(float(v.abs2()))
        while Fraction(av) * Fraction(av) < v.abs2():
            av = math.nextafter(av, math.inf)
        vals.append(av)
    return vals  # |a_check_{ell-i}(0)| indexed by derivative order i


# ---------------------------------------------------------------------------
# circle bound around a singular point via the origin-preserving Moebius trick


def circle_index_bound(
    sys: SpecialSystem,
    j: int,
    s: int,
    p0: Optional[LinearFormPoly] = None,
) -> IndexBoundReport:
    """Index bound along small circles around the j-th singular point.

    The point is translated to the origin and, when the system carries a
    polynomial tail at infinity or other poles, the variable change
    z = t/(t-c) (origin-preserving, infinity to z = 1) is applied with c on
    the geometric grid +-2^-k; the first c keeping the transplanted Laurent
    tail of total norm <= 1 and every other pole inside 1/2 <= |z| <= 2 is
    accepted.  The transformed system is reduced to a scalar equation and
    the Euler-form coefficient bound feeds the small-arc inequality.

    The reported radius family: the bound covers images of z-circles
    |z| = eps for eps <= eps_max; these are small circles around the point
    (not centered at it).
    """
    fuch = sys.fuchsian
    if not sys.exact:
        raise ValueError("circle_index_bound needs exact system data")
    n = fuch.n
    if p0 is None:
        p0 = LinearFormPoly.constant([1] * n)
    tj = fuch.points[j]
    other = [p - tj for k, p in enumerate(fuch.points) if k != j]
    min_sep = min((math.sqrt(float(p.abs2())) for p in other), default=math.inf)
    if min_sep < 1.0 / s - 1e-12:
        raise ValueError(f"needs other poles >= 1/s = {1.0/s} away; found {min_sep:.3g}")

    # shift the polynomial tail: coefficients in u = t - tj
    shifted_poly = _shift_polypart(sys.polypart, tj)
    residues = list(fuch.residues)
    Aj = residues[j]

    if not other and not shifted_poly:
        # pure Euler case at the point: no transform needed
        P, delta = _assemble_p_delta([EC.of(0)], [Aj], {}, n, r_pole=0)
        ode, _ = reduce_to_scalar_from_pd(P, delta, p0)
        vals = _dop_euler_values_at_zero(ode)
        C = max(vals) if vals else 0.0
        coef = _small_arc_coef(ode.order, C)
        return IndexBoundReport(
            bound=_pi_value(coef),
            pi_coefficient=coef,
            provenance="small-arc-euler",
            inputs={"order": ode.order, "C": C, "c": None, "eps_max": 0.5, "point": str(tj.to_complex())},
        )

    r = sys.growth_exponent
    cand = []
    for k in range(1, 41):
        for sign in (1, -1):
            cand.append(EC.of(Fraction(sign, 2**k)))
    chosen = None
    for c in cand:
        cc = c.to_complex().real
        if abs(cc) >= min_sep / 2:
            continue
        # images of the other poles
        zs = []
        ok = True
        for u in other:
            den = u - c
            if den.is_zero():
                ok = False
                break
            z = u / den
            az = math.sqrt(float(z.abs2()))
            if not 0.5 - 1e-12 <= az <= 2.0 + 1e-12:
                ok = False
                break
            zs.append(z)
        if not ok:
            continue
        Bks = _laurent_at_one(shifted_poly, c, n)
        tail_norm = sum(sc.frobenius_norm_up(B) for B in Bks.values())
        if tail_norm <= 1.0 + 1e-12:
            chosen = (c, zs, Bks)
            break
    if chosen is None:
        raise NoAdmissibleC("no grid value of c met both displayed conditions")
    c, zs, Bks = chosen
    # A_inf residue at z = 1
    Ainf = sc.mat_zero(n)
    for A in residues:
        Ainf = sc.mat_add(Ainf, A)
    Ainf = sc.mat_neg(Ainf)
    points = [EC.of(0)] + zs
    mats = [Aj] + [residues[k] for k in range(len(residues)) if k != j]
    P, delta = _assemble_p_delta(points, mats, Bks, n, r_pole=r + 2, Ainf=Ainf)
    ode, _ = reduce_to_scalar_from_pd(P, delta, p0)
    vals = _dop_euler_values_at_zero(ode)
    C = max(vals) if vals else 0.0
    coef = _small_arc_coef(ode.order, C)
    return IndexBoundReport(
        bound=_pi_value(coef),
        pi_coefficient=coef,
        provenance="small-arc-moebius",
        inputs={
            "order": ode.order,
            "C": C,
            "c": float(c.to_complex().real),
            "eps_max": 0.25,
            "point": str(tj.to_complex()),
        },
    )


def _shift_polypart(polypart: MatrixPoly, tj: EC) -> list:
    """Coefficients of the tail re-expanded around u = t - tj (exact)."""
    coeffs = list(polypart.coeffs)
    if not coeffs:
        return []
    deg = len(coeffs) - 1
    n = polypart.n
    out = []
    for i in range(deg + 1):
        acc = sc.mat_zero(n)
        for k in range(i, deg + 1):
            w = EC.of(math.comb(k, i)) * _ec_pow(tj, k - i)
            acc = sc.mat_add(acc, sc.mat_scale(w, coeffs[k]))
        out.append(acc)
    return out


def _ec_pow(x: EC, k: int) -> EC:
    out = EC.of(1)
    for _ in range(k):
        out = out * x
    return out


def _laurent_at_one(shifted_poly: list, c: EC, n: int) -> dict:
    """Laurent coefficients B_k/(z-1)^k, k >= 2, of the transplanted tail.

    The 1-form u^p du becomes -c^(p+1) sum_i binom(p, i) (z-1)^(-i-2) dz, so
    each tail matrix contributes to the orders 2..p+2.
    """
    out: dict = {}
    for p, Mk in enumerate(shifted_poly):
        w0 = sc.mat_scale(EC.of(-1) * _ec_pow(c, p + 1), Mk)
        for i in range(p + 1):
            k = i + 2
            term = sc.mat_scale(EC.of(math.comb(p, i)), w0)
            out[k] = sc.mat_add(out[k], term) if k in out else term
    return out


def _assemble_p_delta(points: list, mats: list, Bks: dict, n: int, r_pole: int, Ainf=None):
    """Common-denominator data for sum A_j/(z-z_j) + Ainf/(z-1) + sum B_k/(z-1)^k."""
    one = EC.of(1)
    delta = sc.poly_from_roots(points)
    pole = sc.poly_from_roots([one] * r_pole) if r_pole else sc.POLY_ONE
    delta_full = sc.poly_mul(delta, pole)
    acc: dict = {}

    def add(poly, mat):
        for k, coef in enumerate(poly):
            if coef.is_zero():
                continue
            term = sc.mat_scale(coef, mat)
            acc[k] = sc.mat_add(acc[k], term) if k in acc else term

    for idx, (z, A) in enumerate(zip(points, mats)):
        cof = sc.poly_from_roots([p for i, p in enumerate(points) if i != idx])
        add(sc.poly_mul(cof, pole), A)
    if Ainf is not None and r_pole >= 1:
        cof = sc.poly_mul(sc.poly_from_roots(points), sc.poly_from_roots([one] * (r_pole - 1)))
        add(cof, Ainf)
    for k, B in Bks.items():
        cof = sc.poly_mul(sc.poly_from_roots(points), sc.poly_from_roots([one] * (r_pole - k)))
        add(cof, B)
    top = max(acc) if acc else -1
    coeffs = [acc.get(k, sc.mat_zero(n)) for k in range(top + 1)]
    return MatrixPoly.make(coeffs, n=n), delta_full


def reduce_to_scalar_from_pd(P: MatrixPoly, delta, p0: LinearFormPoly):
    """Chain reduction for an explicit common-denominator pair (P, delta)."""
    from .reduction import _membership_solve, find_syzygy, lie_derivative

    chain = [p0]
    for k in range(1, 65):
        nxt = lie_derivative(chain[-1], P, delta)
        cap = sc.poly_deg(delta) * k + max(q.degree for q in chain) + 1
        for D in (0, 1, cap):
            if D > cap:
                break
            if _membership_solve(chain, nxt, D) is not None:
                chain.append(nxt)
                coeffs = find_syzygy(chain)
                return ScalarFuchsianODE(delta, tuple(coeffs)), chain
        chain.append(nxt)
    raise RuntimeError("no stabilization for the transformed system")
