"""Randomized soundness suites: every implemented inequality vs. the oracle.

Each suite draws seeded random instances, computes the relevant quantity
numerically (index, zero count, monodromy, reconstruction error) and checks
it against the corresponding closed-form bound or exact identity.  The
suites are shared by the test suite and the `soundness-suite` CLI/endpoint;
with a fixed seed the emitted report is byte-identical across runs.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import analytic as an
from . import index_bounds as ib
from . import scalars as sc
from .bound_engine import distant_points_bound
from .core import FuchsianSystem, PathSpec, Quasipolynomial, SpecialSystem
from .errors import ResolutionExceeded
from .factorization import AnnulusSpec, birkhoff_factorize, isomonodromic_surgery
from .reduction import LinearFormPoly, build_chain, bound_chain_length, find_syzygy
from .transforms import simple_fold, verify_fold
from .scalars import EC

TOL_INDEX = 1e-6


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, salt]))


def _suite_record(name: str, trials: int, violations: int, worst: float, extra=None) -> dict:
    rec = {
        "name": name,
        "trials": trials,
        "violations": violations,
        "worst_margin": worst,
    }
    if extra:
        rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# quasipolynomials


def random_real_spectrum_qp(rng, d_max: int = 6, r_max: int = 3):
    """Random quasipolynomial with real spectrum in [-r, r] and degree <= d."""
    r = int(rng.integers(0, r_max + 1))
    d = int(rng.integers(1, d_max + 1))
    terms = []
    remaining = d
    while remaining > 0:
        block = int(rng.integers(1, min(remaining, 3) + 1))  # 1 + deg p
        lam = float(rng.uniform(-r, r))
        coeffs = rng.normal(size=block) + 1j * rng.normal(size=block)
        terms.append((lam, coeffs.tolist()))
        remaining -= block
    return Quasipolynomial.make(terms), d, r


def random_triangle_avoiding_origin(rng, spread=(0.3, 2.5)) -> PathSpec:
    """Triangle with 0 strictly outside, sized below its distance from 0."""
    for _ in range(200):
        rho = float(rng.uniform(*spread))
        phi = float(rng.uniform(0, 2 * math.pi))
        c = rho * complex(math.cos(phi), math.sin(phi))
        size = rho * float(rng.uniform(0.15, 0.55))
        vs = [c + size * complex(*rng.normal(size=2)) for _ in range(3)]
        try:
            tri = PathSpec.triangle(*vs)
        except ValueError:
            continue
        a, b, cc = tri.vertices
        if min(abs(a), abs(b), abs(cc)) < 0.08:
            continue
        if _point_in_triangle(0j, a, b, cc, margin=0.05 * rho):
            continue
        return tri
    raise RuntimeError("failed to sample a triangle avoiding the origin")


def _point_in_triangle(p, a, b, c, margin=0.0) -> bool:
    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    d1 = cross(b - a, p - a)
    d2 = cross(c - b, p - b)
    d3 = cross(a - c, p - c)
    inside = (d1 >= -margin) and (d2 >= -margin) and (d3 >= -margin)
    # triangle vertices are stored counterclockwise
    near_edge = min(
        an._seg_distance(a, b, p), an._seg_distance(b, c, p), an._seg_distance(c, a, p)
    ) < margin
    return inside or near_edge


def qp_triangle_function(qp: Quasipolynomial, tri: PathSpec):
    """Branch of the quasipolynomial continuous on the triangle.

    The logarithm branch is anchored at the centroid's principal argument
    with its cut along the opposite ray, which the sampled triangles
    (diameter below their distance to 0) never cross.
    """
    centroid = sum(tri.vertices) / 3
    ang0 = math.atan2(centroid.imag, centroid.real)
    rot = complex(math.cos(-ang0), math.sin(-ang0))

    def fn(ts):
        ts = np.asarray(ts, dtype=complex)
        ang = ang0 + np.angle(ts * rot)
        ln = np.log(np.abs(ts)) + 1j * ang
        out = np.zeros_like(ts)
        for lam, coeffs in qp.terms:
            p = np.zeros_like(ts)
            for ck in reversed(coeffs):
                p = p * ln + ck
            out = out + np.exp(lam * ln) * p
        return out

    return fn


def quasipolynomial_suite(seed: int, trials: int = 200, triangles_each: int = 20) -> dict:
    rng = _rng(seed, 1)
    violations = 0
    worst = -math.inf
    counted = 0
    for _ in range(trials):
        qp, d, r = random_real_spectrum_qp(rng)
        bound = ib.quasipolynomial_zero_bound(d, r)
        for _ in range(triangles_each):
            tri = random_triangle_avoiding_origin(rng)
            fn = qp_triangle_function(qp, tri)
            try:
                k = an.count_zeros(fn, tri)
            except an.BoundaryZeroUnresolved:
                continue
            counted += 1
            worst = max(worst, k - bound)
            if k > bound:
                violations += 1
    return _suite_record(
        "quasipolynomial-zero-bound", counted, violations, float(worst)
    )


def counterexample_witness(seed: int = 0) -> dict:
    """t^i + t^(-i) = 2 cos(ln t): zero counts near 0 break the 4r + d - 1
    bound that would apply if its (non-real) spectrum were real.

    The positive real zeros t_k = exp(-(k + 1/2) pi) accumulate
    geometrically at 0; a thin wedge with apex near 0 straddling the
    positive axis captures as many as desired.
    """
    qp = Quasipolynomial.make([(1j, [1.0]), (-1j, [1.0])])
    nominal = ib.quasipolynomial_zero_bound(2, 1)  # d = 2, r = 1 -> 5
    best = 0
    for K in (10, 14):
        tiny = math.exp(-K * math.pi)
        hi = math.exp(-1.2 * math.pi)
        h = 0.35 * hi
        v1 = complex(tiny, -0.5 * tiny)
        v2 = complex(hi, -h)
        v3 = complex(0.8 * hi, h)
        tri = PathSpec.triangle(v1, v2, v3)
        a, b, c = tri.vertices  # counterclockwise
        # log-spaced vertices along the edges touching the apex resolve the
        # geometrically compressed windings near 0
        def edge(p, q, npts):
            lo = max(min(abs(p), abs(q)) / max(abs(p), abs(q)) * 0.5, 1e-15)
            g = np.geomspace(lo, 1.0, npts - 1)
            if abs(p) > abs(q):
                u = np.concatenate([1.0 - g[::-1], [1.0]])
            else:
                u = np.concatenate([[0.0], g])
            return [p + (q - p) * float(uu) for uu in u]

        boundary = edge(a, b, 120)[:-1] + edge(b, c, 40)[:-1] + edge(c, a, 120)
        poly = PathSpec.polyline(boundary)
        fn = qp_triangle_function(qp, tri)
        try:
            idx = an.index_along(fn, poly)
        except Exception:
            continue
        k = int(round(idx / (2 * math.pi)))
        best = max(best, k)
        if best > nominal:
            break
    return {
        "name": "counterexample-nonreal-spectrum",
        "nominal_bound": nominal,
        "observed_zeros": best,
        "exceeds": best > nominal,
    }


# ---------------------------------------------------------------------------
# Vallee-Poussin / small arcs / Petrov


def _integrate_scalar_ode(coeff_fns, n: int, z0: complex, z1: complex, y0, tol=1e-11):
    """Solve y^(n) + sum a_k y^(n-k) = 0 along [z0, z1]; returns dense w(s)."""
    dz = z1 - z0

    def rhs(s, w):
        t = z0 + s * dz
        out = np.empty_like(w)
        out[:-1] = w[1:]
        acc = 0j
        for k in range(1, n + 1):
            acc -= coeff_fns[k - 1](t) * w[n - k]
        out[-1] = acc
        return out * dz

    res = solve_ivp(rhs, (0.0, 1.0), np.asarray(y0, dtype=complex), method="DOP853",
                    rtol=tol, atol=tol, dense_output=True)
    if not res.success:
        raise RuntimeError("scalar ODE integration failed")
    return res.sol


def vallee_poussin_suite(seed: int, trials: int = 100) -> dict:
    rng = _rng(seed, 2)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(1, 5))
        C = float(rng.uniform(0.2, 2.0))
        L = float(rng.uniform(0.3, 2.0))
        z0 = complex(*rng.normal(size=2))
        phi = float(rng.uniform(0, 2 * math.pi))
        z1 = z0 + L * complex(math.cos(phi), math.sin(phi))
        coeff_fns = []
        for _k in range(n):
            c = rng.normal(size=3) + 1j * rng.normal(size=3)
            mid = (z0 + z1) / 2
            ss = np.linspace(0, 1, 41)
            ts = z0 + ss * (z1 - z0)
            vals = c[0] + c[1] * (ts - mid) + c[2] * (ts - mid) ** 2
            scale = C * float(rng.uniform(0.3, 1.0)) / max(float(np.max(np.abs(vals))), 1e-12)
            coeff_fns.append(lambda t, c=c, mid=mid, scale=scale: scale * (c[0] + c[1] * (t - mid) + c[2] * (t - mid) ** 2))
        y0 = rng.normal(size=n) + 1j * rng.normal(size=n)
        sol = _integrate_scalar_ode(coeff_fns, n, z0, z1, y0)
        f = an.PathFunction(lambda s, sol=sol: np.asarray(sol(np.atleast_1d(s)))[0], None, True)
        try:
            idx = an.index_along(f, None)
        except ResolutionExceeded:
            continue
        bound = ib.vallee_poussin_bound(n, C, L) + TOL_INDEX
        worst = max(worst, abs(idx) - bound)
        if abs(idx) > bound:
            violations += 1
    return _suite_record("vallee-poussin", trials, violations, float(worst))


def small_arc_suite(seed: int, trials: int = 100) -> dict:
    """Euler-operator equations at 0, integrated in the logarithmic chart."""
    rng = _rng(seed, 3)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        C = float(rng.uniform(0.2, 2.0))
        # analytic coefficients a_k(t) = c0 + c1 t with |a_k| <= C for |t| <= eps0
        eps0 = 0.5
        cs = []
        for _k in range(n):
            c0 = C * float(rng.uniform(0.2, 0.9)) * np.exp(1j * rng.uniform(0, 2 * math.pi))
            c1 = (C - abs(c0)) / eps0 * float(rng.uniform(0.1, 0.9)) * np.exp(1j * rng.uniform(0, 2 * math.pi))
            cs.append((c0, c1))
        eps = eps0 * float(rng.choice([1.0, 0.25, 0.0625]))
        span = float(rng.uniform(0.5, 1.0)) * 2 * math.pi * 0.999
        th0 = float(rng.uniform(0, 2 * math.pi))
        # tau = ln t on the arc: vertical segment [ln eps + i th0, ln eps + i (th0 + span)]
        tau0 = complex(math.log(eps), th0)
        tau1 = complex(math.log(eps), th0 + span)
        coeff_fns = [
            (lambda tau, c0=c0, c1=c1: c0 + c1 * np.exp(tau)) for c0, c1 in cs
        ]
        y0 = rng.normal(size=n) + 1j * rng.normal(size=n)
        sol = _integrate_scalar_ode(coeff_fns, n, tau0, tau1, y0)
        f = an.PathFunction(lambda s, sol=sol: np.asarray(sol(np.atleast_1d(s)))[0], None, True)
        try:
            idx = an.index_along(f, None)
        except ResolutionExceeded:
            continue
        bound = ib.small_arc_bound(n, C) + TOL_INDEX
        worst = max(worst, abs(idx) - bound)
        if abs(idx) > bound:
            violations += 1
    return _suite_record("small-arc", trials, violations, float(worst))


def petrov_suite(seed: int, trials: int = 100) -> dict:
    rng = _rng(seed, 4)
    violations = 0
    worst = -math.inf
    done = 0
    for _ in range(trials):
        a = float(rng.uniform(-2, 0))
        b = a + float(rng.uniform(0.5, 3.0))
        w = float(rng.uniform(0.3, 4.0))
        c0 = complex(*rng.normal(size=2))
        c1 = complex(*rng.normal(size=2))
        shift = complex(*rng.normal(size=2)) * 0.2

        def f(ts, w=w, c0=c0, c1=c1, shift=shift):
            ts = np.asarray(ts, dtype=complex)
            return np.exp(1j * w * ts) * (c0 + c1 * ts / 4) + shift

        ts = np.linspace(a, b, 4001)
        vals = f(ts)
        if float(np.min(np.abs(vals))) < 1e-3 * float(np.max(np.abs(vals))):
            continue  # f must be nonvanishing on sigma
        im = vals.imag
        scale = float(np.max(np.abs(im))) or 1.0
        sign = np.sign(im)
        k = int(np.sum(sign[:-1] * sign[1:] < 0))
        try:
            idx = an.index_along(f, PathSpec.segment(a, b))
        except ResolutionExceeded:
            continue
        done += 1
        bound = ib.petrov_bound(k) + TOL_INDEX
        worst = max(worst, abs(idx) - bound)
        if abs(idx) > bound:
            violations += 1
    return _suite_record("petrov", done, violations, float(worst))


# ---------------------------------------------------------------------------
# folding


def _random_rational(rng, scale=2, den=8) -> Fraction:
    return Fraction(int(rng.integers(-scale * den, scale * den + 1)), den)


def random_fold_admissible_system(rng, n_max: int = 2, m_max: int = 3) -> FuchsianSystem:
    """Exact system with residues summing to zero and points away from 0."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(2, m_max + 1))
    pts = []
    while len(pts) < m:
        p = EC(_random_rational(rng), _random_rational(rng))
        a2 = float(p.abs2())
        if 0.25 <= a2 <= 9 and all(not (p - q).is_zero() for q in pts):
            pts.append(p)
    mats = []
    for _ in range(m - 1):
        mats.append(
            tuple(
                tuple(EC(_random_rational(rng, 1), _random_rational(rng, 1)) for _ in range(n))
                for _ in range(n)
            )
        )
    last = sc.mat_zero(n)
    for A in mats:
        last = sc.mat_add(last, A)
    mats.append(sc.mat_neg(last))
    return FuchsianSystem.make(pts, mats)


def _fold_formula_value(sys: FuchsianSystem, z: EC):
    """Exact value of the doubled coefficient matrix from the even/odd parts."""
    n = sys.n
    Aplus = sc.mat_zero(n)
    Aminus = sc.mat_zero(n)
    for tj, Aj in zip(sys.points, sys.residues):
        zj = tj * tj
        w = EC.of(1) / (z - zj)
        Aplus = sc.mat_add(Aplus, sc.mat_scale(tj * w, Aj))
        Aminus = sc.mat_add(Aminus, sc.mat_scale(w, Aj))
    half = EC.of(Fraction(1, 2))
    zinv = EC.of(1) / z
    tl = sc.mat_scale(half, Aminus)
    tr = sc.mat_scale(half * zinv, Aplus)
    bl = sc.mat_scale(half, Aplus)
    br = sc.mat_add(sc.mat_scale(half, Aminus), sc.mat_scale(half * zinv, sc.mat_eye(n)))
    rows = []
    for i in range(n):
        rows.append(tuple(tl[i]) + tuple(tr[i]))
    for i in range(n):
        rows.append(tuple(bl[i]) + tuple(br[i]))
    return tuple(rows)


def _folded_eval_exact(folded: FuchsianSystem, z: EC):
    n2 = folded.n
    acc = sc.mat_zero(n2)
    for zj, Bj in zip(folded.points, folded.residues):
        acc = sc.mat_add(acc, sc.mat_scale(EC.of(1) / (z - zj), Bj))
    return acc


def fold_suite(seed: int, trials: int = 50, tol: float = 1e-8) -> dict:
    rng = _rng(seed, 5)
    violations = 0
    worst = -math.inf
    exact_fail = 0
    for _ in range(trials):
        sys = random_fold_admissible_system(rng)
        folded = simple_fold(sys)
        # residue formulas match the exact partial fractions: compare the
        # folded system against the even/odd block formula at rational z
        for _k in range(3):
            z = EC(_random_rational(rng, 3, 7), _random_rational(rng, 3, 7))
            if any((z - zj).is_zero() for zj in folded.points) or z.is_zero():
                continue
            lhs = _folded_eval_exact(folded, z)
            rhs = _fold_formula_value(sys, z)
            if any(
                not (a - b).is_zero() for ra, rb in zip(lhs, rhs) for a, b in zip(ra, rb)
            ):
                exact_fail += 1
                break
        ok = verify_fold(sys, folded, tol=tol)
        if not ok:
            violations += 1
    return _suite_record(
        "fold-verification", trials, violations + exact_fail, float(worst),
        {"exact_residue_mismatches": exact_fail},
    )


def random_real_eigen_system(rng, n: int = 2, m_max: int = 3) -> FuchsianSystem:
    """Floating system, complex points, real-symmetric residues summing to zero."""
    m = int(rng.integers(2, m_max + 1))
    pts = []
    while len(pts) < m:
        p = complex(*rng.uniform(-2, 2, size=2))
        if abs(p) > 0.4 and all(abs(p - q) > 0.3 for q in pts):
            pts.append(p)
    mats = []
    for _ in range(m - 1):
        A = rng.normal(size=(n, n)) * 0.4
        mats.append((A + A.T) / 2)
    mats.append(-sum(mats))
    return FuchsianSystem.make(pts, [m.tolist() for m in mats])


def fold_monodromy_suite(seed: int, trials: int = 20, tol: float = 1e-6) -> dict:
    rng = _rng(seed, 6)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        sys = random_real_eigen_system(rng)
        folded = simple_fold(sys)
        pts = folded.np_points()
        for j, p in enumerate(pts):
            others = np.delete(pts, j)
            rad = 0.4 * float(np.min(np.abs(others - p))) if len(others) else 0.3
            M = an.monodromy(folded, PathSpec.circle(p, rad), tol=1e-11)
            dev = float(np.max(np.abs(np.abs(M.eigenvalues) - 1.0)))
            worst = max(worst, dev - tol)
            if dev > tol:
                violations += 1
    return _suite_record("fold-monodromy-preservation", trials, violations, float(worst))


def euler_monodromy_suite(seed: int, trials: int = 20, tol: float = 1e-8) -> dict:
    rng = _rng(seed, 7)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        norm = np.linalg.norm(A, 2)
        A *= rng.uniform(0.2, 2.0) / norm
        sys = FuchsianSystem.make([0.0], [A.tolist()])
        M = an.monodromy(sys, PathSpec.circle(0.0, float(rng.uniform(0.5, 2.0))), tol=1e-12)
        target = expm(2j * math.pi * A)
        dev = float(np.max(np.abs(M.matrix - target)))
        worst = max(worst, dev - tol)
        if dev > tol:
            violations += 1
    return _suite_record("euler-monodromy", trials, violations, float(worst))


# ---------------------------------------------------------------------------
# reduction


def random_exact_system(rng, n: int, m: int, scale_den: int = 4) -> FuchsianSystem:
    pts = []
    vals = rng.permutation(np.arange(-3, 4))
    for v in vals:
        if len(pts) == m:
            break
        pts.append(EC(Fraction(int(v), 2)))
    mats = []
    for _ in range(m):
        mats.append(
            tuple(
                tuple(
                    EC(Fraction(int(rng.integers(-2, 3)), scale_den))
                    for _ in range(n)
                )
                for _ in range(n)
            )
        )
    return FuchsianSystem.make(pts, mats)


def reduction_annihilation_residual(sys: FuchsianSystem, chain, interval=None, nodes: int = 48) -> float:
    """Numerical check that successive chain forms are D-derivatives along
    the flow: max over k of |D(p_k(t, x(t))) - p_{k+1}(t, x(t))|, with the
    derivative taken spectrally on a Chebyshev grid.
    """
    pts = sys.np_points()
    if interval is None:
        hi = float(np.max(pts.real)) if len(pts) else 0.0
        interval = (hi + 0.75, hi + 2.25)
    a, b = interval
    xs_nodes = an.cheb_nodes(a, b, nodes)
    D = an.cheb_diff_matrix(a, b, nodes)
    sol = an.solution_on_path(sys.as_float(), PathSpec.segment(a, b), tol=1e-12)
    # Chebyshev nodes sorted descending; path parameter s maps t = a + (b-a)s
    svals = (xs_nodes - a) / (b - a)
    Xs = sol(svals)
    x0 = np.ones(sys.n, dtype=complex)
    xvec = Xs @ x0
    from .core import common_denominator_form

    P, delta = common_denominator_form(sys)
    deltav = np.array([sc.poly_eval_complex(delta, t) for t in xs_nodes])
    worst = 0.0
    for k in range(len(chain) - 1):
        u = chain[k].evaluate_many(xs_nodes.astype(complex), xvec)
        u1 = chain[k + 1].evaluate_many(xs_nodes.astype(complex), xvec)
        Du = deltav * (D @ u)
        scale = max(float(np.max(np.abs(u1))), 1.0)
        trim = slice(2, -2)  # spectral differentiation is worst at the edges
        worst = max(worst, float(np.max(np.abs(Du[trim] - u1[trim]))) / scale)
    return worst


def reduction_suite(seed: int, trials: int = 30, tol: float = 1e-8) -> dict:
    rng = _rng(seed, 8)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        sys = random_exact_system(rng, n, m)
        w = [Fraction(int(rng.integers(-2, 3)), 2) for _ in range(n)]
        if all(x == 0 for x in w):
            w[0] = Fraction(1)
        p0 = LinearFormPoly.constant(w)
        chain = build_chain(p0, sys)
        ell = len(chain) - 1
        find_syzygy(chain)  # raises on exact-verification failure
        resid = reduction_annihilation_residual(sys, chain)
        budget = bound_chain_length(n, m).eval()
        ok = resid <= tol and ell <= budget
        worst = max(worst, resid - tol)
        if not ok:
            violations += 1
    return _suite_record("reduction-annihilation", trials, violations, float(worst))


# ---------------------------------------------------------------------------
# factorization


def random_factorable(rng, real: bool, with_outer_zero: bool):
    n = 2
    ann = AnnulusSpec.make(1.0, 2.0, q=3)

    def rmat(scale):
        M = rng.normal(size=(n, n)) * scale
        if not real:
            M = M + 1j * rng.normal(size=(n, n)) * scale
        return M

    Fc = [np.eye(n)] + [rmat(0.15 / 3**k) for k in range(1, 3)]
    Gc = {0: np.eye(n) + rmat(0.1)}
    for k in range(1, 3):
        Gc[-k] = rmat(0.2 / 2**k)
    if with_outer_zero:
        z0 = float(rng.uniform(2.4, 3.5))
        if real and rng.uniform() < 0.5:
            # (0,0) entry 1 - 2 z0/t + (z0^2 + zi^2)/t^2: conjugate root pair
            zi = float(rng.uniform(0.5, 1.2))
            Gc[0][0, 0] = 1.0
            Gc[-1][0, 0] = -2 * z0
            Gc[-2][0, 0] = z0**2 + zi**2
        else:
            # (0,0) entry 1 - z0/t: a single outer determinant zero near z0
            Gc[0][0, 0] = 1.0
            Gc[-1][0, 0] = -z0

    def F0(t):
        return sum(c * t**k for k, c in enumerate(Fc))

    def G0(t):
        return sum(c * t**kk for kk, c in Gc.items())

    return (lambda t: F0(t) @ G0(t)), ann


def factorization_suite(seed: int, trials: int = 30, tol: float = 1e-8) -> dict:
    rng = _rng(seed, 9)
    violations = 0
    worst = -math.inf
    real_worst = 0.0
    decay_fail = 0
    winding_fail = 0
    for k in range(trials):
        real = bool(rng.uniform() < 0.5)
        with_zero = bool(rng.uniform() < 0.4)
        H, ann = random_factorable(rng, real, with_zero)
        try:
            res = birkhoff_factorize(H, ann)
        except Exception:
            violations += 1
            continue
        worst = max(worst, res.residual - tol)
        if res.residual > tol:
            violations += 1
        # quadratic decay of the Newton residuals
        from .boundexpr import _newton_threshold

        Lq = _newton_threshold(ann.q)
        rs = res.newton_residuals
        for r0, r1 in zip(rs, rs[1:]):
            if r1 > max(5 * Lq * r0 * r0, 1e-13):
                decay_fail += 1
                break
        if real:
            dev = 0.0
            for t in (1.3, -1.7, 1.9):
                dev = max(dev, float(np.max(np.abs(res.eval_F(t).imag))))
                dev = max(dev, float(np.max(np.abs(res.eval_G_composite(t).imag))))
            real_worst = max(real_worst, dev)
            if dev > 1e-10:
                violations += 1
        # argument-principle zero counts: det F inside, det (QG) outside
        try:
            fd = lambda ts: np.linalg.det(res.eval_F(np.asarray(ts)))
            wf = an.index_along(fd, PathSpec.circle(ann.center, res.radii[2])) / (2 * math.pi)
            gd = lambda ts: np.linalg.det(res.eval_G_composite(np.asarray(ts)))
            RX = max(6.0, *(1.7 * abs(z) for z in res.expelled)) if res.expelled else 6.0
            w_in = an.index_along(gd, PathSpec.circle(ann.center, res.radii[0] * 1.001)) / (2 * math.pi)
            w_out = an.index_along(gd, PathSpec.circle(ann.center, RX)) / (2 * math.pi)
            if abs(wf) > 0.25 or abs(w_out - w_in) > 0.25:
                winding_fail += 1
        except ResolutionExceeded:
            winding_fail += 1
    return _suite_record(
        "birkhoff-factorization", trials, violations + decay_fail + winding_fail,
        float(worst), {"real_symmetry_worst": real_worst, "decay_failures": decay_fail,
                       "winding_failures": winding_fail},
    )


def surgery_suite(seed: int, trials: int = 10, tol: float = 1e-6) -> dict:
    rng = _rng(seed, 10)
    violations = 0
    worst = -math.inf
    for _ in range(trials):
        gap = float(rng.uniform(0.75, 1.0))
        a = 0.33 * gap
        b = 0.66 * gap
        def sym():
            A = rng.normal(size=(2, 2)) * 0.35
            return (A + A.T) / 2
        sys = SpecialSystem.make([0.0, gap], [sym().tolist(), sym().tolist()], None, 2)
        ann = AnnulusSpec.make(a, b, center=0.0)
        out, report = isomonodromic_surgery(sys, ann, tol=1e-10)
        pts = out.fuchsian.np_points()
        if len(pts) != 1 or abs(pts[0]) > 1e-8:
            violations += 1
            continue
        for k in range(5):
            rad = float(rng.uniform(0.05, 0.9)) * a
            loop = PathSpec.circle(0.0, rad)
            e_old = np.linalg.eigvals(an.monodromy(sys, loop, tol=1e-11).matrix)
            e_new = np.linalg.eigvals(an.monodromy(out, loop, tol=1e-11).matrix)
            dev = _eigen_multiset_distance(e_old, e_new)
            worst = max(worst, dev - tol)
            if dev > tol:
                violations += 1
                break
    return _suite_record("isomonodromic-surgery", trials, violations, float(worst))


def _eigen_multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = list(a)
    b = list(b)
    worst = 0.0
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b[j]))
        b.pop(j)
    return float(worst)


# ---------------------------------------------------------------------------
# distant-points certificates


def certificate_suite(seed: int, functions: int = 50, triangles: int = 20) -> dict:
    """Zero counts of degree-1 elements vs. the distant-points certificate."""
    rng = _rng(seed, 11)
    violations = 0
    observed_max = 0
    results = []
    for m, pts in ((2, [0.0, 1.0]), (3, [0.0, 1.0, -1.0])):
        n = 2
        mats = []
        for _ in range(m):
            A = rng.normal(size=(n, n)) * 0.3
            mats.append(((A + A.T) / 2).tolist())
        sys = FuchsianSystem.make(pts, mats)
        r = int(math.ceil(sum(np.linalg.norm(np.array(M), 2) for M in mats)
                          + np.linalg.norm(sum(np.array(M) for M in mats), 2)))
        cert = distant_points_bound(1, n, m, max(r, 1), 1, points=pts)
        budget = cert.evaluate()
        weights = [rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(functions)]
        counted = 0
        for _ in range(triangles):
            tri = _triangle_avoiding(rng, pts)
            sol = an.solution_on_path(sys, tri, tol=1e-11)
            for W in weights:
                f = an.linear_form_on_path(sol, W)
                try:
                    idx = an.index_along(f, None)
                except ResolutionExceeded:
                    continue
                k = max(int(round(idx / (2 * math.pi))), 0)
                counted += 1
                observed_max = max(observed_max, k)
                if k > budget:
                    violations += 1
        results.append({"m": m, "budget_bits": budget.bit_length(), "counted": counted})
    return _suite_record(
        "distant-certificate", len(results), violations, float(observed_max),
        {"systems": results},
    )


def _triangle_avoiding(rng, pts, margin: float = 0.15) -> PathSpec:
    for _ in range(300):
        c = complex(*rng.uniform(-2, 2, size=2))
        size = float(rng.uniform(0.2, 0.8))
        vs = [c + size * complex(*rng.normal(size=2)) for _ in range(3)]
        try:
            tri = PathSpec.triangle(*vs)
        except ValueError:
            continue
        a, b, cc = tri.vertices
        ok = True
        for p in pts:
            p = complex(p)
            if _point_in_triangle(p, a, b, cc, margin=margin) or min(
                an._seg_distance(a, b, p), an._seg_distance(b, cc, p), an._seg_distance(cc, a, p)
            ) < margin:
                ok = False
                break
        if ok:
            return tri
    raise RuntimeError("failed to sample a triangle avoiding the singular points")


# ---------------------------------------------------------------------------
# the full report


SUITES: dict[str, Callable] = {
    "quasipolynomial": quasipolynomial_suite,
    "vallee-poussin": vallee_poussin_suite,
    "small-arc": small_arc_suite,
    "petrov": petrov_suite,
    "fold": fold_suite,
    "fold-monodromy": fold_monodromy_suite,
    "euler-monodromy": euler_monodromy_suite,
    "reduction": reduction_suite,
    "factorization": factorization_suite,
    "surgery": surgery_suite,
    "certificate": certificate_suite,
}

_DEFAULT_TRIALS = {
    "quasipolynomial": 200,
    "vallee-poussin": 100,
    "small-arc": 100,
    "petrov": 100,
    "fold": 50,
    "fold-monodromy": 20,
    "euler-monodromy": 20,
    "reduction": 30,
    "factorization": 30,
    "surgery": 10,
    "certificate": 50,
}


def run_soundness_suite(
    seed: int = 42,
    trials: Optional[int] = None,
    which: Optional[list[str]] = None,
) -> dict:
    """Run the selected suites and return a deterministic JSON-able report."""
    names = which or list(SUITES)
    workers = int(os.environ.get("FUCHSIA_COUNT_THREADS", "1") or 1)
    jobs = []
    for name in names:
        fn = SUITES[name]
        t = trials if trials is not None else _DEFAULT_TRIALS[name]
        jobs.append((name, fn, t))

    def run(job):
        name, fn, t = job
        if name == "certificate":
            return fn(seed, functions=t)
        return fn(seed, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    suites = {name: rec for (name, _, _), rec in zip(jobs, results)}
    if which is None:
        suites["counterexample"] = counterexample_witness(seed)
    total = sum(rec.get("violations", 0) for rec in suites.values())
    return {
        "format": 1,
        "seed": seed,
        "total_violations": total,
        "suites": suites,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)
