"""Reduction of linear systems to scalar equations via iterated Lie derivatives.

A linear form p0 in the unknowns, differentiated repeatedly along the
polynomial vector field delta(t) d/dt + P(t) x d/dx (the common-denominator
form of the system), produces a chain of linear forms with polynomial
coefficients.  The chain stabilizes: the first form lying in the module
generated by its predecessors yields, by an exact bounded-degree linear
solve, univariate polynomials a_i with

    p_l + a_1 p_{l-1} + ... + a_l p_0 = 0,

i.e. y = p0(t, x(t)) satisfies D^l y + a_1 D^{l-1} y + ... + a_l y = 0 with
D = delta(t) d/dt.  All arithmetic is exact over Q(i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import scalars as sc
from .boundexpr import BoundExpr, chain_height_expr, chain_length_expr
from .core import AnySystem, FuchsianSystem, MatrixPoly, SpecialSystem, common_denominator_form
from .errors import ChainLimitExceeded, DimensionMismatch, NoSyzygyAtDegree
from .scalars import EC


@dataclass(frozen=True)
class LinearFormPoly:
    """p(t, x) = sum_j c_j(t) x_j with exact univariate polynomial coefficients."""

    coeffs: tuple  # tuple of n exact polynomials (ascending coefficient tuples)

    @staticmethod
    def make(coeffs: Sequence) -> "LinearFormPoly":
        return LinearFormPoly(tuple(sc.poly_of(c) if not isinstance(c, tuple) else c for c in coeffs))

    @staticmethod
    def coordinate(n: int, j: int) -> "LinearFormPoly":
        return LinearFormPoly.make([[1] if i == j else [] for i in range(n)])

    @staticmethod
    def constant(weights: Sequence) -> "LinearFormPoly":
        return LinearFormPoly.make([[w] for w in weights])

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def degree(self) -> int:
        return max((sc.poly_deg(c) for c in self.coeffs), default=-1)

    def is_zero(self) -> bool:
        return all(len(c) == 0 for c in self.coeffs)

    def evaluate(self, t: complex, x: np.ndarray) -> complex:
        return complex(
            sum(sc.poly_eval_complex(c, t) * complex(x[j]) for j, c in enumerate(self.coeffs))
        )

    def evaluate_many(self, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        out = np.zeros(len(ts), dtype=complex)
        for j, c in enumerate(self.coeffs):
            if c:
                vals = np.zeros(len(ts), dtype=complex)
                for ck in reversed(c):
                    vals = vals * ts + ck.to_complex()
                out += vals * xs[:, j]
        return out


@dataclass(frozen=True)
class ScalarFuchsianODE:
    """D^l y + a_1 D^{l-1} y + ... + a_l y = 0, D = delta(t) d/dt."""

    delta: tuple  # exact monic polynomial with the singular points as roots
    coeffs: tuple  # (a_1, ..., a_l), exact polynomials

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def m(self) -> int:
        return sc.poly_deg(self.delta)

    def coefficient_height(self) -> float:
        return max((sc.poly_height_up(a) for a in self.coeffs), default=0.0)

    def coefficient_degree(self) -> int:
        return max((sc.poly_deg(a) for a in self.coeffs), default=-1)

    def to_json(self) -> dict:
        return {
            "format": 1,
            "delta": sc.poly_to_json(self.delta),
            "coeffs": [sc.poly_to_json(a) for a in self.coeffs],
        }

    @staticmethod
    def from_json(doc: dict) -> "ScalarFuchsianODE":
        return ScalarFuchsianODE(
            sc.poly_from_json(doc["delta"]),
            tuple(sc.poly_from_json(a) for a in doc["coeffs"]),
        )


# ---------------------------------------------------------------------------


def lie_derivative(p: LinearFormPoly, P: MatrixPoly, delta) -> LinearFormPoly:
    """delta * dp/dt + sum_jk (dp/dx_j) P_jk x_k, exactly."""
    if not P.exact:
        raise ValueError("lie_derivative needs exact matrix data")
    n = p.n
    if P.n != n:
        raise DimensionMismatch(f"form has {n} variables, system is {P.n}-dimensional")
    out = []
    for k in range(n):
        term = sc.poly_mul(delta, sc.poly_diff(p.coeffs[k]))
        for j in range(n):
            # entry (j, k) of the matrix polynomial
            pjk = sc.poly_of([P.coeffs[d][j][k] for d in range(len(P.coeffs))])
            term = sc.poly_add(term, sc.poly_mul(p.coeffs[j], pjk))
        out.append(term)
    return LinearFormPoly(tuple(out))


def _membership_solve(chain: list[LinearFormPoly], target: LinearFormPoly, D: int):
    """Solve target = sum_i b_i(t) chain[i] with deg b_i <= D, or None.

    Equations match the coefficient of t^e x_j for every e, j; unknowns are
    the D+1 coefficients of each b_i.
    """
    n = target.n
    k = len(chain)
    if k == 0:
        return None
    max_deg = max([target.degree] + [q.degree for q in chain]) + D + 1
    rows = []
    rhs = []
    for j in range(n):
        for e in range(max_deg + 1):
            row = []
            for q in chain:
                cj = q.coeffs[j]
                for d in range(D + 1):
                    idx = e - d
                    row.append(cj[idx] if 0 <= idx < len(cj) else sc.EC_ZERO)
            tc = target.coeffs[j]
            rhs.append(tc[e] if e < len(tc) else sc.EC_ZERO)
            rows.append(row)
    sol = sc.solve_linear_system(rows, rhs)
    if sol is None:
        return None
    out = []
    for i in range(k):
        out.append(sc.poly_trim(sol[i * (D + 1) : (i + 1) * (D + 1)]))
    return out


def build_chain(p0: LinearFormPoly, sys: AnySystem, max_len: int = 64) -> list[LinearFormPoly]:
    """Iterated Lie derivatives p_0, p_1, ..., stopping at stabilization.

    The chain stops at the first index l where p_l lies in the module over
    exact-rational polynomials generated by p_0 .. p_{l-1}; membership is a
    bounded-degree exact linear solve with the degree cap raised along the
    chain.  ChainLimitExceeded if no stabilization within max_len steps.
    """
    if p0.is_zero():
        raise ValueError("chain must start from a nonzero form")
    P, delta = common_denominator_form(sys)
    chain = [p0]
    for k in range(1, max_len + 1):
        nxt = lie_derivative(chain[-1], P, delta)
        cap = sc.poly_deg(delta) * k + max(q.degree for q in chain) + 1
        # membership is monotone in the degree cap: probe cheap degrees, then
        # decide at the cap
        for D in (0, 1, cap):
            if D > cap:
                break
            if _membership_solve(chain, nxt, D) is not None:
                chain.append(nxt)
                return chain
        chain.append(nxt)
    raise ChainLimitExceeded(f"no module stabilization within {max_len} Lie derivatives")


def find_syzygy(chain: Sequence[LinearFormPoly], degree_cap: Optional[int] = None) -> list:
    """Polynomials a_1..a_l with p_l + a_1 p_{l-1} + ... + a_l p_0 = 0 exactly.

    Solves the bounded-degree exact linear system and verifies the identity
    by expansion; the degree cap is raised geometrically on failure.
    """
    chain = list(chain)
    ell = len(chain) - 1
    if ell < 1:
        raise NoSyzygyAtDegree("chain too short")
    target = LinearFormPoly(tuple(sc.poly_scale(EC.of(-1), c) for c in chain[ell].coeffs))
    base = [chain[ell - 1 - i] for i in range(ell)]  # order: a_1 .. a_l
    cap = degree_cap if degree_cap is not None else max(q.degree for q in chain) + 1
    hard = max(4 * cap + 8, 64)
    D = cap
    while D <= hard:
        sol = _membership_solve(base, target, D)
        if sol is not None:
            # exact verification: p_l + sum a_i p_{l-i} == 0
            check = [chain[ell].coeffs[j] for j in range(chain[ell].n)]
            for i, a in enumerate(sol):
                check = [
                    sc.poly_add(check[j], sc.poly_mul(a, base[i].coeffs[j]))
                    for j in range(len(check))
                ]
            if any(len(c) for c in check):
                raise AssertionError("syzygy verification failed in exact arithmetic")
            return sol
        D *= 2
    raise NoSyzygyAtDegree(f"no syzygy with coefficient degree <= {hard}")


@dataclass(frozen=True)
class ReductionReport:
    order: int
    coefficient_degree: int
    coefficient_height: float
    order_budget: BoundExpr
    height_budget: BoundExpr


def reduce_to_scalar(sys: AnySystem, p0: Optional[LinearFormPoly] = None):
    """Scalar equation annihilating y = p0(t, x(t)); returns (ode, report).

    The reported order and height budgets are the shipped explicit chain
    bounds at the system's common-denominator parameters.
    """
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    n = fuch.n
    if p0 is None:
        p0 = LinearFormPoly.constant([1] * n)
    P, delta = common_denominator_form(sys)
    chain = build_chain(p0, sys)
    coeffs = find_syzygy(chain)
    ode = ScalarFuchsianODE(delta, tuple(coeffs))
    m = sc.poly_deg(delta)
    r = int(math.ceil(max(P.height(), sc.poly_height_up(delta))))
    report = ReductionReport(
        order=ode.order,
        coefficient_degree=ode.coefficient_degree(),
        coefficient_height=ode.coefficient_height(),
        order_budget=chain_length_expr(n, m),
        height_budget=chain_height_expr(n, m, r),
    )
    return ode, report


# ---------------------------------------------------------------------------
# symmetric tensor powers


def _monomials_upto(n: int, d: int) -> list[tuple]:
    """All exponent multi-indices of total degree 1..d over n variables."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    for total in range(1, d + 1):
        rec([], total, n)
    return out


def _derivation_lift(mat, monos: list[tuple], index: dict, exact: bool):
    """Matrix of the derivation induced by x'_i = sum_k mat[i][k] x_k on monomials."""
    N = len(monos)
    if exact:
        out = [[sc.EC_ZERO] * N for _ in range(N)]
    else:
        out = np.zeros((N, N), dtype=complex)
    for row, alpha in enumerate(monos):
        # d/dt x^alpha = sum_i alpha_i x^(alpha - e_i) x_i' = sum_{i,k} alpha_i mat[i][k] x^(alpha - e_i + e_k)
        for i, ai in enumerate(alpha):
            if ai == 0:
                continue
            for k in range(len(alpha)):
                beta = list(alpha)
                beta[i] -= 1
                beta[k] += 1
                col = index[tuple(beta)]
                if exact:
                    out[row][col] = out[row][col] + EC.of(ai) * mat[i][k]
                else:
                    out[row][col] += ai * mat[i][k]
    if exact:
        return tuple(tuple(r) for r in out)
    return out


def tensor_power_system(sys: AnySystem, d: int) -> AnySystem:
    """System satisfied by all monomials of degree <= d in the solution entries.

    Block-diagonal over the homogeneous degrees, with entries drawn from the
    original coefficient entries (scaled by the integer multiplicities); for
    d = 1 the original system is returned unchanged.
    """
    if d < 1:
        raise ValueError("tensor power needs d >= 1")
    if d == 1:
        return sys
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    n = fuch.n
    monos = _monomials_upto(n, d)
    index = {m: i for i, m in enumerate(monos)}
    exact = fuch.exact

    def lift(mat):
        return _derivation_lift(mat, monos, index, exact)

    if exact:
        residues = [lift(A) for A in fuch.residues]
        points = list(fuch.points)
    else:
        residues = [lift(A).tolist() for A in fuch.np_residues()]
        points = list(fuch.np_points())
    if isinstance(sys, SpecialSystem):
        if exact:
            poly = [lift(Mk) for Mk in sys.polypart.coeffs]
        else:
            poly = [lift(Mk).tolist() for Mk in sys.polypart.np_coeffs()]
        return SpecialSystem.make(points, residues, poly or None, d * max(sys.growth_exponent, 1))
    return FuchsianSystem.make(points, residues)


# ---------------------------------------------------------------------------
# shipped chain bounds


def bound_chain_length(n: int, m: int) -> BoundExpr:
    """Explicit monotone bound for the stabilization length of linear-form chains.

    Placeholder formula n^2 (m+1) + n + m; far below the theoretical
    worst-case growth but validated to dominate observed lengths (see the
    README's bound-calibration note).
    """
    if n < 1 or m < 1:
        raise ValueError("parameters must be >= 1")
    return chain_length_expr(n, m)


def bound_chain_height(n: int, m: int, r: int) -> BoundExpr:
    """Explicit monotone bound for the syzygy coefficient heights: (2+r)^((n+1)^2 (m+1)^2)."""
    if n < 1 or m < 1 or r < 0:
        raise ValueError("parameters out of range")
    return chain_height_expr(n, m, r)
