"""Exact complex-rational scalars, matrices and univariate polynomials.

The algebraic half of the toolkit (folding formulas, syzygy solving,
common-denominator forms) runs over Q(i): complex numbers whose real and
imaginary parts are arbitrary-precision rationals.  The analytic half works
with numpy complex128; conversion exact -> floating is total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**15) if not x.is_integer() else Fraction(int(x))
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True)
class EC:
    """Exact complex scalar: a pair of rationals, closed under +,-,*,/."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(x) -> "EC":
        if isinstance(x, EC):
            return x
        if isinstance(x, complex):
            return EC(_to_fraction(x.real), _to_fraction(x.imag))
        return EC(_to_fraction(x))

    def __add__(self, o):
        o = EC.of(o)
        return EC(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return EC(-self.re, -self.im)

    def __sub__(self, o):
        o = EC.of(o)
        return EC(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return EC.of(o) - self

    def __mul__(self, o):
        o = EC.of(o)
        return EC(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = EC.of(o)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by exact zero")
        return EC((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, o):
        return EC.of(o) / self

    def conj(self) -> "EC":
        return EC(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    def __repr__(self):
        return f"EC({self.re}, {self.im})"


EC_ZERO = EC()
EC_ONE = EC(Fraction(1))


# ---------------------------------------------------------------------------
# serialization: rationals travel as decimal strings "p/q"


def scalar_to_json(x: EC) -> list:
    return [str(x.re), str(x.im)]


def scalar_from_json(v) -> EC:
    re, im = v
    return EC(_to_fraction(re), _to_fraction(im))


# ---------------------------------------------------------------------------
# exact matrices: tuples of tuples of EC


def mat_of(rows) -> tuple:
    return tuple(tuple(EC.of(x) for x in row) for row in rows)


def mat_zero(n: int, m: int | None = None) -> tuple:
    m = n if m is None else m
    return tuple(tuple(EC_ZERO for _ in range(m)) for _ in range(n))


def mat_eye(n: int) -> tuple:
    return tuple(tuple(EC_ONE if i == j else EC_ZERO for j in range(n)) for i in range(n))


def mat_add(a, b) -> tuple:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a, b) -> tuple:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_neg(a) -> tuple:
    return tuple(tuple(-x for x in row) for row in a)


def mat_scale(c, a) -> tuple:
    c = EC.of(c)
    return tuple(tuple(c * x for x in row) for row in a)


def mat_mul(a, b) -> tuple:
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum((x * y for x, y in zip(row, col)), EC_ZERO) for col in bt) for row in a
    )


def mat_is_zero(a) -> bool:
    return all(x.is_zero() for row in a for x in row)


def mat_is_real(a) -> bool:
    return all(x.is_real() for row in a for x in row)


def mat_conj(a) -> tuple:
    return tuple(tuple(x.conj() for x in row) for row in a)


def mat_to_numpy(a):
    import numpy as np

    return np.array([[x.to_complex() for x in row] for row in a], dtype=complex)


def mat_from_numpy(a) -> tuple:
    return tuple(tuple(EC.of(complex(x)) for x in row) for row in a)


def frobenius_norm_sq(a) -> Fraction:
    return sum((x.abs2() for row in a for x in row), Fraction(0))


def frobenius_norm_up(a) -> float:
    """Frobenius norm rounded upward; a computable upper bound for the 2-norm."""
    s = frobenius_norm_sq(a)
    v = math.sqrt(float(s))
    while Fraction(v) * Fraction(v) < s:
        v = math.nextafter(v, math.inf)
    return v


# ---------------------------------------------------------------------------
# exact dense univariate polynomials over EC, coefficients ascending


def poly_trim(p: Sequence[EC]) -> tuple:
    p = list(p)
    while p and p[-1].is_zero():
        p.pop()
    return tuple(p)


def poly_of(coeffs: Iterable) -> tuple:
    return poly_trim([EC.of(c) for c in coeffs])


POLY_ZERO: tuple = ()
POLY_ONE: tuple = (EC_ONE,)


def poly_deg(p) -> int:
    """Degree with deg 0 = -1 for the zero polynomial."""
    return len(p) - 1


def poly_add(p, q) -> tuple:
    n = max(len(p), len(q))
    out = []
    for i in range(n):
        a = p[i] if i < len(p) else EC_ZERO
        b = q[i] if i < len(q) else EC_ZERO
        out.append(a + b)
    return poly_trim(out)


def poly_sub(p, q) -> tuple:
    return poly_add(p, tuple(-c for c in q))


def poly_scale(c, p) -> tuple:
    c = EC.of(c)
    return poly_trim([c * a for a in p])


def poly_mul(p, q) -> tuple:
    if not p or not q:
        return POLY_ZERO
    out = [EC_ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a.is_zero():
            continue
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return poly_trim(out)


def poly_pow(p, k: int) -> tuple:
    out = POLY_ONE
    for _ in range(k):
        out = poly_mul(out, p)
    return out


def poly_diff(p) -> tuple:
    return poly_trim([EC.of(i) * p[i] for i in range(1, len(p))])


def poly_eval(p, t: EC) -> EC:
    acc = EC_ZERO
    for c in reversed(p):
        acc = acc * t + c
    return acc


def poly_eval_complex(p, t: complex) -> complex:
    acc = 0j
    for c in reversed(p):
        acc = acc * t + c.to_complex()
    return acc


def poly_from_roots(roots: Iterable[EC]) -> tuple:
    out = POLY_ONE
    for r in roots:
        out = poly_mul(out, (-EC.of(r), EC_ONE))
    return out


def poly_height_up(p) -> float:
    """Sum of absolute values of the coefficients, rounded upward."""
    total = 0.0
    for c in p:
        v = math.sqrt(float(c.abs2()))
        while Fraction(v) * Fraction(v) < c.abs2():
            v = math.nextafter(v, math.inf)
        total += v
    return total


def poly_to_json(p) -> list:
    return [scalar_to_json(c) for c in p]


def poly_from_json(v) -> tuple:
    return poly_trim([scalar_from_json(c) for c in v])


# ---------------------------------------------------------------------------
# exact linear algebra: Gaussian elimination over Q(i)


def solve_linear_system(rows: list[list[EC]], rhs: list[EC]):
    """Solve A x = b over Q(i); returns one solution or None if inconsistent.

    Free variables are set to zero.  `rows` is a list of equations.
    """
    m = len(rows)
    if m == 0:
        return []
    n = len(rows[0])
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    pivot_cols: list[int] = []
    r = 0
    for c in range(n):
        pr = None
        for i in range(r, m):
            if not aug[i][c].is_zero():
                pr = i
                break
        if pr is None:
            continue
        aug[r], aug[pr] = aug[pr], aug[r]
        piv = aug[r][c]
        aug[r] = [x / piv for x in aug[r]]
        for i in range(m):
            if i != r and not aug[i][c].is_zero():
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivot_cols.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if not aug[i][n].is_zero():
            return None
    x = [EC_ZERO] * n
    for i, c in enumerate(pivot_cols):
        x[c] = aug[i][n]
    return x
