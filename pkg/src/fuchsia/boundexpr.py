"""Exact big-integer bound expressions.

Computed zero-count bounds are kept symbolically as expression trees
(literals, sums, products, powers and named-function applications) so that
certificates stay inspectable even when their value is astronomically large.
Evaluation is exact; a log2-magnitude estimator that never underestimates
guards against materializing integers above a configurable bit budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import BoundTooLarge

MAX_EVAL_BITS = 10**6


@dataclass(frozen=True)
class BoundExpr:
    node: str  # "int" | "sum" | "prod" | "pow" | "func"
    value: int = 0
    args: tuple = ()
    fn: str = ""

    # -- constructors ------------------------------------------------------

    @staticmethod
    def of(x) -> "BoundExpr":
        if isinstance(x, BoundExpr):
            return x
        if isinstance(x, int):
            if x < 0:
                raise ValueError("bound literals must be nonnegative")
            return BoundExpr("int", value=x)
        raise TypeError(f"cannot coerce {x!r} to BoundExpr")

    @staticmethod
    def lit(x: int) -> "BoundExpr":
        return BoundExpr.of(int(x))

    @staticmethod
    def add(*xs) -> "BoundExpr":
        xs = tuple(BoundExpr.of(x) for x in xs)
        if len(xs) == 1:
            return xs[0]
        return BoundExpr("sum", args=xs)

    @staticmethod
    def mul(*xs) -> "BoundExpr":
        xs = tuple(BoundExpr.of(x) for x in xs)
        if len(xs) == 1:
            return xs[0]
        return BoundExpr("prod", args=xs)

    @staticmethod
    def pow(base, exp) -> "BoundExpr":
        return BoundExpr("pow", args=(BoundExpr.of(base), BoundExpr.of(exp)))

    @staticmethod
    def func(name: str, *args) -> "BoundExpr":
        if name not in FUNCTIONS:
            raise ValueError(f"unknown bound function {name!r}")
        return BoundExpr("func", fn=name, args=tuple(BoundExpr.of(a) for a in args))

    def __add__(self, o):
        return BoundExpr.add(self, o)

    def __mul__(self, o):
        return BoundExpr.mul(self, o)

    # -- evaluation --------------------------------------------------------

    def log2_bound(self) -> float:
        """Upper estimate of log2(value); never underestimates, may be inf."""
        if self.node == "int":
            return 0.0 if self.value <= 1 else float(self.value.bit_length())
        if self.node == "sum":
            parts = [a.log2_bound() for a in self.args]
            return max(parts) + math.log2(len(parts)) + 1
        if self.node == "prod":
            return sum(a.log2_bound() for a in self.args) + 1
        if self.node == "pow":
            base, exp = self.args
            be = base.log2_bound()
            if be <= 0.0:
                return 1.0
            if exp.log2_bound() > 64:
                return math.inf
            try:
                e = exp.eval(max_bits=64)
            except BoundTooLarge:
                return math.inf
            return be * max(e, 1) + 1
        fn = FUNCTIONS[self.fn]
        return fn.log2_bound([a.log2_bound() for a in self.args], self.args)

    def eval(self, max_bits: int = MAX_EVAL_BITS) -> int:
        """Exact nonnegative integer value; BoundTooLarge above max_bits."""
        est = self.log2_bound()
        if est > max_bits:
            raise BoundTooLarge(
                f"estimated magnitude 2^{est:.3g} exceeds the {max_bits}-bit budget"
            )
        return self._eval_raw()

    def _eval_raw(self) -> int:
        if self.node == "int":
            return self.value
        if self.node == "sum":
            return sum(a._eval_raw() for a in self.args)
        if self.node == "prod":
            out = 1
            for a in self.args:
                out *= a._eval_raw()
            return out
        if self.node == "pow":
            return self.args[0]._eval_raw() ** self.args[1]._eval_raw()
        return FUNCTIONS[self.fn].apply(*[a._eval_raw() for a in self.args])

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        if self.node == "int":
            return {"node": "int", "value": str(self.value)}
        doc = {"node": self.node, "args": [a.to_json() for a in self.args]}
        if self.node == "func":
            doc["fn"] = self.fn
        return doc

    @staticmethod
    def from_json(doc: dict) -> "BoundExpr":
        node = doc["node"]
        if node == "int":
            return BoundExpr.lit(int(doc["value"]))
        args = tuple(BoundExpr.from_json(a) for a in doc["args"])
        if node == "func":
            return BoundExpr("func", fn=doc["fn"], args=args)
        return BoundExpr(node, args=args)

    def pretty(self) -> str:
        if self.node == "int":
            return str(self.value)
        if self.node == "sum":
            return "(" + " + ".join(a.pretty() for a in self.args) + ")"
        if self.node == "prod":
            return "(" + " * ".join(a.pretty() for a in self.args) + ")"
        if self.node == "pow":
            return f"{self.args[0].pretty()}^{self.args[1].pretty()}"
        return f"{self.fn}(" + ", ".join(a.pretty() for a in self.args) + ")"


# ---------------------------------------------------------------------------
# named functions


@dataclass(frozen=True)
class _Fn:
    apply: Callable[..., int]
    log2_bound: Callable[[list[float], tuple], float]


def _binom(n: int, k: int) -> int:
    return math.comb(n, k)


def _halfless(vals, args):
    return vals[0]


def _chain_len(n: int, m: int) -> int:
    # Explicit monotone placeholder dominating observed stabilization lengths;
    # far below the theoretical worst-case tower, see README.
    return n * n * (m + 1) + n + m


def _chain_height_exponent(n: int, m: int) -> int:
    return (n + 1) ** 2 * (m + 1) ** 2


def _chain_height(n: int, m: int, r: int) -> int:
    return (2 + r) ** _chain_height_exponent(n, m)


def _newton_threshold(q: int) -> int:
    # 2 * ceil(L(q)) where L(q) = 2q + 3 bounds the norm of the linearized
    # (Cauchy-split) solution operator on the annulus with width parameter q.
    return 2 * (2 * q + 3)


def _fact_const(q: int, qp: int) -> int:
    return _newton_threshold(q) ** 2 * qp**2


def _try_eval_small(arg: "BoundExpr"):
    try:
        return arg.eval(max_bits=64)
    except BoundTooLarge:
        return None


def _binom_log2(vals, args):
    n = _try_eval_small(args[0])
    return math.inf if n is None else n + 1.0


def _chain_height_log2(vals, args):
    n = _try_eval_small(args[0])
    m = _try_eval_small(args[1])
    if n is None or m is None:
        return math.inf
    return (vals[2] + 2) * float(_chain_height_exponent(n, m)) + 1


FUNCTIONS: dict[str, _Fn] = {
    "half_up": _Fn(
        lambda x: (x + 1) // 2,
        lambda vals, args: vals[0],
    ),
    "binom": _Fn(_binom, _binom_log2),
    "chain_len": _Fn(
        _chain_len,
        lambda vals, args: 2 * vals[0] + vals[1] + 4,
    ),
    "chain_height": _Fn(_chain_height, _chain_height_log2),
    "newton_threshold": _Fn(
        _newton_threshold,
        lambda vals, args: vals[0] + 4,
    ),
    "fact_const": _Fn(
        _fact_const,
        lambda vals, args: 2 * (vals[0] + 4) + 2 * vals[1] + 1,
    ),
}


def chain_length_expr(n, m) -> BoundExpr:
    return BoundExpr.func("chain_len", n, m)


def chain_height_expr(n, m, r) -> BoundExpr:
    return BoundExpr.func("chain_height", n, m, r)
