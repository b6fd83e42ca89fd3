"""Numerical oracle: integration along paths, monodromy, index, zero counts.

Everything here is floating-point analysis used to verify the symbolic
inequalities on concrete instances: an adaptive high-order integrator for
dX/dt = A(t)X along polygonal/arc paths, analytic continuation, monodromy
factors, continuous-argument index tracking, and argument-principle zero
counting in triangles.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import AnySystem, FuchsianSystem, PathSpec, Quasipolynomial, SpecialSystem
from .errors import (
    BoundaryZeroUnresolved,
    PathHitsSingularity,
    ResolutionExceeded,
    SegmentMeetsSigma,
    SegmentNotReal,
    StepFloorReached,
    ZeroArgument,
)

DEFAULT_TOL = 1e-10
EIGEN_TOL = 1e-6


# ---------------------------------------------------------------------------
# path geometry helpers


def _seg_distance(z0: complex, z1: complex, p: complex) -> float:
    """Distance from point p to the segment [z0, z1]."""
    d = z1 - z0
    L2 = (d * d.conjugate()).real
    if L2 == 0.0:
        return abs(p - z0)
    u = ((p - z0) * d.conjugate()).real / L2
    u = min(1.0, max(0.0, u))
    return abs(p - (z0 + u * d))


def _piece_min_distance(piece, pts: np.ndarray) -> float:
    if len(pts) == 0:
        return math.inf
    if piece[0] == "seg":
        return min(_seg_distance(piece[1], piece[2], complex(p)) for p in pts)
    _, c, r, th0, th1 = piece
    # distance from points to a full circle, minus nothing for sub-arcs:
    # conservative lower bound via sampling plus the sampling gap.
    K = max(8, int(8 * abs(th1 - th0)))
    ths = np.linspace(th0, th1, K + 1)
    samples = c + r * np.exp(1j * ths)
    dmin = min(float(np.min(np.abs(samples - p))) for p in pts)
    gap = r * abs(th1 - th0) / K / 2
    return max(dmin - gap, 0.0)


def _split_piece(piece) -> list:
    if piece[0] == "seg":
        mid = (piece[1] + piece[2]) / 2
        return [("seg", piece[1], mid), ("seg", mid, piece[2])]
    _, c, r, th0, th1 = piece
    tm = (th0 + th1) / 2
    return [("arc", c, r, th0, tm), ("arc", c, r, tm, th1)]


def _piece_length(piece) -> float:
    if piece[0] == "seg":
        return abs(piece[2] - piece[1])
    return piece[2] * abs(piece[4] - piece[3])


def _adaptive_chunks(pieces, pts: np.ndarray, floor: float) -> list[tuple]:
    """Split pieces until each chunk is short relative to its distance to Sigma.

    Returns a list of (piece, dmin) with dmin the chunk's distance to the
    singular locus; raises PathHitsSingularity below the step floor.
    """
    out = []
    stack = list(reversed(pieces))
    while stack:
        p = stack.pop()
        d = _piece_min_distance(p, pts)
        if d < floor:
            raise PathHitsSingularity(
                f"path comes within {d:.3e} of the singular locus (floor {floor:.3e})"
            )
        if _piece_length(p) > 0.8 * d and _piece_length(p) > floor:
            stack.extend(reversed(_split_piece(p)))
        else:
            out.append((p, d))
    return out


def _as_pathspec(path) -> PathSpec:
    if isinstance(path, PathSpec):
        return path
    return PathSpec.polyline([complex(v) for v in path])


def path_points(path: PathSpec, s: np.ndarray) -> np.ndarray:
    """Vectorized parameterization of a path over s in [0, 1]."""
    ps = path.pieces()
    s = np.asarray(s, dtype=float)
    k = np.minimum((s * len(ps)).astype(int), len(ps) - 1)
    u = s * len(ps) - k
    out = np.empty(s.shape, dtype=complex)
    for j, p in enumerate(ps):
        mask = k == j
        if not mask.any():
            continue
        if p[0] == "seg":
            out[mask] = p[1] + (p[2] - p[1]) * u[mask]
        else:
            th = p[3] + (p[4] - p[3]) * u[mask]
            out[mask] = p[1] + p[2] * np.exp(1j * th)
    return out


# ---------------------------------------------------------------------------
# integration


def _system_points(sys: AnySystem) -> np.ndarray:
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    return fuch.np_points()


def integrate_along(
    sys: AnySystem,
    path,
    X0: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Transport X0 along the path through dX/dt = A(t)X; returns the endpoint value.

    The path is polygonalized into chunks short relative to their distance to
    the singular locus; each chunk is integrated with an adaptive 8th-order
    scheme whose step is capped at a fraction of that distance.
    """
    sol = solution_on_path(sys, path, X0=X0, tol=tol)
    return sol.end_value


@dataclass
class SolutionPath:
    """Dense solution of a linear system along one path, callable over s in [0,1]."""

    path: PathSpec
    segments: list  # (s0, s1, scipy OdeSolution, shape)
    shape: tuple
    end_value: np.ndarray

    def __call__(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty((len(s_arr),) + self.shape, dtype=complex)
        bounds = np.array([seg[1] for seg in self.segments])
        idx = np.minimum(np.searchsorted(bounds, s_arr, side="left"), len(self.segments) - 1)
        for k in np.unique(idx):
            s0, s1, dense = self.segments[k][:3]
            mask = idx == k
            loc = np.clip((s_arr[mask] - s0) / (s1 - s0), 0.0, 1.0)
            vals = dense(loc)  # (dim, npts)
            out[mask] = vals.T.reshape((-1,) + self.shape)
        return out if np.ndim(s) else out[0]


def solution_on_path(
    sys: AnySystem,
    path,
    X0: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
) -> SolutionPath:
    path = _as_pathspec(path)
    fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
    n = fuch.n
    if X0 is None:
        X0 = np.eye(n, dtype=complex)
    X0 = np.asarray(X0, dtype=complex)
    shape = X0.shape
    pts = _system_points(sys)
    scale = max(1.0, float(np.max(np.abs(pts))) if len(pts) else 1.0)
    floor = 50 * np.finfo(float).eps * scale
    chunks = _adaptive_chunks(path.pieces(), pts, floor)
    A = sys.coefficient_matrix()

    total_len = sum(_piece_length(p) for p, _ in chunks) or 1.0
    segments = []
    y = X0.reshape(-1)
    s_cursor = 0.0
    for piece, dmin in chunks:
        plen = _piece_length(piece)
        if piece[0] == "seg":
            z0, z1 = piece[1], piece[2]

            def gamma(u, z0=z0, z1=z1):
                return z0 + (z1 - z0) * u, (z1 - z0)

        else:
            _, c, r, th0, th1 = piece

            def gamma(u, c=c, r=r, th0=th0, th1=th1):
                th = th0 + (th1 - th0) * u
                z = c + r * cmath.exp(1j * th)
                return z, 1j * r * (th1 - th0) * cmath.exp(1j * th)

        def rhs(u, yv):
            z, dz = gamma(u)
            return (dz * (A(z) @ yv.reshape(shape))).reshape(-1)

        max_step = max(min(0.1 * dmin / max(plen, 1e-300), 1.0), 1e-12)
        res = solve_ivp(
            rhs,
            (0.0, 1.0),
            y,
            method="DOP853",
            rtol=tol,
            atol=tol * max(1.0, float(np.max(np.abs(y)))) * 1e-2,
            max_step=max_step,
            dense_output=True,
        )
        if not res.success:
            raise StepFloorReached(f"integrator failed on a chunk: {res.message}")
        s_next = s_cursor + plen / total_len
        segments.append((s_cursor, s_next, res.sol))
        s_cursor = s_next
        y = res.y[:, -1]
    # normalize the last endpoint to exactly 1.0 in parameter space
    if segments:
        s0, _, dense = segments[-1]
        segments[-1] = (s0, 1.0, dense)
    return SolutionPath(path, segments, shape, y.reshape(shape))


# ---------------------------------------------------------------------------
# fundamental solutions and monodromy


@dataclass
class FundamentalSolution:
    """Matrix solution anchored at a base point, with per-path continuation cache."""

    sys: AnySystem
    base_point: complex
    base_value: np.ndarray
    tol: float = DEFAULT_TOL
    _cache: dict = field(default_factory=dict)

    @staticmethod
    def normalized(sys: AnySystem, base_point: complex, tol: float = DEFAULT_TOL):
        fuch = sys.fuchsian if isinstance(sys, SpecialSystem) else sys
        return FundamentalSolution(sys, complex(base_point), np.eye(fuch.n, dtype=complex), tol)

    def continue_along(self, path) -> np.ndarray:
        path = _as_pathspec(path)
        key = repr(path)
        if key not in self._cache:
            end = integrate_along(self.sys, path, X0=self.base_value, tol=self.tol)
            if abs(np.linalg.det(end)) == 0.0:
                raise StepFloorReached("degenerate continuation (det = 0)")
            self._cache[key] = end
        return self._cache[key]


@dataclass(frozen=True)
class MonodromyFactor:
    loop: PathSpec
    matrix: np.ndarray
    eigenvalues: np.ndarray

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def monodromy(sys: AnySystem, loop, tol: float = DEFAULT_TOL) -> MonodromyFactor:
    """Monodromy factor of the loop for the solution normalized to E at its start.

    With X(t*) = E the factor equals the endpoint transport matrix.  Loops
    written as a product compose factors by right multiplication: traversing
    gamma2 first and gamma1 second yields M_gamma1 @ M_gamma2.
    """
    loop = _as_pathspec(loop)
    if not loop.closed:
        raise ValueError("monodromy needs a closed loop")
    M = integrate_along(sys, loop, tol=tol)
    return MonodromyFactor(loop, M, np.linalg.eigvals(M))


# ---------------------------------------------------------------------------
# argument-index tracking


@dataclass
class PathFunction:
    """Scalar function sampled through continuation data over s in [0,1]."""

    fn: Callable  # vectorized over s arrays
    path: Optional[PathSpec] = None
    param_based: bool = True

    def __call__(self, s):
        return self.fn(s)


def linear_form_on_path(solpath: SolutionPath, weights: np.ndarray) -> PathFunction:
    """f(s) = sum_ij weights[i,j] * X_ij(s) along an integrated solution."""
    W = np.asarray(weights, dtype=complex)

    def fn(s):
        vals = solpath(s)
        if np.ndim(s):
            flat = vals.reshape((len(vals), -1))
            return flat @ W.reshape(-1)
        return complex(np.sum(vals * W))

    return PathFunction(fn, solpath.path, True)


def _eval_vectorized(f, ts: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(ts), dtype=complex)
        if out.shape == ts.shape:
            return out
    except Exception:
        pass
    return np.array([complex(f(t)) for t in ts], dtype=complex)


def _index_of_samples(vals: np.ndarray) -> tuple[float, float]:
    ratios = vals[1:] / vals[:-1]
    dphi = np.angle(ratios)
    return float(np.sum(dphi)), float(np.max(np.abs(dphi))) if len(dphi) else 0.0


def index_along(
    f,
    path=None,
    tol: float = 1e-9,
    *,
    initial_samples: int = 128,
    max_rounds: int = 48,
    _allow_offset: bool = True,
) -> float:
    """Total variation of Arg f along the path (radians).

    Tracks a continuous branch of the argument on an adaptively refined
    sample grid (refining wherever a step turns the argument by more than
    pi/2).  Zeros sitting on the path are handled by the documented lim-sup
    convention: the function is offset by small constants c in 8 directions
    at 3 magnitudes and the supremal observed index is reported.  The
    identically-zero function has index 0 by definition.
    """
    if isinstance(f, PathFunction) and path is None:
        param = np.linspace(0.0, 1.0, initial_samples + 1)
        evaluate = lambda ss: _eval_vectorized(f, ss)
    else:
        if path is None:
            raise ValueError("index_along needs a path for point-based functions")
        pspec = _as_pathspec(path)
        npieces = max(len(pspec.pieces()), 1)
        param = np.linspace(0.0, 1.0, npieces * initial_samples + 1)

        def evaluate(ss):
            return _eval_vectorized(f, path_points(pspec, ss))

    vals = evaluate(param)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        return 0.0

    # refine until no step turns the argument by more than pi/2; modulus
    # swings above a factor e^0.7 are refined too, since an aliased full
    # turn of an analytic function shows up in |f| between the samples
    for _ in range(max_rounds):
        mags = np.abs(vals)
        if float(np.min(mags)) < 1e-9 * scale:
            break  # potential on-path zero, handled below
        ratios = vals[1:] / vals[:-1]
        dphi = np.angle(ratios)
        bad = (np.abs(dphi) > math.pi / 2) | (np.abs(np.log(np.abs(ratios))) > 0.7)
        if not bad.any():
            return float(np.sum(dphi))
        if len(param) > 2_000_000:
            raise ResolutionExceeded("refinement exceeded the sample budget")
        mids = (param[:-1][bad] + param[1:][bad]) / 2
        if np.min(np.diff(param)) < 1e-15:
            raise ResolutionExceeded("argument jumps persist at the minimum step")
        mv = evaluate(mids)
        param = np.concatenate([param, mids])
        vals = np.concatenate([vals, mv])
        order = np.argsort(param, kind="stable")
        param, vals = param[order], vals[order]
        scale = max(scale, float(np.max(np.abs(vals))))

    mags = np.abs(vals)
    if float(np.min(mags)) >= 1e-9 * scale:
        raise ResolutionExceeded("argument tracking did not converge")

    if float(np.max(mags)) < 1e-13:
        return 0.0  # numerically the zero function
    if not _allow_offset:
        raise ResolutionExceeded("zero on path while computing an offset index")

    # lim-sup convention: sample offsets over 8 directions x 3 magnitudes
    best = None
    for mag in (1e-3, 1e-5, 1e-7):
        for k in range(8):
            c = scale * mag * cmath.exp(2j * math.pi * k / 8)
            shifted = lambda ss, c=c: evaluate(ss) - c
            g = PathFunction(shifted) if isinstance(f, PathFunction) and path is None else None
            try:
                if g is not None:
                    idx = index_along(g, None, tol, initial_samples=initial_samples, _allow_offset=False)
                else:
                    idx = index_along(
                        lambda t, c=c: f(t) - c,
                        path,
                        tol,
                        initial_samples=initial_samples,
                        _allow_offset=False,
                    )
            except ResolutionExceeded:
                continue
            best = idx if best is None else max(best, idx)
    if best is None:
        raise ResolutionExceeded("no admissible offset resolved the on-path zero")
    return best


def count_zeros(f, triangle, tol: float = 1e-9) -> int:
    """Zeros of a holomorphic f inside a triangle by the argument principle.

    Retries with deterministic vertex perturbations (up to 1e-6 of the
    diameter) when a boundary zero or a non-integer winding is suspected.
    """
    tri = _as_pathspec(triangle)
    if tri.kind != "triangle-boundary":
        raise ValueError("count_zeros expects a triangle boundary")
    a, b, c = tri.vertices
    diam = max(abs(a - b), abs(b - c), abs(c - a))
    offsets = [0j] + [
        1e-6 * diam * cmath.exp(2j * math.pi * (0.137 + 0.731 * k)) for k in range(1, 6)
    ]
    last_err: Exception | None = None
    for off in offsets:
        try:
            path = PathSpec.triangle(a + off, b + off * 1.3, c + off * 0.7)
            idx = index_along(f, path, tol)
        except (ResolutionExceeded, ValueError) as e:
            last_err = e
            continue
        k = idx / (2 * math.pi)
        ki = round(k)
        if abs(k - ki) <= 0.1:
            return int(ki)
        last_err = BoundaryZeroUnresolved(f"non-integer winding {k:.4f}")
    raise BoundaryZeroUnresolved(
        f"boundary zeros unresolved after {len(offsets) - 1} perturbations: {last_err}"
    )


# ---------------------------------------------------------------------------
# quasipolynomials


def eval_quasipolynomial(qp: Quasipolynomial, t, branch: int = 0):
    """sum_lambda t^lambda p_lambda(ln t) with ln t on the chosen branch."""
    ts = np.atleast_1d(np.asarray(t, dtype=complex))
    if np.any(ts == 0):
        raise ZeroArgument("quasipolynomials are evaluated away from t = 0")
    ln = np.log(ts) + 2j * math.pi * branch
    out = np.zeros_like(ts)
    for lam, coeffs in qp.terms:
        p = np.zeros_like(ts)
        for ck in reversed(coeffs):
            p = p * ln + ck
        out = out + np.exp(lam * ln) * p
    return out if np.ndim(t) else complex(out[0])


def quasipolynomial_path_function(qp: Quasipolynomial, path: PathSpec, branch: int = 0):
    """Vectorized point-based evaluator suitable for index_along/count_zeros."""

    def fn(ts):
        return eval_quasipolynomial(qp, ts, branch)

    return fn


# ---------------------------------------------------------------------------
# field elements (rational expressions in t and the entries of X) and Re/Im


@dataclass(frozen=True)
class FieldElement:
    """num/den, each a polynomial in generators (t, x_11, ..., x_nn).

    Monomials are exponent tuples of length 1 + n*n with complex
    coefficients; den None means the constant denominator 1.
    """

    n: int
    num: tuple  # ((exponents, coeff), ...)
    den: Optional[tuple] = None

    @staticmethod
    def poly(n: int, monomials: dict) -> "FieldElement":
        return FieldElement(n, _poly_normalize(monomials))

    @staticmethod
    def ratio(n: int, num: dict, den: dict) -> "FieldElement":
        return FieldElement(n, _poly_normalize(num), _poly_normalize(den))

    @property
    def degree(self) -> int:
        dn = max((sum(e) for e, _ in self.num), default=0)
        dd = max((sum(e) for e, _ in self.den), default=0) if self.den else 0
        return max(dn, dd)

    def evaluate(self, t: complex, X: np.ndarray) -> complex:
        gens = np.concatenate([[t], np.asarray(X, dtype=complex).reshape(-1)])
        num = _poly_eval(self.num, gens)
        if self.den is None:
            return num
        return num / _poly_eval(self.den, gens)


def _poly_normalize(monos: dict) -> tuple:
    out = {}
    for e, c in monos.items():
        c = complex(c)
        if c != 0:
            out[tuple(int(x) for x in e)] = out.get(tuple(e), 0) + c
    return tuple(sorted(out.items()))


def _poly_eval(monos: tuple, gens: np.ndarray) -> complex:
    total = 0j
    for e, c in monos:
        v = c
        for g, k in zip(gens, e):
            if k:
                v *= g**k
        total += v
    return total


def _poly_split(monos: tuple):
    re = {e: c.real for e, c in monos}
    im = {e: c.imag for e, c in monos}
    return _poly_normalize(re), _poly_normalize(im)


def _poly_mul(a: tuple, b: tuple) -> tuple:
    out: dict = {}
    for ea, ca in a:
        for eb, cb in b:
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return _poly_normalize(out)


def _poly_add(a: tuple, b: tuple) -> tuple:
    out = dict(a)
    for e, c in b:
        out[e] = out.get(e, 0) + c
    return _poly_normalize(out)


def real_im_operator(f: FieldElement, sigma, sys: AnySystem):
    """(Re_sigma f, Im_sigma f) for a real-on-R system, X normalized real on sigma.

    On the generators the rule is trivial (X and t are real on sigma), so a
    polynomial splits coefficient-wise; a ratio g/h splits through
    (g1 h1 + g2 h2)/(h1^2 + h2^2) and (g2 h1 - g1 h2)/(h1^2 + h2^2).
    """
    a, b = sigma
    if abs(complex(a).imag) > 1e-14 or abs(complex(b).imag) > 1e-14:
        raise SegmentNotReal("sigma must be a real segment")
    pts = _system_points(sys)
    lo, hi = min(complex(a).real, complex(b).real), max(complex(a).real, complex(b).real)
    for p in pts:
        if abs(p.imag) < 1e-12 and lo - 1e-12 <= p.real <= hi + 1e-12:
            raise SegmentMeetsSigma(f"singular point {p} lies on sigma")
    g1, g2 = _poly_split(f.num)
    if f.den is None:
        return FieldElement(f.n, g1), FieldElement(f.n, g2)
    h1, h2 = _poly_split(f.den)
    den = _poly_add(_poly_mul(h1, h1), _poly_mul(h2, h2))
    re_num = _poly_add(_poly_mul(g1, h1), _poly_mul(g2, h2))
    im_num = _poly_add(_poly_mul(g2, h1), tuple((e, -c) for e, c in _poly_mul(g1, h2)))
    return FieldElement(f.n, re_num, den), FieldElement(f.n, im_num, den)


# ---------------------------------------------------------------------------
# Chebyshev spectral differentiation (oracle plumbing for ODE residual checks)


def cheb_nodes(a: float, b: float, N: int) -> np.ndarray:
    k = np.arange(N + 1)
    x = np.cos(math.pi * k / N)  # [-1, 1], descending
    return (a + b) / 2 + (b - a) / 2 * x


def cheb_diff_matrix(a: float, b: float, N: int) -> np.ndarray:
    """Differentiation matrix on the Chebyshev nodes of cheb_nodes(a, b, N)."""
    k = np.arange(N + 1)
    x = np.cos(math.pi * k / N)
    c = np.ones(N + 1)
    c[0] = c[N] = 2.0
    c = c * (-1.0) ** k
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D = D - np.diag(D.sum(axis=1))
    return D * (2.0 / (b - a))
