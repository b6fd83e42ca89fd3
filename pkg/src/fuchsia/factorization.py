"""Quantitative matrix factorization on an annulus and isomonodromic surgery.

An invertible matrix function H on an annulus R = {a < |t-c| < b} is split as
H = F * G with F holomorphic and invertible in the inner disk and G in the
outer domain with a finite-order pole at infinity.  The pipeline: truncate H
to a rational (Laurent-polynomial) approximation, Newton-iterate the
near-identity remainder via Cauchy splitting, then expel the spurious zeros
of the rational factor's determinant to infinity one by one.

Functions are represented by samples on three working circles together with
Laurent coefficients fitted by FFT; resampling at doubled resolution bounds
the aliasing error.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .boundexpr import _fact_const, _newton_threshold
from .core import FuchsianSystem, MatrixPoly, PathSpec, SpecialSystem
from .errors import (
    AccuracyUnreachable,
    NoConvergence,
    NotAZero,
    NotCloseEnough,
    ResamplingUnstable,
    SpectralSlitFailure,
)

LAURENT_STABLE_TOL = 1e-12


# ---------------------------------------------------------------------------
# annuli


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus {a < |t - center| < b} with width parameter q.

    Requires b < q and b/a > 1 + 1/q.  Derived sub-annuli: R' takes 1/8
    margins off each side, R'' takes 1/4 margins.
    """

    a: float
    b: float
    center: complex
    q: int

    @staticmethod
    def make(a: float, b: float, center: complex = 0j, q: Optional[int] = None) -> "AnnulusSpec":
        a, b = float(a), float(b)
        if not 0 < a < b:
            raise ValueError("need 0 < a < b")
        if q is None:
            q = 1
            while b >= q or b / a <= 1 + 1.0 / q:
                q += 1
                if q > 10**6:
                    raise ValueError("no admissible width parameter")
        q = int(q)
        if b >= q or b / a <= 1 + 1.0 / q:
            raise ValueError(f"width constraints violated: b={b}, b/a={b/a}, q={q}")
        return AnnulusSpec(a, b, complex(center), q)

    def sub(self, frac: float) -> tuple[float, float]:
        w = self.b - self.a
        return self.a + frac * w, self.b - frac * w

    @property
    def prime(self) -> tuple[float, float]:
        return self.sub(1 / 8)

    @property
    def dprime(self) -> tuple[float, float]:
        return self.sub(1 / 4)

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "center": [self.center.real, self.center.imag],
            "q": self.q,
        }


# ---------------------------------------------------------------------------
# sampled annulus functions


def _fit_laurent(values: np.ndarray, radius: float, kmin: int, kmax: int) -> dict:
    """Laurent coefficients c_k from N equispaced samples on one circle.

    Frequencies whose amplitude on the circle sits below the relative noise
    floor are dropped: rescaling them by radius**(-k) would only amplify
    sampling noise.
    """
    N = values.shape[0]
    hat = np.fft.fft(values, axis=0) / N  # hat[j] = sum over frequencies k = j mod N
    floor = 1e-14 * max(float(np.max(np.abs(hat))), 1e-300)
    out = {}
    for k in range(kmin, kmax + 1):
        h = hat[k % N]
        if np.max(np.abs(h)) <= floor:
            continue
        try:
            c = h / radius**k
        except OverflowError:
            continue
        if not np.all(np.isfinite(c)):
            continue
        out[k] = c
    return out


def _eval_laurent(coeffs: dict, ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype=complex)
    n = next(iter(coeffs.values())).shape[0] if coeffs else 1
    out = np.zeros(ts.shape + (n, n), dtype=complex)
    for k, c in coeffs.items():
        out += np.power.outer(ts, k)[..., None, None] * c
    return out


def laurent_sup(coeffs: dict, radius: float) -> float:
    """Upper bound sum_k ||c_k|| r^k for the sup norm on the circle."""
    return float(
        sum(np.linalg.norm(c, 2) * radius**k for k, c in coeffs.items())
    )


@dataclass
class AnnulusMatrixFunction:
    """Matrix function known on three working circles of an annulus.

    Holds equispaced samples (values[r] has shape (N, n, n)) and Laurent
    coefficients fitted from the middle circle; the construction doubles the
    resolution until refitting moves the retained coefficients by less than
    1e-12 * ||H||.
    """

    annulus: AnnulusSpec
    radii: tuple
    values: dict
    coeffs: dict
    n: int
    N: int
    cutoff: int
    fn: Optional[Callable] = None
    real_on_axis: bool = False

    @staticmethod
    def build(
        H: Callable,
        annulus: AnnulusSpec,
        margins: float = 1 / 8,
        start_resolution: int = 256,
        max_resolution: int = 4096,
    ) -> "AnnulusMatrixFunction":
        a1, b1 = annulus.sub(margins)
        radii = (a1, math.sqrt(a1 * b1), b1)
        c = annulus.center
        N = start_resolution
        prev = None
        while True:
            thetas = 2 * math.pi * np.arange(N) / N
            values = {}
            for r in radii:
                ts = c + r * np.exp(1j * thetas)
                values[r] = np.array([np.asarray(H(t), dtype=complex) for t in ts])
            n = values[radii[0]].shape[-1]
            K = N // 4
            coeffs = _split_fit(values, radii, K)
            scale = max(float(np.max(np.abs(values[r]))) for r in radii)
            if prev is not None:
                drift = 0.0
                for k in set(prev) & set(coeffs):
                    drift = max(drift, float(np.max(np.abs(prev[k] - coeffs[k]))))
                if drift < LAURENT_STABLE_TOL * max(scale, 1.0):
                    break
            if N >= max_resolution:
                if prev is None:
                    break
                raise ResamplingUnstable(
                    f"Laurent coefficients did not stabilize at resolution {N}"
                )
            prev = {k: v for k, v in coeffs.items() if np.max(np.abs(v)) > 1e-14 * scale}
            N *= 2
        real = _looks_real_on_axis(values, radii, N)
        return AnnulusMatrixFunction(annulus, radii, values, coeffs, n, N, K, H, real)

    def sup_norm(self) -> float:
        return max(
            float(np.max([np.linalg.norm(v, 2) for v in self.values[r]])) for r in self.radii
        )

    def inverse_sup_norm(self) -> float:
        return max(
            float(np.max([np.linalg.norm(np.linalg.inv(v), 2) for v in self.values[r]]))
            for r in self.radii
        )


def _split_fit(values: dict, radii: tuple, K: int) -> dict:
    """Laurent coefficients: k >= 0 from the outer circle, k < 0 from the inner.

    Using the boundary circle on the side where each tail decays keeps the
    fit well conditioned throughout the closed sub-annulus.
    """
    r_in, _, r_out = radii
    pos = _fit_laurent(values[r_out], r_out, 0, K)
    neg = _fit_laurent(values[r_in], r_in, -K, -1)
    out = dict(neg)
    out.update(pos)
    return out


def _looks_real_on_axis(values: dict, radii: tuple, N: int) -> bool:
    # samples at theta = 0 and theta = pi sit on the real axis
    for r in radii:
        for idx in (0, N // 2):
            if np.max(np.abs(values[r][idx].imag)) > 1e-9 * max(
                1.0, float(np.max(np.abs(values[r][idx])))
            ):
                return False
    return True


# ---------------------------------------------------------------------------
# Cauchy splitting


def cauchy_split(C) -> tuple[dict, dict]:
    """Partition Laurent data into (inner, outer) parts: A has the powers
    k >= 0 (holomorphic in the disk), B the powers k < 0 (holomorphic outside,
    vanishing at infinity); A + B = C exactly on coefficients."""
    coeffs = C.coeffs if isinstance(C, AnnulusMatrixFunction) else C
    A = {k: v for k, v in coeffs.items() if k >= 0}
    B = {k: v for k, v in coeffs.items() if k < 0}
    return A, B


# ---------------------------------------------------------------------------
# Newton factorization of near-identity functions


@dataclass
class NewtonResult:
    F_values: dict  # circle radius -> samples (N, n, n)
    G_values: dict
    residuals: list
    radii: tuple
    N: int


def _sup_dev_from_identity(values: dict, radii, n) -> float:
    E = np.eye(n)
    return max(
        float(np.max([np.linalg.norm(v - E, 2) for v in values[r]])) for r in radii
    )


def newton_factorize(
    H,
    annulus: AnnulusSpec,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> "FactorizationResult":
    """Factor a near-identity H = F G by Newton iteration on the annulus.

    Precondition: sup ||H - E|| <= 1 / N(q) where N(q) = 2 ceil L(q) and
    L(q) = 2q + 3 bounds the norm of the linearized (Cauchy-split) solution
    operator.  Residuals decay quadratically; the iteration aborts after
    `max_iter` rounds.
    """
    amf = H if isinstance(H, AnnulusMatrixFunction) else AnnulusMatrixFunction.build(H, annulus)
    res = _newton_core(amf, annulus, tol, max_iter)
    return _package_result(amf, annulus, res, Q_applied=None, M_coeffs={0: np.eye(amf.n)})


def _newton_core(amf: AnnulusMatrixFunction, annulus: AnnulusSpec, tol: float, max_iter: int) -> NewtonResult:
    n, N, radii = amf.n, amf.N, amf.radii
    E = np.eye(n)
    thresh = 1.0 / _newton_threshold(annulus.q)
    dev = _sup_dev_from_identity(amf.values, radii, n)
    if dev > thresh:
        raise NotCloseEnough(
            f"||H - E|| = {dev:.3g} exceeds the admissible threshold {thresh:.3g}"
        )
    c = annulus.center
    thetas = 2 * math.pi * np.arange(N) / N
    ts_rel = {r: r * np.exp(1j * thetas) for r in radii}

    Hc = {r: amf.values[r].copy() for r in radii}
    F = {r: np.tile(E, (N, 1, 1)).astype(complex) for r in radii}
    G = {r: np.tile(E, (N, 1, 1)).astype(complex) for r in radii}
    residuals = []
    K = amf.cutoff
    for _ in range(max_iter):
        dev = _sup_dev_from_identity(Hc, radii, n)
        residuals.append(dev)
        if dev <= tol:
            break
        Cvals = {r: Hc[r] - E for r in radii}
        ccoef = _split_fit(Cvals, radii, K)
        Acoef, _ = cauchy_split(ccoef)
        Avals = {r: _eval_laurent(Acoef, ts_rel[r]) for r in radii}
        Bvals = {r: Cvals[r] - Avals[r] for r in radii}  # exact complement on samples
        for r in radii:
            EA = E + Avals[r]
            EB = E + Bvals[r]
            F[r] = F[r] @ EA
            G[r] = EB @ G[r]
            Hc[r] = np.linalg.solve(EA, Hc[r]) @ np.linalg.inv(EB)
        if amf.real_on_axis:
            for r in radii:
                F[r] = _symmetrize_axis(F[r])
                G[r] = _symmetrize_axis(G[r])
                Hc[r] = _symmetrize_axis(Hc[r])
    else:
        raise NoConvergence(f"no convergence after {max_iter} Newton rounds (residual {dev:.3g})")
    return NewtonResult(F, G, residuals, radii, N)


def _symmetrize_axis(vals: np.ndarray) -> np.ndarray:
    """Enforce f(conj t) = conj f(t) on an equispaced circle sample set."""
    rev = np.roll(vals[::-1], 1, axis=0)  # index k -> -k mod N
    return (vals + rev.conj()) / 2


# ---------------------------------------------------------------------------
# rational truncation


def rational_truncate(H, annulus: AnnulusSpec, accuracy: float):
    """Laurent-polynomial M with ||M H^{-1} - E|| <= accuracy on R'.

    Truncates the Laurent expansion of H at the smallest symmetric degree d
    whose tail, multiplied by the measured sup of H^{-1}, meets the target.
    Returns (M coefficients dict, d, achieved bound estimate).
    """
    amf = H if isinstance(H, AnnulusMatrixFunction) else AnnulusMatrixFunction.build(H, annulus)
    qprime = amf.inverse_sup_norm()
    r_in, _, r_out = amf.radii
    K = amf.cutoff
    norms = {k: float(np.linalg.norm(c, 2)) for k, c in amf.coeffs.items()}

    def tail(d: int) -> float:
        t = 0.0
        for k, nk in norms.items():
            if abs(k) > d:
                t += nk * max(r_in**k, r_out**k)
        return t

    for d in range(0, K + 1):
        if tail(d) * qprime <= accuracy:
            M = {k: c.copy() for k, c in amf.coeffs.items() if abs(k) <= d}
            if amf.real_on_axis:
                M = {k: c.real.astype(complex) for k, c in M.items()}
            # verify on doubled sample resolution
            achieved = _verify_truncation(amf, M)
            if achieved <= accuracy * 1.5:
                return M, d, achieved
    raise AccuracyUnreachable(
        f"accuracy {accuracy:.3g} not reachable with {K} Laurent coefficients"
    )


def _verify_truncation(amf: AnnulusMatrixFunction, M: dict) -> float:
    worst = 0.0
    N2 = 2 * amf.N
    thetas = 2 * math.pi * np.arange(N2) / N2
    for r in amf.radii:
        ts = amf.annulus.center + r * np.exp(1j * thetas)
        if amf.fn is not None:
            Hv = np.array([np.asarray(amf.fn(t), dtype=complex) for t in ts])
        else:
            Hv = _eval_laurent(amf.coeffs, ts - amf.annulus.center)
        Mv = _eval_laurent(M, r * np.exp(1j * thetas))
        dev = Mv @ np.linalg.inv(Hv) - np.eye(amf.n)
        worst = max(worst, float(np.max([np.linalg.norm(v, 2) for v in dev])))
    return worst


# ---------------------------------------------------------------------------
# pole expulsion


def expel_pole(G_values: dict, radii: tuple, thetas: np.ndarray, z: complex, zbar: Optional[complex] = None, tol: float = 1e-6):
    """Left-multiply G by the Birkhoff corrector Q_z removing the zero of det G at z.

    The corrector is diag(|z|/(t-z), 1, .., 1) * C with C built from the unit
    left null vector of G(z) over identity rows (dropping the coordinate of
    largest overlap).  For a conjugate pair (z, zbar) of a real-on-axis G the
    first row becomes |z| (v/(t-z) + conj(v)/(t-zbar)), keeping Q real on R.
    Returns (Q as a callable, updated G samples).
    """
    Gz = _eval_from_samples(G_values, radii, thetas, z)
    n = Gz.shape[0]
    u, s, vh = np.linalg.svd(Gz)
    if s[-1] > tol * max(s[0], 1.0):
        raise NotAZero(f"det G({z}) is not numerically singular (sigma_min = {s[-1]:.3g})")
    v = u[:, -1].conj()  # row vector with v @ G(z) ~ 0
    drop = int(np.argmax(np.abs(v)))
    rows = [v] + [np.eye(n)[j] for j in range(n) if j != drop]
    if zbar is not None:
        vbar = v.conj()

        def Q(t):
            w = abs(z) * (v / (t - z) + vbar / (t - zbar))
            return np.vstack([w] + rows[1:])

    else:

        def Q(t):
            return np.vstack([rows[0] * (abs(z) / (t - z))] + rows[1:])

    newG = {}
    for r in radii:
        ts = r * np.exp(1j * thetas)
        Qv = np.array([Q(t) for t in ts])
        newG[r] = Qv @ G_values[r]
    return Q, newG


def _eval_from_samples(values: dict, radii: tuple, thetas: np.ndarray, z: complex) -> np.ndarray:
    """Evaluate at z from the Laurent refit of the sampled data."""
    K = len(thetas) // 4
    coeffs = _split_fit(values, radii, K)
    return _eval_laurent(coeffs, np.array([z]))[0]


# ---------------------------------------------------------------------------
# full factorization


@dataclass
class FactorizationResult:
    """H = F * G on the annulus, with G's polynomial parts at infinity.

    F is holomorphic and invertible in the inner domain, G in the outer one
    with a pole of order <= nu at infinity; `gpoly` and `gpoly_inv` are the
    matrix coefficients of the positive powers of G and G^{-1}.
    """

    annulus: AnnulusSpec
    radii: tuple
    N: int
    F_values: dict
    G_values: dict
    F_taylor: dict
    G_laurent: dict
    Ginv_laurent: dict
    gpoly: list
    gpoly_inv: list
    constraint: float
    constraint_budget: float
    residual: float
    newton_residuals: list
    real_on_axis: bool
    expelled: list
    Q_factors: list = field(default_factory=list)
    Gp_laurent: dict = field(default_factory=dict)
    M_coeffs: dict = field(default_factory=dict)

    @property
    def nu(self) -> int:
        return max(len(self.gpoly), len(self.gpoly_inv))

    def eval_G_composite(self, t) -> np.ndarray:
        """G = (prod Q) G' M evaluated through its factors.

        Stable anywhere in the outer domain except right at the expelled
        points (where the pole/zero cancellation is only analytic)."""
        ts = np.atleast_1d(np.asarray(t, dtype=complex)) - self.annulus.center
        Gp = _eval_laurent(self.Gp_laurent, ts)
        Mv = _eval_laurent(self.M_coeffs, ts)
        out = Gp @ Mv
        if self.Q_factors:
            n = out.shape[-1]
            P = np.empty_like(out)
            for i, tt in enumerate(ts):
                acc = np.eye(n, dtype=complex)
                for Q in self.Q_factors:
                    acc = Q(tt) @ acc
                P[i] = acc
            out = P @ out
        return out if np.ndim(t) else out[0]

    def eval_F(self, t) -> np.ndarray:
        rel = np.asarray(t, dtype=complex) - self.annulus.center
        return _eval_laurent(self.F_taylor, rel)

    def eval_G(self, t) -> np.ndarray:
        rel = np.asarray(t, dtype=complex) - self.annulus.center
        return _eval_laurent(self.G_laurent, rel)

    def eval_Ginv(self, t) -> np.ndarray:
        rel = np.asarray(t, dtype=complex) - self.annulus.center
        return _eval_laurent(self.Ginv_laurent, rel)

    def eval_Gdot(self, t) -> np.ndarray:
        rel = complex(t) - self.annulus.center
        n = self.eval_F(self.annulus.center).shape[-1]
        out = np.zeros((n, n), dtype=complex)
        for k, c in self.G_laurent.items():
            if k != 0:
                out += k * rel ** (k - 1) * c
        return out

    def to_json(self) -> dict:
        def mats(lst):
            return [[[ [x.real, x.imag] for x in row] for row in m] for m in lst]

        return {
            "format": 1,
            "annulus": self.annulus.to_json(),
            "nu": self.nu,
            "gpoly": mats([np.asarray(g) for g in self.gpoly]),
            "gpoly_inv": mats([np.asarray(g) for g in self.gpoly_inv]),
            "constraint": self.constraint,
            "constraint_budget": self.constraint_budget,
            "residual": self.residual,
            "newton_residuals": self.newton_residuals,
            "real_on_axis": self.real_on_axis,
            "expelled": [[z.real, z.imag] for z in self.expelled],
        }


def _package_result(amf, annulus, newton: NewtonResult, Qs, M_coeffs, expelled=()) -> FactorizationResult:
    n, N, radii = amf.n, newton.N, newton.radii
    thetas = 2 * math.pi * np.arange(N) / N
    K = amf.cutoff
    r_in, r_mid, r_out = radii
    # G' from the Newton stage carries only powers <= 0 (E + decaying tail);
    # positive frequencies in its fit are aliasing noise and are dropped.
    gp_fit = _split_fit(newton.G_values, radii, K)
    Gp_laurent = {k: v for k, v in gp_fit.items() if k <= 0}

    def P_eval(t):
        out = np.eye(n, dtype=complex)
        for Q in Qs:
            out = Q(t) @ out
        return out

    def G_eval(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=complex))
        Gp = _eval_laurent(Gp_laurent, ts)
        Mv = _eval_laurent(M_coeffs, ts)
        out = np.array([P_eval(t) for t in ts]) @ Gp @ Mv if Qs else Gp @ Mv
        return out

    F_values = {}
    G_values = {}
    for r in radii:
        ts = r * np.exp(1j * thetas)
        Mv = _eval_laurent(M_coeffs, ts)
        Gv = newton.G_values[r] @ Mv
        Fv = newton.F_values[r]
        if Qs:
            Pv = np.array([P_eval(t) for t in ts])
            Gv = Pv @ Gv
            Fv = Fv @ np.linalg.inv(Pv)
        if amf.real_on_axis:
            # symmetrize only when the data is already conjugate-symmetric;
            # forcing it otherwise would break the product F G = H
            dev = max(
                float(np.max(np.abs(_symmetrize_axis(Gv) - Gv))),
                float(np.max(np.abs(_symmetrize_axis(Fv) - Fv))),
            )
            if dev < 1e-6 * max(1.0, float(np.max(np.abs(Gv)))):
                Gv = _symmetrize_axis(Gv)
                Fv = _symmetrize_axis(Fv)
        F_values[r], G_values[r] = Fv, Gv

    F_taylor = _fit_laurent(F_values[r_out], r_out, 0, K)  # holomorphic inside
    # fit the final G on a circle clear of the expelled points
    RX = max(2.0 * annulus.b, *(1.5 * abs(z) for z in expelled)) if expelled else 2.0 * annulus.b
    if expelled:
        for _ in range(64):
            if min(abs(RX - abs(z)) for z in expelled) > 0.05 * RX:
                break
            RX *= 1.07
    NX = max(N, 256)
    tsX = RX * np.exp(2j * math.pi * np.arange(NX) / NX)
    GX = G_eval(tsX)
    GXi = np.linalg.inv(GX)
    KX = NX // 4
    G_laurent = _fit_laurent(GX, RX, -KX, KX)
    Ginv_laurent = _fit_laurent(GXi, RX, -KX, KX)
    if amf.real_on_axis:
        F_taylor = {k: v.real.astype(complex) for k, v in F_taylor.items()}
        G_laurent = {k: v.real.astype(complex) for k, v in G_laurent.items()}
        Ginv_laurent = {k: v.real.astype(complex) for k, v in Ginv_laurent.items()}
    scaleX = max(1.0, float(np.max(np.abs(GX))), float(np.max(np.abs(GXi))))

    def poly_parts(coeffs):
        sig = [
            k
            for k in coeffs
            if k > 0 and np.max(np.abs(coeffs[k])) * RX**k > 1e-9 * scaleX
        ]
        top = max(sig, default=0)
        return [np.asarray(coeffs.get(k, np.zeros((n, n)))) for k in range(1, top + 1)]

    gpoly = poly_parts(G_laurent)
    gpoly_inv = poly_parts(Ginv_laurent)
    supF = max(
        float(np.max([np.linalg.norm(v, 2) + np.linalg.norm(np.linalg.inv(v), 2) for v in F_values[r]]))
        for r in radii
    )
    # bounded parts: G minus its polynomial tail is holomorphic outside the
    # inner circle and bounded at infinity, so its sup sits on that circle
    ts_in = r_in * np.exp(1j * thetas)
    Gt_in = G_values[r_in] - sum(
        np.power.outer(ts_in, k + 1)[:, None, None] * g for k, g in enumerate(gpoly)
    )
    Gti_in = np.linalg.inv(G_values[r_in]) - sum(
        np.power.outer(ts_in, k + 1)[:, None, None] * g for k, g in enumerate(gpoly_inv)
    )
    supG = float(
        np.max([np.linalg.norm(v, 2) for v in Gt_in])
        + np.max([np.linalg.norm(v, 2) for v in Gti_in])
    )
    polysum = sum(np.linalg.norm(g, 2) for g in gpoly) + sum(
        np.linalg.norm(g, 2) for g in gpoly_inv
    ) + max(len(gpoly), len(gpoly_inv))
    qprime = int(math.ceil(amf.sup_norm() + amf.inverse_sup_norm()))
    residual = 0.0
    for r in radii:
        dev = F_values[r] @ G_values[r] - amf.values[r]
        residual = max(residual, float(np.max(np.abs(dev))))
    return FactorizationResult(
        annulus=annulus,
        radii=radii,
        N=N,
        F_values=F_values,
        G_values=G_values,
        F_taylor=F_taylor,
        G_laurent=G_laurent,
        Ginv_laurent=Ginv_laurent,
        gpoly=gpoly,
        gpoly_inv=gpoly_inv,
        constraint=float(max(supF, supG, polysum)),
        constraint_budget=float(_fact_const(annulus.q, max(qprime, 1))),
        residual=residual,
        newton_residuals=newton.residuals,
        real_on_axis=amf.real_on_axis,
        expelled=list(expelled),
        Q_factors=list(Qs or []),
        Gp_laurent=Gp_laurent,
        M_coeffs=M_coeffs,
    )


def _det_m_roots(M: dict, n: int, r_mid: float) -> list:
    """Zeros of det M(t) for a Laurent-polynomial M.

    Candidates come from an FFT-fitted polynomial for t^(nd) det M; every
    candidate is Newton-polished on det M itself and kept only when the
    determinant genuinely collapses there (relative to the matrix scale),
    which filters the spurious ring of roots that noise-level leading
    coefficients produce for high truncation degrees.
    """
    dM = max((abs(k) for k in M), default=0)
    deg = 2 * n * dM
    if deg == 0:
        return []
    Ns = max(4 * deg + 4, 64)
    ths = 2 * math.pi * np.arange(Ns) / Ns
    ts = r_mid * np.exp(1j * ths)
    Mv = _eval_laurent(M, ts)
    detv = np.linalg.det(Mv)
    poly_vals = detv * ts ** (n * dM)
    ch = np.fft.fft(poly_vals) / Ns
    coeffs = np.array([ch[k % Ns] / r_mid**k for k in range(deg + 1)])
    lead = np.max(np.abs(coeffs))
    keep = np.where(np.abs(coeffs) > 1e-13 * lead)[0]
    if len(keep):
        coeffs = coeffs[: keep[-1] + 1]
    if len(coeffs) <= 1:
        return []
    cands = list(np.roots(coeffs[::-1]))

    def detM(z):
        return complex(np.linalg.det(_eval_laurent(M, np.array([z]))[0]))

    def mscale(z):
        Mz = _eval_laurent(M, np.array([z]))[0]
        return float(np.linalg.norm(Mz, 2)) ** n

    out = []
    for z in cands:
        z = complex(z)
        ok = False
        for _ in range(60):
            f = detM(z)
            sc_z = max(mscale(z), 1e-300)
            if abs(f) < 1e-10 * sc_z:
                ok = True
                break
            h = 1e-7 * (1.0 + abs(z))
            df = (detM(z + h) - detM(z - h)) / (2 * h)
            if abs(df) < 1e-300:
                break
            step = f / df
            if abs(step) > 0.5 * (1.0 + abs(z)):
                step *= 0.5 * (1.0 + abs(z)) / abs(step)
            z = z - step
        if not ok:
            continue
        if any(abs(z - w) < 1e-6 * (1.0 + abs(w)) for w in out):
            continue
        out.append(z)
    return out


def birkhoff_factorize(H, annulus: AnnulusSpec, tol: float = 1e-10) -> FactorizationResult:
    """Full factorization H = F G for an invertible H bounded on the annulus.

    Pipeline: rational truncation M ~ H, Newton factorization of the
    near-identity H M^{-1} = F G', then expulsion of every zero of det M
    lying in the outer domain (null vectors computed through G' and the
    exact coefficients of M), so that G = Q G' M is holomorphically
    invertible there with its only pole at infinity.
    """
    amf = H if isinstance(H, AnnulusMatrixFunction) else AnnulusMatrixFunction.build(H, annulus)
    n, N = amf.n, amf.N
    thetas = 2 * math.pi * np.arange(N) / N
    thresh = 1.0 / _newton_threshold(annulus.q)
    M, d, ach = rational_truncate(amf, annulus, thresh / 4)
    Kvals = {}
    for r in amf.radii:
        ts = r * np.exp(1j * thetas)
        Mv = _eval_laurent(M, ts)
        Kvals[r] = amf.values[r] @ np.linalg.inv(Mv)
    Kam = AnnulusMatrixFunction(
        annulus, amf.radii, Kvals, _split_fit(Kvals, amf.radii, amf.cutoff), n, N, amf.cutoff, None, amf.real_on_axis
    )
    newton = _newton_core(Kam, annulus, min(tol * 1e-2, 1e-12), 50)
    gp_fit = _split_fit(newton.G_values, amf.radii, amf.cutoff)
    Gp_laurent = {k: v for k, v in gp_fit.items() if k <= 0}

    a1 = amf.radii[0]
    roots = _det_m_roots(M, n, amf.radii[1])
    outer = sorted(
        (complex(z) for z in roots if abs(z) > a1 * (1 + 1e-8)),
        key=lambda z: (abs(z), math.atan2(z.imag, z.real)),
    )

    Qs: list = []
    expelled: list = []

    def prefix_eval(t):
        out = np.eye(n, dtype=complex)
        for Q in Qs:
            out = Q(t) @ out
        return out

    def composite_eval(z: complex) -> np.ndarray:
        Gpz = _eval_laurent(Gp_laurent, np.array([z]))[0]
        Mz = _eval_laurent(M, np.array([z]))[0]
        return prefix_eval(z) @ Gpz @ Mz

    def null_row_from_M(z: complex):
        Mz = _eval_laurent(M, np.array([z]))[0]
        u, s, vh = np.linalg.svd(Mz)
        if s[-1] > 1e-6 * max(s[0], 1e-300):
            return None  # not a genuine determinant zero: skip
        uvec = u[:, -1].conj()  # left null row of M(z)
        Gpz = _eval_laurent(Gp_laurent, np.array([z]))[0]
        v = uvec @ np.linalg.inv(Gpz) @ np.linalg.inv(prefix_eval(z))
        return v / np.linalg.norm(v)

    def null_row_svd(z: complex):
        Gz = composite_eval(z)
        u, s, vh = np.linalg.svd(Gz)
        if s[-1] > 1e-5 * max(s[0], 1.0):
            return None
        v = u[:, -1].conj()
        return v / np.linalg.norm(v)

    def realize(v: np.ndarray) -> np.ndarray:
        phase = v[np.argmax(np.abs(v))]
        v = (v / phase * abs(phase)).real.astype(complex)
        return v / np.linalg.norm(v)

    pending = [(z, "from-M") for z in outer]
    guard = 0
    while pending:
        guard += 1
        if guard > 4 * len(outer) + 16:
            break
        z, mode = pending.pop(0)
        pair = None
        if amf.real_on_axis and abs(z.imag) > 1e-9 * max(1.0, abs(z)):
            for j, (w, md) in enumerate(pending):
                if md == mode and abs(w - z.conjugate()) < 1e-6 * max(1.0, abs(z)):
                    pair = pending.pop(j)[0]
                    break
        if mode == "from-M":
            v = null_row_from_M(z)
        else:
            v = null_row_svd(z)
        if v is None:
            continue
        if amf.real_on_axis and pair is None and abs(z.imag) <= 1e-9 * max(1.0, abs(z)):
            v = realize(v)
        if pair is not None:
            # the pair corrector's determinant vanishes at the real point
            # t* = Re(v_d conj(z)) / Re(v_d), v_d the dropped coordinate of
            # the null row; prefer a drop with no finite zero or with t*
            # outside the inner disk, and expel the spawned zero afterwards
            zb = pair
            choices = sorted(range(n), key=lambda j: -abs(v[j]))
            pick = None
            for j in choices:
                if abs(v[j]) < 0.1 * abs(v[choices[0]]):
                    break
                re_vd = v[j].real
                if abs(re_vd) < 1e-12 * abs(v[j]):
                    pick = (j, None)  # constant numerator: no spurious zero
                    break
                tstar = (v[j] * np.conj(z)).real / re_vd
                if abs(tstar) > a1 * (1 + 1e-6):
                    pick = (j, float(tstar))
                    break
            if pick is None:
                # no safe drop: fall back to two complex single expulsions
                pending.insert(0, (zb, "svd"))
                pair = None
            else:
                drop, tstar = pick
                eye_rows = [np.eye(n)[k] for k in range(n) if k != drop]
                vbar = v.conj()

                def Q(t, v=v, vbar=vbar, z=z, zb=zb, rows=eye_rows):
                    w = abs(z) * (v / (t - z) + vbar / (t - zb))
                    return np.vstack([w] + rows)

                Qs.append(Q)
                expelled.extend([z, zb])
                if tstar is not None:
                    pending.append((complex(tstar), "svd"))
                continue
        drop = int(np.argmax(np.abs(v)))
        eye_rows = [np.eye(n)[k] for k in range(n) if k != drop]

        def Q(t, v=v, z=z, rows=eye_rows):
            return np.vstack([v * (abs(z) / (t - z))] + rows)

        Qs.append(Q)
        expelled.append(z)

    return _package_result(amf, annulus, newton, Qs, M, expelled)


# ---------------------------------------------------------------------------
# isomonodromic surgery


def _translate_special(sys: SpecialSystem, c: complex) -> SpecialSystem:
    """Rewrite the system in u = t - c (u-plane poles at t_j - c)."""
    if c == 0:
        return sys
    fuch = sys.fuchsian
    pts = [complex(p) - c for p in fuch.np_points()]
    coeffs = sys.polypart.np_coeffs()
    deg = len(coeffs) - 1
    newc = []
    for i in range(deg + 1):
        acc = np.zeros((fuch.n, fuch.n), dtype=complex)
        for k in range(i, deg + 1):
            acc += math.comb(k, i) * (c ** (k - i)) * coeffs[k]
        newc.append(acc.tolist())
    return SpecialSystem.make(pts, fuch.np_residues().tolist(), newc or None, sys.growth_exponent)


def _matrix_log_slit(M: np.ndarray) -> tuple[np.ndarray, float]:
    """(2 pi i)^{-1} log M with the branch cut along the ray avoiding Spec M.

    The slit direction is chosen on a 64-direction scan maximizing the
    angular distance to the eigenvalues; eigen-decomposition realizes the
    contour-integral functional calculus on the slit annulus.
    """
    lam, W = np.linalg.eig(M)
    if np.min(np.abs(lam)) < 1e-13:
        raise SpectralSlitFailure("monodromy numerically singular")
    args = np.angle(lam)
    best_phi, best_d = None, -1.0
    for k in range(64):
        phi = -math.pi + 2 * math.pi * k / 64
        d = np.min(np.abs(np.angle(np.exp(1j * (args - phi)))))
        if d > best_d:
            best_d, best_phi = d, phi
    if best_d < 1e-9:
        raise SpectralSlitFailure("no meridian separates the monodromy spectrum")
    # log with arguments in (phi, phi + 2 pi)
    shifted = np.mod(args - best_phi, 2 * math.pi) + best_phi
    logs = np.log(np.abs(lam)) + 1j * shifted
    A0 = W @ np.diag(logs / (2j * math.pi)) @ np.linalg.inv(W)
    return A0, best_phi


def isomonodromic_surgery(sys: SpecialSystem, annulus: AnnulusSpec, tol: float = 1e-10) -> tuple[SpecialSystem, dict]:
    """Replace a system by one isomonodromic to it inside the annulus's disk.

    The multiplicative jump between the system's solution and the power
    function t^{A0} built from the middle-circle monodromy is single-valued
    on the annulus; its factorization H = F G glues -F^{-1} F' + F^{-1} A F
    (inside) with G' G^{-1} + t^{-1} G A0 G^{-1} (outside) into a rational
    coefficient matrix whose finite poles are exactly the original ones
    inside the disk, with residues F^{-1}(t_j) A_j F(t_j).

    Returns (new system, report dict).
    """
    from . import analytic as an

    fuch = sys.fuchsian
    n = fuch.n
    c = annulus.center
    work = _translate_special(sys, c)
    pts = work.fuchsian.np_points()
    inside = [j for j, p in enumerate(pts) if abs(p) < annulus.a]
    outside = [j for j, p in enumerate(pts) if abs(p) > annulus.b]
    if len(inside) + len(outside) != len(pts):
        raise ValueError("annulus is not free of singular points")

    a2, b2 = annulus.dprime
    rho = (a2 + b2) / 2
    base = rho  # positive real base point on the middle circle
    loop = PathSpec.circle(0.0, rho)
    M = an.integrate_along(work, loop, tol=tol)
    A0, slit_phi = _matrix_log_slit(M)
    real_mode = bool(
        np.max(np.abs(work.fuchsian.np_residues().imag)) < 1e-12
        and np.max(np.abs(pts.imag)) < 1e-10
        and (len(work.polypart.coeffs) == 0 or np.max(np.abs(work.polypart.np_coeffs().imag)) < 1e-12)
    )
    if real_mode:
        if np.max(np.abs(A0.imag)) > 1e-6:
            real_mode = False
        else:
            A0 = A0.real.astype(complex)

    # sample H = X (t^{A0})^{-1} on three circles of R''
    radii = (a2, math.sqrt(a2 * b2), b2)
    N = 512
    thetas = 2 * math.pi * np.arange(N) / N
    values = {}
    from scipy.linalg import expm

    for r in radii:
        sol0 = an.integrate_along(work, PathSpec.segment(base, r), tol=tol)
        circle = PathSpec.circle(0.0, r)
        spath = an.solution_on_path(work, circle, X0=sol0, tol=tol)
        Xs = spath(thetas / (2 * math.pi))
        lnts = math.log(r) + 1j * thetas
        Hs = np.empty((N, n, n), dtype=complex)
        for k in range(N):
            Xp = expm(A0 * lnts[k])
            Hs[k] = Xs[k] @ np.linalg.inv(Xp)
        values[r] = Hs
    K = N // 4
    sub_annulus = AnnulusSpec.make(a2, b2, 0.0)  # width parameter recomputed
    amf = AnnulusMatrixFunction(
        sub_annulus,
        radii,
        values,
        _split_fit(values, radii, K),
        n,
        N,
        K,
        None,
        real_mode and _looks_real_on_axis(values, radii, N),
    )
    fact = birkhoff_factorize(amf, sub_annulus, tol=max(tol, 1e-10))

    # residues of the new system at the retained singular points
    new_pts = []
    new_res = []
    for j in inside:
        tj = pts[j]
        Ftj = fact.eval_F(tj + 0j)
        Aj = work.fuchsian.np_residues()[j]
        Bj = np.linalg.solve(Ftj, Aj @ Ftj)
        if real_mode:
            Bj = Bj.real.astype(complex)
            new_pts.append(tj.real)
        else:
            new_pts.append(tj)
        new_res.append(Bj.tolist())

    # polynomial part of B(t) = G' G^{-1} + t^{-1} G A0 G^{-1} near infinity:
    # subtract the pole terms and read Taylor coefficients on a big circle
    RB = 2.0 * annulus.b
    NB = 256
    thB = 2 * math.pi * np.arange(NB) / NB
    tsB = RB * np.exp(1j * thB)
    Bv = np.empty((NB, n, n), dtype=complex)
    for k, t in enumerate(tsB):
        G = fact.eval_G(t + 0j)
        Gi = np.linalg.inv(G)
        Gd = fact.eval_Gdot(t)
        Bv[k] = Gd @ Gi + (1.0 / t) * (G @ A0 @ Gi)
    for idx, j in enumerate(inside):
        Bj = np.asarray(new_res[idx], dtype=complex)
        Bv -= Bj[None, :, :] / (tsB - pts[j])[:, None, None]
    hatB = np.fft.fft(Bv, axis=0) / NB
    scaleB = max(1.0, float(np.max(np.abs(Bv))))
    coeffsB = [hatB[k] / RB**k for k in range(NB // 4)]
    signif = [
        k for k, ck in enumerate(coeffsB) if np.max(np.abs(ck)) * RB**k > 1e-9 * scaleB
    ]
    poly = coeffsB[: max(signif) + 1] if signif else []
    if real_mode:
        poly = [p.real.astype(complex) for p in poly]

    norm_total = sum(np.linalg.norm(np.asarray(m), 2) for m in new_res) + sum(
        np.linalg.norm(p, 2) for p in poly
    )
    r_new = int(math.ceil(norm_total + np.linalg.norm(A0, 2) + fact.nu + n))
    r_new = max(r_new, len(poly) - 1 if poly else 0, sys.growth_exponent)
    out = SpecialSystem.make(
        new_pts, new_res, [p.tolist() for p in poly] or None, r_new
    )
    if c != 0:
        out = _translate_special(out, -c)
    report = {
        "inside_points": [complex(pts[j] + c) for j in inside],
        "expelled": fact.expelled,
        "factorization_residual": fact.residual,
        "constraint": fact.constraint,
        "constraint_budget": fact.constraint_budget,
        "log_norm": float(np.linalg.norm(A0, 2)),
        "slit_angle": slit_phi,
        "growth_exponent": r_new,
        "real_mode": real_mode,
    }
    return out, report
