"""Closed-form solution of the dividend game with an uncertain stopper.

Everything here is analytic or reduces to one-dimensional quadrature and
root-finding: the scale-type function psi, the single-player barrier B and
value V, the belief boundary c and its inverse b, the oblique-reflection
density lambda with its antiderivative, the running-max transfer map f, and
the equilibrium value surfaces v (controller) and u (stopper).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "ModelParams",
    "MonotoneMap",
    "ClosedForm",
    "solve_roots",
    "generator_apply",
]

# Nodes of the lambda table on [0, B].  Per-interval quadratic reconstruction
# of the antiderivative keeps the interpolation error below ~1e-13, well
# inside the 1e-10 budget for cumulative integrals.
_TABLE_INTERVALS = 32768
# Below this x the direct formula for lambda loses digits to cancellation;
# a cubic series in x takes over.  At the seam both branches are accurate to
# ~5e-11 relative (series truncation grows like x^3, cancellation like 1/x).
_LAMBDA_SERIES_CUTOFF = 2e-4


@dataclass(frozen=True)
class ModelParams:
    """Market constants: drift, volatility and discount rate, all positive."""

    mu: float
    sigma: float
    r: float

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "r"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


def solve_roots(params: ModelParams) -> tuple[float, float]:
    """Roots zeta1 < 0 < zeta2 of zeta^2 + (2 mu/sigma^2) zeta - 2 r/sigma^2 = 0.

    Uses the cancellation-free form for the small positive root.
    """
    s2 = params.sigma * params.sigma
    q = params.mu / s2
    c0 = 2.0 * params.r / s2
    disc = math.sqrt(q * q + c0)
    zeta1 = -q - disc
    zeta2 = c0 / (q + disc)
    return zeta1, zeta2


def generator_apply(cf: "ClosedForm", g, x: float) -> float:
    """Apply (sigma^2/2) d2 + mu d1 - r to g at x.

    ``g`` must be a callable returning the triple (value, first derivative,
    second derivative) at its argument.
    """
    g0, g1, g2 = g(x)
    p = cf.params
    return 0.5 * p.sigma * p.sigma * g2 + p.mu * g1 - p.r * g0


@dataclass(frozen=True)
class MonotoneMap:
    """Tabulated strictly monotone scalar map with a certified inverse.

    ``xs``/``ys`` are the ordered abscissa/ordinate samples, ``direction`` is
    ``"increasing"`` or ``"decreasing"``.  ``roundtrip_error`` is the maximum
    of |evaluate(inverse(y)) - y| observed at certification time.
    """

    xs: np.ndarray
    ys: np.ndarray
    direction: str
    roundtrip_error: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        dy = np.diff(self.ys)
        if self.direction == "increasing":
            ok = np.all(dy > 0)
        elif self.direction == "decreasing":
            ok = np.all(dy < 0)
        else:
            raise ValueError(f"unknown direction {self.direction!r}")
        if not ok:
            raise ValueError("samples are not strictly monotone in the declared direction")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.xs[0]), float(self.xs[-1])

    def evaluate(self, x):
        return np.interp(x, self.xs, self.ys)

    def inverse(self, y):
        if self.direction == "increasing":
            return np.interp(y, self.ys, self.xs)
        return np.interp(y, self.ys[::-1], self.xs[::-1])

    def certify(self, n: int = 4096) -> "MonotoneMap":
        """Return a copy carrying the measured inverse round-trip error."""
        lo = min(self.ys[0], self.ys[-1])
        hi = max(self.ys[0], self.ys[-1])
        probe = np.linspace(lo, hi, n)
        err = float(np.max(np.abs(self.evaluate(self.inverse(probe)) - probe)))
        return MonotoneMap(self.xs, self.ys, self.direction, err)


class ClosedForm:
    """Solved model: derived constants plus all solution functions.

    Immutable after construction; safe to share across workers.  Build with
    :meth:`solve`.
    """

    def __init__(self, params: ModelParams, _internal: bool = False):
        if not _internal:
            raise TypeError("use ClosedForm.solve(params)")
        self.params = params

    @classmethod
    def solve(cls, params: ModelParams) -> "ClosedForm":
        cf = cls(params, _internal=True)
        z1, z2 = solve_roots(params)
        cf.zeta1 = z1
        cf.zeta2 = z2
        # Barrier = inflection point of psi: zeta2^2 e^{z2 B} = zeta1^2 e^{z1 B}.
        cf.B = (math.log(z1 * z1) - math.log(z2 * z2)) / (z2 - z1)
        cf.psi1_B = cf.psi_d1(cf.B)
        cf.p_hat = 1.0 - cf.psi1_B
        cf._build_tables()
        return cf

    # -- scale-type function ------------------------------------------------

    def psi(self, x):
        """Increasing solution of the killed generator equation, psi(0)=0, psi'(0)=1."""
        x = self._check_nonneg(x)
        return (np.exp(self.zeta2 * x) - np.exp(self.zeta1 * x)) / (self.zeta2 - self.zeta1)

    def psi_d1(self, x):
        x = self._check_nonneg(x)
        return (
            self.zeta2 * np.exp(self.zeta2 * x) - self.zeta1 * np.exp(self.zeta1 * x)
        ) / (self.zeta2 - self.zeta1)

    def psi_d2(self, x):
        x = self._check_nonneg(x)
        return (
            self.zeta2 ** 2 * np.exp(self.zeta2 * x) - self.zeta1 ** 2 * np.exp(self.zeta1 * x)
        ) / (self.zeta2 - self.zeta1)

    def psi_triple(self, x):
        """(psi, psi', psi'') at x, for use with :func:`generator_apply`."""
        return self.psi(x), self.psi_d1(x), self.psi_d2(x)

    @staticmethod
    def _check_nonneg(x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("x must be nonnegative")
        return x if x.ndim else float(x)

    # -- single-player value -------------------------------------------------

    def value_single(self, x):
        """Value of the single-player extraction problem (reflection at B)."""
        x = self._check_nonneg(x)
        xa = np.asarray(x, dtype=float)
        below = np.minimum(xa, self.B)
        out = self.psi(below) / self.psi1_B + np.maximum(xa - self.B, 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def value_single_d1(self, x):
        x = self._check_nonneg(x)
        xa = np.asarray(x, dtype=float)
        out = np.where(xa <= self.B, self.psi_d1(np.minimum(xa, self.B)) / self.psi1_B, 1.0)
        return float(out) if np.ndim(x) == 0 else out

    # -- belief boundary -----------------------------------------------------

    def boundary_c(self, x):
        """Belief boundary c(x) = (V'(x)-1)/V'(x) on [0, B], zero beyond B."""
        x = self._check_nonneg(x)
        xa = np.asarray(x, dtype=float)
        out = np.where(xa < self.B, 1.0 - self.psi1_B / self.psi_d1(np.minimum(xa, self.B)), 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def boundary_c_d1(self, x):
        """Analytic derivative c'(x) = psi'(B) psi''(x) / psi'(x)^2; c'(B)=0."""
        x = self._check_nonneg(x)
        xa = np.asarray(x, dtype=float)
        inside = np.minimum(xa, self.B)
        out = np.where(
            xa <= self.B, self.psi1_B * self.psi_d2(inside) / self.psi_d1(inside) ** 2, 0.0
        )
        return float(out) if np.ndim(x) == 0 else out

    def boundary_b(self, p: float) -> float:
        """Inverse boundary b(p) on [0, p_hat], extended by 0 above p_hat.

        Bracketed root-finding on psi'(b) = psi'(B)/(1-p); the bracket [0, B]
        is guaranteed because psi' decreases strictly there.
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        if p >= self.p_hat:
            return 0.0
        if p == 0.0:
            return self.B
        target = self.psi1_B / (1.0 - p)
        return brentq(lambda x: self.psi_d1(x) - target, 0.0, self.B, xtol=1e-14, rtol=8.9e-16)

    def boundary_b_map(self, n: int = 2048) -> MonotoneMap:
        """Precomputed monotone boundary table for hot loops.

        Tabulated in the smooth direction x -> c(x) on n uniform nodes
        (b itself has a square-root cusp at p -> 0 where c'(B) = 0, so no
        p-direction table of this size can be uniformly accurate in x).
        Query b(p) through ``inverse``; accuracy is certified in the
        probability coordinate: c(inverse(p)) = p to about 1e-7.
        """
        n = max(n, 4096)  # 1e-7 needs at least this density
        xs = np.linspace(0.0, self.B, n)
        cs = self.boundary_c(xs)
        cs[-1] = 0.0
        return MonotoneMap(xs, cs, "decreasing").certify()

    # -- reflection density lambda and its antiderivative ---------------------

    def lambda_fn(self, x):
        """Oblique-reflection density lambda(x) = psi(x)/(x psi'(x)) - 1, lambda(0)=0."""
        x = self._check_nonneg(x)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xa)
        small = xa < _LAMBDA_SERIES_CUTOFF
        if np.any(small):
            out[small] = self._lambda_series(xa[small])
        big = ~small
        if np.any(big):
            xb = xa[big]
            out[big] = self.psi(xb) / (xb * self.psi_d1(xb)) - 1.0
        return float(out[0]) if np.ndim(x) == 0 else out

    def _lambda_series(self, x):
        # psi = x + m x^2 + c3 x^3 + c4 x^4 + ...  with m = (z1+z2)/2 etc.;
        # lambda = -(m x + 2 c3 x^2 + 3 c4 x^3) / (1 + 2 m x + 3 c3 x^2 + 4 c4 x^3)
        z1, z2 = self.zeta1, self.zeta2
        m = 0.5 * (z1 + z2)
        q = -z1 * z2
        c3 = (4.0 * m * m + q) / 6.0
        c4 = m * (2.0 * m * m + q) / 6.0
        num = -(m * x + 2.0 * c3 * x ** 2 + 3.0 * c4 * x ** 3)
        den = 1.0 + 2.0 * m * x + 3.0 * c3 * x ** 2 + 4.0 * c4 * x ** 3
        return num / den

    def _build_tables(self) -> None:
        # Cumulative antiderivative of lambda on a uniform grid over [0, B],
        # one 5-point Gauss-Legendre panel per interval, accumulated in
        # extended precision.  Feeds both cumulative_Lambda and the f map.
        n = _TABLE_INTERVALS
        h = self.B / n
        gx, gw = np.polynomial.legendre.leggauss(5)
        lefts = np.arange(n) * h
        pts = lefts[:, None] + 0.5 * h * (gx[None, :] + 1.0)
        vals = self.lambda_fn(pts.ravel()).reshape(n, 5)
        panel = 0.5 * h * vals @ gw
        cum = np.concatenate(([0.0], np.cumsum(panel.astype(np.longdouble)))).astype(float)
        self._tab_h = h
        self._tab_lam = self.lambda_fn(np.linspace(0.0, self.B, n + 1))
        self._tab_Lam = cum
        self._tab_G = np.linspace(0.0, self.B, n + 1) + cum  # G(x) = x + Lambda0(x)

    def lambda0_cum(self, x):
        """Antiderivative Lambda0(x) = integral of lambda over [0, x], x in [0, B]."""
        x = self._check_nonneg(x)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xa > self.B * (1.0 + 1e-12)):
            raise ValueError("x must lie in [0, B]")
        xa = np.minimum(xa, self.B)
        h = self._tab_h
        idx = np.minimum((xa / h).astype(int), _TABLE_INTERVALS - 1)
        u = xa - idx * h
        lam0 = self._tab_lam[idx]
        lam1 = self._tab_lam[idx + 1]
        out = self._tab_Lam[idx] + lam0 * u + 0.5 * (lam1 - lam0) * u * u / h
        return float(out[0]) if np.ndim(x) == 0 else out

    def cumulative_Lambda(self, p: float, x) -> float:
        """Integral of lambda over [b(p), x]; rejects x outside [b(p), B]."""
        bp = self.boundary_b(p)
        xa = np.asarray(x, dtype=float)
        if np.any(xa < bp - 1e-12) or np.any(xa > self.B + 1e-12):
            raise ValueError(f"x must lie in [b(p), B] = [{bp}, {self.B}]")
        out = self.lambda0_cum(np.clip(xa, 0.0, self.B)) - self.lambda0_cum(bp)
        return float(out) if np.ndim(x) == 0 else out

    def _g_inverse(self, targets):
        """Solve G(x) = x + Lambda0(x) = target on [0, B] (vectorized).

        Locates the table interval by binary search, then solves the local
        quadratic model of G exactly.  Targets above G(B) clamp to B.
        """
        t = np.atleast_1d(np.asarray(targets, dtype=float))
        out = np.empty_like(t)
        hi_mask = t >= self._tab_G[-1]
        out[hi_mask] = self.B
        lo_mask = t <= 0.0
        out[lo_mask] = 0.0
        mid = ~(hi_mask | lo_mask)
        if np.any(mid):
            tm = t[mid]
            idx = np.searchsorted(self._tab_G, tm, side="right") - 1
            idx = np.clip(idx, 0, _TABLE_INTERVALS - 1)
            h = self._tab_h
            lam0 = self._tab_lam[idx]
            lam1 = self._tab_lam[idx + 1]
            # (a/2) u^2 + b u + c = 0 with a = (lam1-lam0)/h, b = 1+lam0,
            # c = G_i - target; stable smaller-root formula.
            a = (lam1 - lam0) / h
            b = 1.0 + lam0
            c = self._tab_G[idx] - tm
            disc = np.sqrt(np.maximum(b * b - 2.0 * a * c, 0.0))
            u = np.where(np.abs(a) > 1e-300, -2.0 * c / (b + disc), -c / b)
            out[mid] = idx * h + u
        return float(out[0]) if np.ndim(targets) == 0 else out

    def f_map(self, p: float) -> MonotoneMap:
        """Transfer map f for the running maximum: solves Lambda(f)+f = y.

        Strictly increasing on [b(p), Lambda(B)+B], constant B above.  The
        returned MonotoneMap carries dense samples; exact evaluation is
        available through :meth:`f_eval`.
        """
        bp = self.boundary_b(p)
        y_top = self.y_cap(p)
        ys = np.linspace(bp, y_top, 4097)
        xs = self.f_eval(p, ys)
        xs[-1] = self.B
        # beyond the cap np.interp clamps to the last ordinate, i.e. f = B
        return MonotoneMap(ys, xs, "increasing")

    def f_eval(self, p: float, y):
        """Evaluate f at y >= b(p): root of Lambda0(x) + x = y + Lambda0(b(p))."""
        bp = self.boundary_b(p)
        ya = np.asarray(y, dtype=float)
        if np.any(ya < bp - 1e-9):
            raise ValueError("y must be >= b(p)")
        out = self._g_inverse(ya + self.lambda0_cum(bp))
        return float(out) if np.ndim(y) == 0 else out

    def y_cap(self, p: float) -> float:
        """Level Lambda(B)+B where f reaches its cap (in running-max units)."""
        return self.cumulative_Lambda(p, self.B) + self.B

    # -- equilibrium values ----------------------------------------------------

    def eq_value_v(self, x: float, p: float) -> float:
        """Controller's equilibrium value v(x, p)."""
        self._check_state(x, p)
        bp = self.boundary_b(p)
        if x <= bp:
            return (1.0 - p) * self.value_single(x)
        return (1.0 - p) * self.value_single(bp) + (x - bp)

    def eq_value_u(self, x: float, p: float) -> float:
        """Stopper's equilibrium value u(x, p); u(0, p) = 0 even when b(p) = 0."""
        self._check_state(x, p)
        bp = self.boundary_b(p)
        if x == 0.0:
            return 0.0
        if x <= bp:
            return bp * self.psi(x) / self.psi(bp)
        return bp

    def eq_value_u_dx(self, x: float, p: float) -> float:
        # boundary queries (x = b(p) up to root-finding precision) take the
        # interior branch
        self._check_state(x, p)
        bp = self.boundary_b(p)
        if x <= bp + 1e-9 and bp > 0.0:
            return bp * self.psi_d1(min(x, bp)) / self.psi(bp)
        return 0.0

    def eq_value_u_dp(self, x: float, p: float) -> float:
        """du/dp for x <= b(p), via b'(p) = 1/c'(b(p))."""
        self._check_state(x, p)
        bp = self.boundary_b(p)
        if not (0.0 < x <= bp + 1e-9):
            return 0.0
        x = min(x, bp)
        pb = self.psi(bp)
        num = pb - bp * self.psi_d1(bp)
        return self.psi(x) * num / (pb * pb) / self.boundary_c_d1(bp)

    def reflection_direction(self, x: float) -> tuple[float, float]:
        """Unit vector (u_p, -u_x) at the boundary point (x, c(x)), 0 < x < B."""
        if not 0.0 < x < self.B:
            raise ValueError("x must lie strictly inside (0, B)")
        px = self.psi(x)
        p1 = self.psi_d1(x)
        cd = self.boundary_c_d1(x)
        u_x = x * p1 / px
        u_p = (px - x * p1) / (px * cd)
        norm = math.hypot(u_p, u_x)
        return u_p / norm, -u_x / norm

    @staticmethod
    def _check_state(x: float, p: float) -> None:
        if x < 0:
            raise ValueError("x must be nonnegative")
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    # -- serialization -----------------------------------------------------------

    def summary(self) -> dict:
        return {
            "mu": self.params.mu,
            "sigma": self.params.sigma,
            "r": self.params.r,
            "zeta1": self.zeta1,
            "zeta2": self.zeta2,
            "B": self.B,
            "p_hat": self.p_hat,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def __repr__(self) -> str:
        return (
            f"ClosedForm(mu={self.params.mu}, sigma={self.params.sigma}, r={self.params.r}, "
            f"B={self.B:.6f}, p_hat={self.p_hat:.6f})"
        )
