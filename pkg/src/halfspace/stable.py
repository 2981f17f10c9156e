"""Stable-law primitives.

Conventions
-----------
A 1D stable law is parametrised by its characteristic function

    E exp(itX) = exp{ -c|t|^alpha (1 - i beta sgn(t) tan(pi alpha / 2)) },

with (alpha, beta) restricted to the admissible set

    A = {0<a<1, |b|<1} u {1<a<2, |b|<=1} u {a=1, b=0} u {a=2, b=0}.

The isotropic d-dimensional law has characteristic function exp(-c|t|^alpha).

Densities are obtained by numerical Fourier inversion: composite
Gauss-Legendre panels sized to the local oscillation, truncated where the
characteristic function falls below 1e-17, with a panel-doubling error check.
Beyond ``80 * c^(1/alpha)`` the convergent quadrature is replaced by the
termwise Hankel transform of the CF expansion (four terms), whose leading
term is the Levy-measure asymptote  c * C(d, alpha) * r^(-d-alpha).

The scaling sequence of a walk is driven by the truncated second moment

    mu(u) = u^{-2} E[|X|^2; |X| <= u],        c_n = sup{u : mu(u) > 1/n},

the last-exceedance reading of inf{u : mu(u) <= 1/n} (the raw infimum is 0
below the minimal step magnitude).  With this normalisation S(n)/c_n
converges to a stable law of scale ``limit_scale(d, alpha)``; see that
function for the constant.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ParameterError, QuadratureError

_CF_LOG_CUTOFF = 39.1  # exp(-39.1) ~ 1e-17
_TAIL_SWITCH = 80.0  # radii beyond 80 * c^(1/alpha) use the tail series


def admissible(alpha: float, beta: float) -> bool:
    """Membership in the admissible (alpha, beta) set A."""
    if 0 < alpha < 1:
        return abs(beta) < 1
    if 1 < alpha < 2:
        return abs(beta) <= 1
    if alpha == 1 or alpha == 2:
        return beta == 0
    return False


def positivity_rho(alpha: float, beta: float) -> float:
    """Positivity parameter rho = lim P(S_1(n) > 0).

    Equal to 1/2 + (1/(pi*alpha)) * arctan(beta * tan(pi*alpha/2)) for
    alpha != 1, and 1/2 for alpha = 1.  Always strictly inside (0, 1) on
    the admissible set.
    """
    if not admissible(alpha, beta):
        raise ParameterError(f"(alpha={alpha}, beta={beta}) outside the admissible set")
    if alpha == 1 or beta == 0:
        return 0.5
    rho = 0.5 + math.atan(beta * math.tan(math.pi * alpha / 2.0)) / (math.pi * alpha)
    if not (0.0 < rho < 1.0):  # pragma: no cover
        raise ParameterError(f"rho={rho} escaped (0,1); inadmissible parameters")
    return rho


@dataclass(frozen=True)
class StableParams:
    """Parameters of the limiting stable vector.

    ``spectral`` is either the string 'isotropic' or a tuple of
    (unit-vector, weight) atoms approximating the spherical measure.  When
    atoms are given, both open half spaces {v1 > 0} and {v1 <= 0} must carry
    positive weight, otherwise the first coordinate cannot oscillate.
    """

    alpha: float
    beta: float = 0.0
    scale_c: float = 1.0
    dim: int = 1
    spectral: object = "isotropic"

    def __post_init__(self):
        if not admissible(self.alpha, self.beta):
            raise ParameterError(
                f"(alpha={self.alpha}, beta={self.beta}) outside the admissible set"
            )
        if self.scale_c <= 0:
            raise ParameterError("scale_c must be positive")
        if self.dim < 1:
            raise ParameterError("dim >= 1 required")
        if self.spectral != "isotropic":
            atoms = tuple(self.spectral)  # type: ignore[arg-type]
            wsum = 0.0
            up = down = 0.0
            for vec, w in atoms:
                if w < 0:
                    raise ParameterError("spectral weights must be nonnegative")
                v = np.asarray(vec, dtype=float)
                if abs(float(v @ v) - 1.0) > 1e-9:
                    raise ParameterError("spectral atoms must be unit vectors")
                wsum += w
                if v[0] > 0:
                    up += w
                else:
                    down += w
            if abs(wsum - 1.0) > 1e-12:
                raise ParameterError("spectral weights must sum to 1")
            if up <= 0 or down <= 0:
                raise ParameterError(
                    "spectral measure must charge both half spaces {v1>0}, {v1<=0}"
                )
            object.__setattr__(self, "spectral", atoms)

    @property
    def rho(self) -> float:
        return positivity_rho(self.alpha, self.beta)

    @property
    def isotropic(self) -> bool:
        return self.spectral == "isotropic"


def stable_cf_1d(t: float, params: StableParams) -> complex:
    """1D stable characteristic function at frequency t."""
    if params.dim != 1:
        raise ParameterError("stable_cf_1d requires dim=1 parameters")
    if t == 0.0:
        return 1.0 + 0.0j
    a, b, c = params.alpha, params.beta, params.scale_c
    skew = 0.0 if a == 1.0 else b * math.tan(math.pi * a / 2.0)
    mag = c * abs(t) ** a
    return cmath.exp(complex(-mag, mag * skew * math.copysign(1.0, t)))


def surface_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1}."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def levy_tail_constant(d: int, alpha: float) -> float:
    """C(d, alpha) with  g_{alpha,c,d}(z) ~ c * C(d,alpha) * |z|^{-d-alpha}.

    C(d, alpha) = alpha * 2^{alpha-1} * Gamma((d+alpha)/2)
                  / (pi^{d/2} * Gamma(1 - alpha/2)).
    """
    if not (0 < alpha < 2):
        raise ParameterError("tail constant defined for alpha in (0,2)")
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.gamma((d + alpha) / 2.0)
        / (math.pi ** (d / 2.0) * math.gamma(1.0 - alpha / 2.0))
    )


def limit_scale(d: int, alpha: float) -> float:
    """Scale c of the limit CF exp(-c|t|^alpha) for a mu-normalised walk.

    With c_n defined through mu(c_n) = 1/n one has n P(|X| > c_n x) ->
    ((2-alpha)/alpha) x^{-alpha}, hence the limiting Levy measure has radial
    intensity (2-alpha)/S_{d-1} * r^{-d-alpha} and

        c = (2 - alpha) / (S_{d-1} * C(d, alpha)).

    Limits: alpha=2 gives 1/2 (unit-variance CLT normalisation), and
    (d=1, alpha=1) gives pi/2.
    """
    if alpha == 2.0:
        return 0.5
    return (2.0 - alpha) / (surface_area(d) * levy_tail_constant(d, alpha))


# -- density inversion ------------------------------------------------------


def _panels(T: float, rate: float, n_gl: int, max_panels: int = 8000):
    """Composite Gauss-Legendre nodes/weights on [0, T].

    ``rate`` is the fastest phase rate of the integrand; panels are sized to
    hold at most ~1.5 oscillation periods.
    """
    width = min(T / 8.0, 9.42 / max(rate, 1e-12))
    n_panels = int(np.clip(math.ceil(T / width), 16, max_panels))
    edges = np.linspace(0.0, T, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(n_gl)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = (mid + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def _density1d_batch(
    us: np.ndarray, alpha: float, beta: float, c: float, n_gl: int = 24
) -> np.ndarray:
    """Fourier inversion of the 1D CF at each u (convergent region)."""
    us = np.asarray(us, dtype=float)
    T = (_CF_LOG_CUTOFF / c) ** (1.0 / alpha)
    skew = 0.0 if alpha == 1.0 else c * beta * math.tan(math.pi * alpha / 2.0)
    rate = float(np.abs(us).max(initial=0.0)) + 1.0
    if skew != 0.0:
        t_probe = T / 2000.0 if alpha < 1.0 else T
        rate += abs(skew) * alpha * t_probe ** (alpha - 1.0)
    nodes, weights = _panels(T, rate, n_gl)
    envelope = np.exp(-c * nodes**alpha) * weights
    phase = np.outer(us, nodes) - (skew * nodes**alpha)[None, :]
    return (np.cos(phase) @ envelope) / math.pi


def _radial_batch(
    rs: np.ndarray, alpha: float, c: float, d: int, n_gl: int = 24
) -> np.ndarray:
    """Hankel inversion of exp(-c t^alpha) at each radius (convergent region)."""
    rs = np.asarray(rs, dtype=float)
    T = (_CF_LOG_CUTOFF / c) ** (1.0 / alpha)
    rate = float(rs.max(initial=0.0)) + 1.0
    nodes, weights = _panels(T, rate, n_gl)
    env = np.exp(-c * nodes**alpha) * weights
    out = np.empty_like(rs)
    tiny = rs < 1e-9
    if np.any(tiny):
        g0 = (
            surface_area(d)
            * math.gamma(d / alpha)
            / (alpha * c ** (d / alpha) * (2.0 * math.pi) ** d)
        )
        out[tiny] = g0
    big = ~tiny
    if np.any(big):
        r = rs[big]
        if d == 1:
            vals = (np.cos(np.outer(r, nodes)) @ env) / math.pi
        elif d == 2:
            vals = (special.j0(np.outer(r, nodes)) @ (env * nodes)) / (2.0 * math.pi)
        elif d == 3:
            vals = (np.sin(np.outer(r, nodes)) @ (env * nodes)) / (
                2.0 * math.pi**2 * r
            )
        else:
            nu = d / 2.0 - 1.0
            mat = special.jv(nu, np.outer(r, nodes))
            vals = (
                (mat @ (env * nodes ** (d / 2.0)))
                * r ** (1.0 - d / 2.0)
                / (2.0 * math.pi) ** (d / 2.0)
            )
        out[big] = vals
    return out


def _tail_series(
    rs: np.ndarray, alpha: float, c: float, d: int, terms: int = 4
) -> np.ndarray:
    """Large-radius expansion: sum_j (-1)^j c^j/j! 2^{alpha j} pi^{-d/2}
    Gamma((d+alpha j)/2) / Gamma(-alpha j / 2) * r^{-d-alpha j}.

    The reciprocal-Gamma factor kills even-j terms at alpha=1 and the whole
    series at alpha=2.  Term 1 equals the Levy asymptote c*C(d,alpha)*r^{-d-a}.
    """
    rs = np.asarray(rs, dtype=float)
    acc = np.zeros_like(rs)
    for j in range(1, terms + 1):
        coef = (
            (-1.0) ** j
            * c**j
            / math.factorial(j)
            * 2.0 ** (alpha * j)
            * math.pi ** (-d / 2.0)
            * math.gamma((d + alpha * j) / 2.0)
            * special.rgamma(-alpha * j / 2.0)
        )
        acc += coef * rs ** (-d - alpha * j)
    return acc


def _density_with_tail(
    xs: np.ndarray,
    alpha: float,
    c: float,
    d: int,
    beta: float = 0.0,
    check: bool = True,
    rtol: float = 1e-9,
) -> np.ndarray:
    """Radial/1D density values with quadrature below the tail switch and the
    asymptotic series above it; optional panel-doubling verification."""
    xs = np.asarray(xs, dtype=float)
    if d > 1 and beta != 0.0:
        raise ParameterError("skewness is a 1D concept here")
    r_switch = _TAIL_SWITCH * c ** (1.0 / alpha)
    out = np.empty_like(xs)
    absx = np.abs(xs)
    near = absx <= r_switch
    far = ~near
    if np.any(near):
        pts = xs[near] if (d == 1 and beta != 0.0) else absx[near]
        if d == 1:
            vals = _density1d_batch(pts, alpha, beta, c)
            if check:
                again = _density1d_batch(pts, alpha, beta, c, n_gl=36)
                _verify(vals, again, rtol)
        else:
            vals = _radial_batch(pts, alpha, c, d)
            if check:
                again = _radial_batch(pts, alpha, c, d, n_gl=36)
                _verify(vals, again, rtol)
        out[near] = vals
    if np.any(far):
        if alpha == 2.0:
            out[far] = 0.0  # double-underflow region for the Gaussian branch
        elif d == 1 and beta != 0.0:
            lead = c * levy_tail_constant(1, alpha) * absx[far] ** (-1.0 - alpha)
            side = np.where(xs[far] > 0, 1.0 + beta, 1.0 - beta)
            out[far] = side * lead
        else:
            out[far] = _tail_series(absx[far], alpha, c, d)
    return out


def _verify(a: np.ndarray, b: np.ndarray, rtol: float) -> None:
    scale = np.maximum(np.abs(b), 1e-12)
    err = float(np.max(np.abs(a - b) / scale))
    if err > rtol * 100:
        raise QuadratureError(
            f"density quadrature did not stabilise (rel. drift {err:.2e})", err
        )


def stable_density_1d(u: float, params: StableParams, check: bool = True) -> float:
    """Density of the 1D stable law at u, by Fourier inversion.

    Raises :class:`QuadratureError` when panel doubling moves the value, and
    clamps negative excursions below 1e-8 in magnitude to zero.
    """
    if params.dim != 1:
        raise ParameterError("stable_density_1d requires dim=1 parameters")
    val = float(
        _density_with_tail(
            np.array([u]), params.alpha, params.scale_c, 1, params.beta, check
        )[0]
    )
    if val < -1e-8:
        raise QuadratureError(f"density came out negative ({val:.3e}) at u={u}", abs(val))
    return max(val, 0.0)


def isotropic_stable_density(
    z, alpha: float, scale_c: float = 1.0, check: bool = True
) -> float:
    """Isotropic d-dimensional stable density at the point z (d from len(z)).

    Depends on z only through |z|; d=1 reduces to the symmetric 1D density.
    """
    if not (0 < alpha < 2):
        raise ParameterError("isotropic density implemented for alpha in (0,2)")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d = z.size
    r = float(np.sqrt((z * z).sum()))
    val = float(_density_with_tail(np.array([r]), alpha, scale_c, d, 0.0, check)[0])
    if val < -1e-8:
        raise QuadratureError(f"density came out negative ({val:.3e}) at |z|={r}", abs(val))
    return max(val, 0.0)


def isotropic_density_profile(
    rs: np.ndarray, alpha: float, scale_c: float, dim: int, check: bool = False
) -> np.ndarray:
    """Vectorised radial profile of the isotropic density (hot-path helper)."""
    return np.maximum(
        _density_with_tail(np.asarray(rs, dtype=float), alpha, scale_c, dim, 0.0, check),
        0.0,
    )


class CachedStableDensity1D:
    """Cubic-spline interpolant of a 1D stable density.

    Used where a density is evaluated thousands of times (meander-density
    quadratures); accuracy ~1e-7 absolute inside +-span, exact tail formula
    outside.
    """

    def __init__(self, params: StableParams, points: int = 2401):
        from scipy.interpolate import CubicSpline

        self.params = params
        a, b, c = params.alpha, params.beta, params.scale_c
        self.span = _TAIL_SWITCH * c ** (1.0 / a)
        grid = np.linspace(-self.span, self.span, points)
        vals = _density_with_tail(grid, a, c, 1, b, check=False)
        self._spline = CubicSpline(grid, np.maximum(vals, 0.0))
        spot = self._spline(np.array([0.0, 1.0, -1.0]))
        ref = _density_with_tail(np.array([0.0, 1.0, -1.0]), a, c, 1, b, check=True)
        _verify(spot, ref, 1e-6)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.empty_like(u)
        inside = np.abs(u) <= self.span
        if np.any(inside):
            out[inside] = np.maximum(self._spline(u[inside]), 0.0)
        if np.any(~inside):
            p = self.params
            out[~inside] = _density_with_tail(
                u[~inside], p.alpha, p.scale_c, 1, p.beta, check=False
            )
        return float(out[0]) if scalar else out


# -- truncated second moment and the scaling sequence -----------------------


def mu_truncated(u: float, step) -> float:
    """mu(u) = u^{-2} E[|X|^2; |X| <= u]: exact sum for lattice steps,
    closed form / quadrature for parametric continuous ones."""
    return step.mu(u)


def scaling_c(n: int, step) -> float:
    """Scaling point c_n = sup{u : mu(u) > 1/n} for the given step law."""
    return step.scaling_c(n)


@dataclass
class ScalingSeq:
    """Cached scaling sequence for one step law (thread-safe memoisation)."""

    source: object
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()

    def __call__(self, n: int) -> float:
        n = int(n)
        with self._lock:
            hit = self.cache.get(n)
        if hit is not None:
            return hit
        val = self.source.scaling_c(n)
        with self._lock:
            self.cache[n] = val
        return val

    def precompute(self, ns) -> None:
        for n in ns:
            self(n)

    def check_bracketing(self, n: int, eps: float = 1e-6) -> bool:
        """mu(c_n) <= 1/n and mu(c_n - eps) > 1/n (when the exceedance set
        is nonempty; degenerate small-n edges return False)."""
        c = self(n)
        if c <= eps:
            return False
        return self.source.mu(c) <= 1.0 / n + 1e-15 and self.source.mu(c - eps) > 1.0 / n


# -- tail profile ------------------------------------------------------------


@dataclass(frozen=True)
class TailProfile:
    """Regularly varying jump-tail envelope.

    ``phi`` has index -alpha; a1 * phi(t) <= P(|X| > t) <= a2 * phi(t) on the
    working range, and g(r) = phi(r) / r^d bounds single-point hit
    probabilities.  g must be strictly positive and nonincreasing beyond r0.
    """

    phi: object  # callable t -> phi(t)
    alpha: float
    dim: int
    a1: float = 1.0
    a2: float = 1.0
    r0: float = 1.0

    def __post_init__(self):
        if self.a1 <= 0 or self.a2 < self.a1:
            raise ParameterError("need 0 < a1 <= a2")
        probe = np.geomspace(max(self.r0, 1e-6), max(self.r0, 1e-6) * 1e6, 60)
        g = np.array([self.g(r) for r in probe])
        if np.any(g <= 0) or np.any(np.diff(g) > 1e-15 * g[:-1]):
            raise ParameterError("g(r) = phi(r)/r^d must be positive nonincreasing beyond r0")

    @classmethod
    def power(cls, scale: float, alpha: float, dim: int, a1: float = 1.0, a2: float = 1.0):
        """phi(t) = scale * t^{-alpha}."""
        return cls(
            phi=lambda t, s=scale, a=alpha: s * float(t) ** (-a),
            alpha=alpha,
            dim=dim,
            a1=a1,
            a2=a2,
        )

    def g(self, r: float) -> float:
        if r <= 0:
            raise ParameterError("g(r) requires r > 0")
        return self.phi(r) / r**self.dim

    def band(self, t: float) -> tuple[float, float]:
        v = self.phi(t)
        return self.a1 * v, self.a2 * v
