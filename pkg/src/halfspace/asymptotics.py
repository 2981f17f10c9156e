"""Evaluators for the asymptotic skeletons of the killed-walk quantities.

Each predictor returns the structural right-hand side of a limit statement
with every computable factor in place; absolute constants the theory does
not identify are left out and fitted by the harness as measured/predicted
ratios (see :func:`halfspace.harness.fit_constant`).

Predictors:

* local limit (normal deviations):  P(tau_x > n) * c_n^{-d} * p_M((y-x)/c_n)
* boundary (small deviations):      V(x1) H(y1) g((0, w)/c_n) / (n c_n^d)
  (non-lattice variant integrates H over [y1, y1+1))
* large-jump bound:                 g(|x-y|) H(y1+1) V(x1+1)
* Green function near the boundary: V(x1) H(y1) / |x-y|^d  *  radial integral
* meander density via the time decomposition of the first factorisation
  epoch (see :func:`predict_meander_density`).

The context bundles the limit law (scale fixed by the mu-normalisation, see
:func:`halfspace.stable.limit_scale`), the scaling sequence, ladder tables
(or fitted regularly varying surrogates, which are flagged whenever used),
and the jump-tail profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate

from .errors import FitError, ParameterError, ResolutionError
from .ladder import LadderData
from .mc import MeanderHistogram
from .stable import (
    CachedStableDensity1D,
    ScalingSeq,
    StableParams,
    TailProfile,
    isotropic_density_profile,
    stable_density_1d,
)


@dataclass
class RVSurrogate:
    """Regularly varying stand-in kappa * u^index for a renewal function."""

    kappa: float
    index: float

    def __call__(self, u: float) -> float:
        return 0.0 if u <= 0 else self.kappa * float(u) ** self.index


@dataclass
class AsymptoticContext:
    """Inputs shared by the asymptotic evaluators."""

    params: StableParams
    scaling: ScalingSeq
    ladder: LadderData | None = None
    tail: TailProfile | None = None
    surrogate_H: RVSurrogate | None = None
    surrogate_V: RVSurrogate | None = None
    survival_fn: object = None  # (x1, n) -> P(tau_x > n)
    flags: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.ladder is None and (self.surrogate_H is None or self.surrogate_V is None):
            raise ParameterError("need ladder tables or both renewal surrogates")

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def H(self, u: float) -> float:
        if self.ladder is not None and u <= self.ladder.U:
            return self.ladder.H(u)
        self.flags["surrogate_used"] = True
        if self.surrogate_H is None:
            raise ParameterError(f"H({u}) beyond tables and no surrogate given")
        return self.surrogate_H(u)

    def V(self, u: float) -> float:
        if self.ladder is not None and u <= self.ladder.U:
            return self.ladder.V(u)
        self.flags["surrogate_used"] = True
        if self.surrogate_V is None:
            raise ParameterError(f"V({u}) beyond tables and no surrogate given")
        return self.surrogate_V(u)

    def H_integral(self, a: float, b: float) -> float:
        if self.ladder is not None and b <= self.ladder.U:
            return self.ladder.H_integral(a, b)
        self.flags["surrogate_used"] = True
        if self.surrogate_H is None:
            raise ParameterError("H integral beyond tables and no surrogate given")
        s = self.surrogate_H
        return s.kappa * (b ** (s.index + 1) - a ** (s.index + 1)) / (s.index + 1)

    def transverse_density(self, w) -> float:
        """Limit density at the point (0, w): first coordinate pinned to 0."""
        if self.dim == 1:
            if not hasattr(self, "_g0"):
                self._g0 = stable_density_1d(0.0, self.params)
            return self._g0
        if not self.params.isotropic:
            raise ParameterError("pinned-coordinate density implemented for isotropic laws")
        w = np.atleast_1d(np.asarray(w, dtype=float))
        r = float(np.sqrt((w * w).sum()))
        return float(
            isotropic_density_profile(
                np.array([r]), self.alpha, self.params.scale_c, self.dim
            )[0]
        )


def predict_normal_dev(ctx: AsymptoticContext, x, y, n: int, meander_density,
                       survival: float | None = None) -> float:
    """Local-limit skeleton P(tau_x > n) * c_n^{-d} * p_M((y - x)/c_n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    c_n = ctx.scaling(n)
    if survival is None:
        if ctx.survival_fn is None:
            raise ParameterError("pass survival= or set ctx.survival_fn")
        survival = ctx.survival_fn(x[0], n)
    z = (y - x) / c_n
    dens = float(np.asarray(meander_density(z if z.size > 1 else z[0])))
    if dens < 0:
        raise ParameterError("meander density must be nonnegative")
    return survival * dens / c_n**ctx.dim


def predict_small_dev(ctx: AsymptoticContext, x, y, n: int, lattice: bool = True) -> float:
    """Boundary-regime skeleton V(x1) H(y1) g((0, w)/c_n) / (n c_n^d)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    c_n = ctx.scaling(n)
    h_factor = ctx.H(y[0]) if lattice else ctx.H_integral(y[0], y[0] + 1.0)
    dens = ctx.transverse_density((y[1:] - x[1:]) / c_n)
    return ctx.V(x[0]) * h_factor * dens / (n * c_n**ctx.dim)


def bound_large_dev(ctx: AsymptoticContext, x, y) -> float:
    """Large-jump bound skeleton g(|x-y|) H(y1+1) V(x1+1) (constant-free)."""
    if ctx.tail is None:
        raise ParameterError("context has no jump-tail profile")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(y - x))
    return ctx.tail.g(r) * ctx.H(y[0] + 1.0) * ctx.V(x[0] + 1.0)


def radial_green_integral(ctx: AsymptoticContext, w, rtol: float = 1e-9) -> float:
    """integral_0^infty g((0, w t)) t^{d-1} dt for the isotropic limit law.

    Converges because the density decays like t^{-d-alpha}; divergent for
    d = 1 or w = 0, which raise.  Evaluated on a compactified grid
    t = s/(1-s)^kappa with composite Gauss-Legendre panels and a
    panel-doubling error check.
    """
    if ctx.dim < 2:
        raise ParameterError("radial integral needs d >= 2 (transverse coordinates)")
    if not ctx.params.isotropic:
        raise ParameterError("radial integral implemented for isotropic laws")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        raise ParameterError("radial integral diverges at w = 0")

    alpha, c, d = ctx.alpha, ctx.params.scale_c, ctx.dim
    kappa = max(2.0, 2.0 / alpha)

    def eval_with(n_panels: int) -> float:
        gl_x, gl_w = np.polynomial.legendre.leggauss(24)
        edges = np.linspace(0.0, 1.0, n_panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        s = (mid + half * gl_x[None, :]).ravel()
        ws = (half * np.broadcast_to(gl_w, (n_panels, 24))).ravel()
        one = 1.0 - s
        t = s / one**kappa
        jac = (one + kappa * s) / one ** (kappa + 1.0)
        dens = isotropic_density_profile(wn * t, alpha, c, d)
        return float(np.sum(ws * dens * t ** (d - 1.0) * jac))

    v1 = eval_with(48)
    v2 = eval_with(96)
    if abs(v1 - v2) > max(rtol * 100 * abs(v2), 1e-14):
        from .errors import QuadratureError

        raise QuadratureError(
            f"radial integral did not stabilise ({v1!r} vs {v2!r})", abs(v1 - v2)
        )
    return v2


def predict_green(ctx: AsymptoticContext, x, y, lattice: bool = True) -> float:
    """Green skeleton V(x1) H(y1) |x-y|^{-d} * radial integral (constant-free)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(y - x))
    if r == 0.0:
        raise ParameterError("x and y must differ")
    h_factor = ctx.H(y[0]) if lattice else ctx.H_integral(y[0], y[0] + 1.0)
    w = (y[1:] - x[1:]) / r
    return ctx.V(x[0]) * h_factor / r**ctx.dim * radial_green_integral(ctx, w)


# -- meander density from the histogram --------------------------------------


def meander_density_from_histogram(hist: MeanderHistogram, bandwidth_bins: float = 2.0):
    """Gaussian-kernel smoothing of a meander histogram into a density callable.

    The bandwidth is ``bandwidth_bins`` bin widths per axis; the returned
    callable accepts a point (or array of points) in scaled coordinates.
    """
    centers = hist.bin_centers()
    widths = [float(e[1] - e[0]) for e in hist.edges]
    masses = hist.masses
    nz = np.argwhere(masses > 0.0)
    atoms = np.stack(
        [centers[ax][nz[:, ax]] for ax in range(hist.dim)], axis=1
    )
    weights = masses[tuple(nz.T)]
    bw = np.array([bandwidth_bins * w for w in widths])

    def density(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != hist.dim:
            z = z.reshape(-1, hist.dim)
        diff = (z[:, None, :] - atoms[None, :, :]) / bw[None, None, :]
        kern = np.exp(-0.5 * (diff**2).sum(axis=2)) / (
            (2.0 * math.pi) ** (hist.dim / 2.0) * np.prod(bw)
        )
        out = kern @ weights
        return out if out.size > 1 else float(out[0])

    return density


def predict_meander_density(ctx: AsymptoticContext, v, meander_law: MeanderHistogram,
                            w1: float = 0.0, w2: float = 1.0,
                            max_bin_fraction: float = 0.25) -> float:
    """Meander density at v by decomposing over the first factorisation time.

        f(w1, w2; v) = int_{w1}^{w2} t^{rho-1} (1-t)^{-d/alpha} dt
                       int_{u in H+, u1 < v1 / t^{1/alpha}}
                       g((v - t^{1/alpha} u) / (1-t)^{1/alpha}) law(du)

    with the law approximated by the histogram's bin-centre atoms.  f(0,1;.)
    is a fixed point: feeding the histogram of the conditioned walk back in
    reproduces (approximately) that same histogram after binning.

    Endpoint treatment: t = t_cut * s^(1/rho) on the left half absorbs the
    t^{rho-1} singularity; 1 - t = (1-t_cut) * s^(alpha/(alpha-d)) on the
    right half absorbs (1-t)^{-d/alpha} (needs alpha > d, i.e. d = 1 and
    alpha > 1, the regime where the atomic approximation is integrable).
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = ctx.dim
    alpha = ctx.alpha
    rho = ctx.params.rho
    if not (0.0 <= w1 < w2 <= 1.0):
        raise ParameterError("need 0 <= w1 < w2 <= 1")
    if v[0] <= 0:
        return 0.0
    widths = [float(e[1] - e[0]) for e in meander_law.edges]
    # bins live in scaled coordinates, so the c-scale is 1 in these units
    if max(widths) > max_bin_fraction:
        raise ResolutionError(
            f"histogram bins {widths} too coarse (> {max_bin_fraction} of the c-scale)"
        )

    centers = meander_law.bin_centers()
    nz = np.argwhere(meander_law.masses > 0.0)
    if nz.size == 0:
        raise ResolutionError("histogram carries no mass")
    atoms = np.stack([centers[ax][nz[:, ax]] for ax in range(d)], axis=1)
    weights = meander_law.masses[tuple(nz.T)]

    if d == 1:
        dens_1d = _cached_density(ctx)
        gfun = lambda pts: dens_1d(pts[:, 0])
    else:
        if not self_isotropic(ctx):
            raise ParameterError("d >= 2 meander density needs the isotropic law")
        gfun = lambda pts: isotropic_density_profile(
            np.linalg.norm(pts, axis=1), alpha, ctx.params.scale_c, d
        )

    u1 = atoms[:, 0]
    # per-atom upper integration limit from the constraint u1 t^{1/alpha} < v1
    with np.errstate(divide="ignore"):
        t_atom = np.where(u1 > 0, (v[0] / u1) ** alpha, np.inf)
    t_up = np.minimum(t_atom, w2)

    def integrand(t: float) -> float:
        if t <= 0.0 or t >= 1.0:
            return 0.0
        mask = t < t_up
        if not mask.any():
            return 0.0
        ta = t ** (1.0 / alpha)
        oa = (1.0 - t) ** (1.0 / alpha)
        pts = (v[None, :] - ta * atoms[mask]) / oa
        gv = gfun(pts)
        return float(
            t ** (rho - 1.0)
            * (1.0 - t) ** (-d / alpha)
            * np.dot(weights[mask], gv)
        )

    t_cut = min(0.5, w2)
    total = 0.0
    brk = np.unique(np.clip(t_up[np.isfinite(t_up)], w1, w2))

    # left piece [w1, t_cut] under t = t_cut * s^{1/rho}
    if w1 < t_cut:
        def left(s: float) -> float:
            t = t_cut * s ** (1.0 / rho)
            jac = t_cut * s ** (1.0 / rho - 1.0) / rho
            return integrand(t) * jac

        s_lo = (w1 / t_cut) ** rho if w1 > 0 else 0.0
        pts_s = sorted({float((b / t_cut) ** rho) for b in brk if w1 < b < t_cut})
        total += integrate.quad(
            left, s_lo, 1.0, points=pts_s or None, limit=300, epsabs=1e-12, epsrel=1e-7
        )[0]

    # right piece (t_cut, w2]
    if w2 > t_cut:
        if w2 < 1.0:
            pts_t = sorted({float(b) for b in brk if t_cut < b < w2})
            total += integrate.quad(
                integrand, t_cut, w2, points=pts_t or None, limit=300,
                epsabs=1e-12, epsrel=1e-7,
            )[0]
        else:
            if alpha <= d:
                raise ParameterError(
                    "right-endpoint substitution needs alpha > d (atomic law)"
                )
            q = alpha / (alpha - d)
            span = 1.0 - t_cut

            def right(s: float) -> float:
                t = 1.0 - span * s**q
                jac = span * q * s ** (q - 1.0)
                return integrand(t) * jac

            pts_s = sorted(
                {float(((1.0 - b) / span) ** (1.0 / q)) for b in brk if t_cut < b < 1.0}
            )
            total += integrate.quad(
                right, 0.0, 1.0, points=pts_s or None, limit=300,
                epsabs=1e-12, epsrel=1e-7,
            )[0]
    return total


def self_isotropic(ctx: AsymptoticContext) -> bool:
    return ctx.params.isotropic


def _cached_density(ctx: AsymptoticContext) -> CachedStableDensity1D:
    if not hasattr(ctx, "_dens1d"):
        ctx._dens1d = CachedStableDensity1D(ctx.params)
    return ctx._dens1d


# -- slowly varying fits ------------------------------------------------------


@dataclass(frozen=True)
class SlowVariationFit:
    slope: float
    intercept: float
    slope_stderr: float
    ns: np.ndarray
    sv_factors: np.ndarray  # value / n^slope: the residual slowly varying part

    def sv_drift(self) -> float:
        """max/min - 1 of the residual factor over the fitted range."""
        return float(self.sv_factors.max() / self.sv_factors.min() - 1.0)


def fit_slowly_varying(ns, values, index_guess: float | None = None,
                       min_points: int = 8, min_doublings: float = 3.0) -> SlowVariationFit:
    """Log-log regression of a regularly varying series.

    Requires at least ``min_points`` samples spanning ``min_doublings``
    octaves.  Returns the fitted index, the intercept, the OLS slope error,
    and the residual slowly-varying factor table value/n^slope.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size != values.size or ns.size < min_points:
        raise FitError(f"need at least {min_points} points, got {ns.size}")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise FitError("series must be strictly positive")
    span = math.log2(ns.max() / ns.min())
    if span < min_doublings:
        raise FitError(f"span {span:.2f} doublings < required {min_doublings}")
    lx, ly = np.log(ns), np.log(values)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - A @ coef
    dof = max(ns.size - 2, 1)
    sxx = float(((lx - lx.mean()) ** 2).sum())
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if sxx > 0 else float("inf")
    return SlowVariationFit(
        slope=slope,
        intercept=intercept,
        slope_stderr=stderr,
        ns=ns,
        sv_factors=values / ns**slope,
    )


def fit_renewal_surrogates(ladder: LadderData, alpha: float, rho: float,
                           u_lo: int = 4) -> tuple[RVSurrogate, RVSurrogate]:
    """Regularly varying surrogates H ~ kappa u^{alpha rho}, V ~ kappa' u^{alpha(1-rho)}
    fitted to the tabulated renewal functions."""
    us = np.arange(u_lo, ladder.U + 1)
    H_vals = np.array([ladder.H(int(u)) for u in us])
    V_vals = np.array([ladder.V(int(u)) for u in us])
    fit_h = fit_slowly_varying(us, H_vals)
    fit_v = fit_slowly_varying(us, V_vals)
    return (
        RVSurrogate(kappa=float(np.median(fit_h.sv_factors)), index=fit_h.slope),
        RVSurrogate(kappa=float(np.median(fit_v.sv_factors)), index=fit_v.slope),
    )


def rho_consistency(ctx: AsymptoticContext, u_lo: int = 8) -> dict:
    """Compare alpha*rho from the parameters against the fitted H index."""
    if ctx.ladder is None:
        raise ParameterError("needs ladder tables")
    us = np.arange(u_lo, ctx.ladder.U + 1)
    fit = fit_slowly_varying(us, np.array([ctx.ladder.H(int(u)) for u in us]))
    expected = ctx.alpha * ctx.params.rho
    return {
        "fitted_index": fit.slope,
        "expected_index": expected,
        "relative_gap": abs(fit.slope - expected) / expected,
    }
