"""Walk increment laws.

Two kinds of step distribution are supported:

* :class:`StepDistribution` -- a finite PMF on the integer grid ``Z^d``.  This
  is the input of the exact lattice engine; the first coordinate is always the
  killing direction.
* :class:`ParetoStep` -- parametric heavy-tailed continuous laws (symmetric /
  skewed Pareto in 1D, radial Pareto with uniform angle in d dimensions) used
  by the Monte Carlo engine and by the scaling-sequence machinery.

Both expose the truncated second-moment function

    mu(u) = u^{-2} * E[ |X|^2 ; |X| <= u ],

which drives the scaling sequence `c_n` (see :mod:`halfspace.stable`).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import ParameterError, RangeError

_PROB_TOL = 1e-15


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, p, q) with g = gcd(a, b) = p*a + q*b."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def _subgroup_index(vectors: np.ndarray) -> int:
    """Index in Z^d of the subgroup generated by integer ``vectors``.

    Returns 0 when the subgroup is not of full rank.  Computed by integer
    row reduction (Hermite form); the index is the product of the pivots.
    """
    d = vectors.shape[1]
    basis: list[list[int] | None] = [None] * d
    for vec in vectors:
        v = [int(c) for c in vec]
        for j in range(d):
            if v[j] == 0:
                continue
            if basis[j] is None:
                basis[j] = v
                break
            a, b = basis[j][j], v[j]
            g, p, q = _ext_gcd(a, b)
            row = basis[j]
            new_pivot = [p * x + q * y for x, y in zip(row, v)]
            v = [(a // g) * y - (b // g) * x for x, y in zip(row, v)]
            basis[j] = new_pivot
    if any(r is None for r in basis):
        return 0
    idx = 1
    for j in range(d):
        idx *= abs(basis[j][j])  # type: ignore[index]
    return idx


class StepDistribution:
    """Finite increment PMF on ``Z^d``.

    Invariants enforced at construction: probabilities are positive and sum
    to 1 within 1e-15, and the first-coordinate marginal takes both signs
    (otherwise the first coordinate cannot oscillate and the exit time is
    degenerate).  The index of the sublattice spanned by support differences
    is computed and exposed; a proper sublattice (for instance SRW, period 2)
    triggers a warning but not an error, since the exact finite-n identities
    do not require minimality -- only the local limit predictions do.
    """

    def __init__(self, support, probs, name: str = "", require_oscillation: bool = True):
        support = np.atleast_2d(np.asarray(support, dtype=np.int64))
        probs = np.asarray(probs, dtype=float)
        if support.ndim != 2 or support.shape[0] != probs.shape[0]:
            raise ParameterError("support and probs must have matching leading length")
        if support.shape[0] == 0:
            raise ParameterError("empty support")
        if np.any(probs <= 0):
            raise ParameterError("probabilities must be strictly positive")
        total = float(probs.sum())
        if abs(total - 1.0) > _PROB_TOL * max(1, probs.size):
            raise ParameterError(f"probabilities sum to {total!r}, not 1")
        # collapse duplicate support points
        uniq, inv = np.unique(support, axis=0, return_inverse=True)
        if uniq.shape[0] != support.shape[0]:
            agg = np.zeros(uniq.shape[0])
            np.add.at(agg, inv, probs)
            support, probs = uniq, agg
        self.support = support
        self.support.flags.writeable = False
        self.probs = probs
        self.probs.flags.writeable = False
        self.name = name or f"lattice[{support.shape[0]} atoms, d={support.shape[1]}]"

        first = support[:, 0]
        if require_oscillation and not (np.any(first > 0) and np.any(first < 0)):
            raise ParameterError(
                "first-coordinate marginal must take both signs (oscillation prerequisite)"
            )

        diffs = support[1:] - support[0]
        self.sublattice_index = _subgroup_index(diffs) if len(diffs) else 0
        if self.sublattice_index != 1:
            warnings.warn(
                f"{self.name}: support spans a sublattice of index "
                f"{self.sublattice_index or 'inf'}; local limit predictions "
                "assume the minimal lattice is Z^d",
                stacklevel=2,
            )

        norms = np.sqrt((support.astype(float) ** 2).sum(axis=1))
        order = np.argsort(norms)
        self._norms = norms[order]
        self._sq_cumsum = np.cumsum((norms[order] ** 2) * probs[order])

    # -- basic geometry -------------------------------------------------

    @property
    def dim(self) -> int:
        return int(self.support.shape[1])

    @property
    def is_minimal_lattice(self) -> bool:
        return self.sublattice_index == 1

    def axis_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(per-axis min, per-axis max) of the support."""
        return self.support.min(axis=0), self.support.max(axis=0)

    def kernel(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense PMF array and the grid coordinate of its [0,...,0] corner."""
        lo, hi = self.axis_bounds()
        arr = np.zeros(tuple(int(h - l + 1) for l, h in zip(lo, hi)))
        idx = tuple((self.support - lo).T)
        arr[idx] = self.probs
        return arr, lo

    def first_coordinate_pmf(self) -> "StepDistribution":
        """Marginal law of the first coordinate, as a 1D StepDistribution."""
        vals = np.unique(self.support[:, 0])
        probs = np.array([self.probs[self.support[:, 0] == v].sum() for v in vals])
        return StepDistribution(vals.reshape(-1, 1), probs, name=self.name + ".first")

    def max_abs_step(self) -> int:
        return int(np.abs(self.support).max())

    # -- truncated second moment ----------------------------------------

    def mu(self, u: float) -> float:
        """u^{-2} E[|X|^2; |X| <= u] by exact summation over atoms."""
        if u <= 0:
            raise ParameterError("mu requires u > 0")
        k = int(np.searchsorted(self._norms, u, side="right"))
        if k == 0:
            return 0.0
        return float(self._sq_cumsum[k - 1]) / (u * u)

    def min_norm(self) -> float:
        return float(self._norms[0])

    def scaling_c(self, n: int) -> float:
        """Scaling point c_n = sup{u : mu(u) > 1/n} (exact over atoms).

        Within an inter-atom gap mu decreases as U_j / u^2; the last
        exceedance therefore sits at sqrt(n U_j) for the last atom j with
        n U_j > a_j^2.  Falls back to the smallest atom norm when mu never
        exceeds 1/n.
        """
        if n < 1:
            raise ParameterError("n >= 1 required")
        qualifies = n * self._sq_cumsum > self._norms**2
        if not np.any(qualifies):
            return self.min_norm()
        j = int(np.nonzero(qualifies)[0][-1])
        return float(math.sqrt(n * self._sq_cumsum[j]))

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "support": self.support.tolist(),
            "probs": self.probs.tolist(),
            "name": self.name,
        }

    @classmethod
    def from_json(cls, obj: dict | str | Path) -> "StepDistribution":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        return cls(obj["support"], obj["probs"], name=obj.get("name", ""))

    def __repr__(self) -> str:  # pragma: no cover
        return f"StepDistribution({self.name})"


# -- stock lattice families ----------------------------------------------


def srw_1d() -> StepDistribution:
    """Simple random walk on Z: +-1 with probability 1/2."""
    return StepDistribution([[-1], [1]], [0.5, 0.5], name="srw1d")


def three_point_1d() -> StepDistribution:
    """Mean-zero asymmetric 3-point step on {-2, 0, +1} (skip-free upward)."""
    return StepDistribution([[-2], [0], [1]], [0.25, 0.25, 0.5], name="asym3pt")


def nn_2d() -> StepDistribution:
    """Nearest-neighbour walk on Z^2."""
    return StepDistribution(
        [[1, 0], [-1, 0], [0, 1], [0, -1]], [0.25] * 4, name="nn2d"
    )


def pareto_lattice_1d(alpha: float, cutoff: int, name: str = "") -> StepDistribution:
    """Symmetric heavy-tailed lattice step: P(X = +-k) ~ k^{-alpha-1}, k <= cutoff.

    The cutoff is part of the model; all downstream quantities (mu, c_n,
    ladder tables, survival) are computed for the truncated walk, which keeps
    desk-scale comparisons self-consistent.
    """
    if not (0 < alpha < 2):
        raise ParameterError("alpha in (0,2) required for the heavy-tailed family")
    k = np.arange(1, cutoff + 1, dtype=float)
    w = k ** (-alpha - 1.0)
    w /= 2.0 * w.sum()
    support = np.concatenate([-k[::-1], k]).astype(np.int64).reshape(-1, 1)
    probs = np.concatenate([w[::-1], w])
    return StepDistribution(
        support, probs, name=name or f"pareto1d(a={alpha},K={cutoff})"
    )


def isotropic_pareto_lattice_2d(
    alpha: float, cutoff: int, name: str = ""
) -> StepDistribution:
    """Asymptotically isotropic heavy-tailed step on Z^2: P(X=z) ~ |z|^{-2-alpha}."""
    if not (0 < alpha < 2):
        raise ParameterError("alpha in (0,2) required for the heavy-tailed family")
    rng = np.arange(-cutoff, cutoff + 1)
    zx, zy = np.meshgrid(rng, rng, indexing="ij")
    nrm = np.sqrt(zx.astype(float) ** 2 + zy.astype(float) ** 2)
    mask = (nrm > 0) & (nrm <= cutoff)
    w = np.where(mask, nrm ** -(2.0 + alpha), 0.0)
    w /= w.sum()
    support = np.stack([zx[mask], zy[mask]], axis=1).astype(np.int64)
    return StepDistribution(
        support, w[mask], name=name or f"isopareto2d(a={alpha},K={cutoff})"
    )


# -- continuous heavy-tailed families --------------------------------------


@dataclass(frozen=True)
class ParetoStep:
    """Continuous step with Pareto radial part: P(|X| > t) = (t/xm)^{-alpha}.

    ``skew_up`` is the probability of a positive sign in 1D (beta = 2p - 1);
    in d >= 2 the direction is uniform on the sphere (isotropic) and
    ``skew_up`` must stay 0.5.  For alpha > 1 the law is mean-centred unless
    ``centered`` is False; centring constants are analytic.
    """

    alpha: float
    dim: int = 1
    skew_up: float = 0.5
    xm: float = 1.0
    centered: bool = True

    def __post_init__(self):
        if not (0 < self.alpha < 2):
            raise ParameterError("alpha in (0,2) required")
        if not (0 < self.skew_up < 1):
            raise ParameterError("skew_up in (0,1) required")
        if self.dim < 1:
            raise ParameterError("dim >= 1")
        if self.dim > 1 and self.skew_up != 0.5:
            raise ParameterError("skewed sampling is 1D only; d >= 2 is isotropic")
        if self.xm <= 0:
            raise ParameterError("xm > 0 required")

    @property
    def beta(self) -> float:
        return 2.0 * self.skew_up - 1.0

    @property
    def name(self) -> str:
        tag = "sym" if self.skew_up == 0.5 else f"skew{self.skew_up:g}"
        return f"pareto({tag},a={self.alpha:g},d={self.dim})"

    def mean_offset(self) -> float:
        """First-coordinate mean subtracted when centring (alpha > 1 only)."""
        if not self.centered or self.alpha <= 1 or self.dim > 1:
            return 0.0
        mean_abs = self.alpha * self.xm / (self.alpha - 1.0)
        return self.beta * mean_abs

    def tail(self, t: float) -> float:
        """P(|X| > t) for the uncentred radial part."""
        if t <= self.xm:
            return 1.0
        return (t / self.xm) ** (-self.alpha)

    def mu(self, u: float) -> float:
        """Truncated second moment ratio of the walk increment.

        Closed form for the uncentred law; one quadrature for the centred
        skewed case (the shift moves the atoms of |X|).
        """
        if u <= 0:
            raise ParameterError("mu requires u > 0")
        m = self.mean_offset()
        a, xm = self.alpha, self.xm
        if m == 0.0:
            if u <= xm:
                return 0.0
            second = a * xm**a * (u ** (2.0 - a) - xm ** (2.0 - a)) / (2.0 - a)
            return second / u**2
        # centred skewed 1D: integrate x^2 over {|x| <= u} against the shifted density
        p, q = self.skew_up, 1.0 - self.skew_up

        def dens(x: float) -> float:
            out = 0.0
            r = x + m  # up-branch: x = r - m
            if r >= xm:
                out += p * a * xm**a * r ** (-a - 1.0)
            r = -x - m  # down-branch: x = -r - m
            if r >= xm:
                out += q * a * xm**a * r ** (-a - 1.0)
            return out

        val, err = integrate.quad(
            lambda x: x * x * dens(x), -u, u,
            points=[xm - m, -xm - m] if u > xm + abs(m) else None,
            limit=200,
        )
        return val / u**2

    def mu_peak(self) -> float:
        """Location of the maximum of mu on the uncentred branch."""
        return self.xm * (2.0 / self.alpha) ** (1.0 / (2.0 - self.alpha))

    def scaling_c(self, n: int, rel_tol: float = 1e-9) -> float:
        """c_n by monotone bisection on the decreasing branch of mu."""
        if n < 1:
            raise ParameterError("n >= 1 required")
        target = 1.0 / n
        lo = max(self.mu_peak(), self.xm)
        if self.mu(lo) <= target:
            return self.xm
        hi = lo * 2.0
        for _ in range(200):
            if self.mu(hi) <= target:
                break
            hi *= 2.0
        else:  # pragma: no cover
            raise RangeError("mu never dropped below 1/n in the searchable range")
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if self.mu(mid) <= target:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)


STEP_FAMILIES = {
    "srw": lambda cfg: srw_1d(),
    "three_point": lambda cfg: three_point_1d(),
    "nn2d": lambda cfg: nn_2d(),
    "pareto_lattice_1d": lambda cfg: pareto_lattice_1d(cfg["alpha"], int(cfg["cutoff"])),
    "isotropic_pareto_lattice_2d": lambda cfg: isotropic_pareto_lattice_2d(
        cfg["alpha"], int(cfg["cutoff"])
    ),
    "lattice_json": lambda cfg: StepDistribution.from_json(cfg["path"]),
    "lattice_inline": lambda cfg: StepDistribution(cfg["support"], cfg["probs"]),
}

CONTINUOUS_FAMILIES = {
    "sym_pareto": lambda cfg: ParetoStep(cfg["alpha"], dim=int(cfg.get("dim", 1))),
    "skew_pareto": lambda cfg: ParetoStep(
        cfg["alpha"], skew_up=float(cfg.get("skew_up", 0.5))
    ),
    "radial_pareto": lambda cfg: ParetoStep(cfg["alpha"], dim=int(cfg["dim"])),
}


def step_from_config(cfg: dict):
    """Build a lattice or continuous step from a harness JSON fragment."""
    family = cfg.get("family")
    if family in STEP_FAMILIES:
        return STEP_FAMILIES[family](cfg)
    if family in CONTINUOUS_FAMILIES:
        return CONTINUOUS_FAMILIES[family](cfg)
    raise ParameterError(f"unknown step family {family!r}")
