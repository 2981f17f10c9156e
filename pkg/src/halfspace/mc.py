"""Seeded Monte Carlo for walks killed on leaving the upper half space.

Reproducibility contract: every estimator is a deterministic function of
(seed, configuration).  The generator is numpy's Philox, a counter-based
keyed generator, so runs reproduce bit-exactly across machines; replicas or
grid cells that run in parallel derive disjoint substreams with
``Philox(key=seed).jumped(index)``.

Estimators are vectorised over paths in fixed-size chunks (fixed chunking is
part of the determinism contract).  Green-function estimation pools the
occupation count of the target cube over a whole path, so one path feeds
every time index at once; the per-path totals are the i.i.d. unit for the
standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InsufficientSamplesError, ParameterError
from .steps import ParetoStep, StepDistribution

_CHUNK = 1 << 16


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; disjoint substream per (seed, stream)."""
    bit = np.random.Philox(key=np.uint64(seed))
    if stream:
        bit = bit.jumped(stream)
    return np.random.Generator(bit)


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo value with its standard error and provenance.

    ``bias_bound`` annotates horizon-truncated estimators (zero elsewhere).
    Re-running with the same seed and configuration reproduces ``value``
    bit-exactly.
    """

    value: float
    stderr: float
    n_samples: int
    seed: int
    bias_bound: float = 0.0

    def agrees_with(self, target: float, n_sigma: float = 3.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.stderr + self.bias_bound


class HeavyStepSampler:
    """Step sampler for the Monte Carlo engine.

    Families: 'sym_pareto' / 'skew_pareto' (1D, exact inverse-CDF tail,
    analytic mean-centring for alpha > 1), 'radial_pareto' (R^d, Pareto
    radius with uniform direction), and 'lattice' (finite PMF passthrough,
    the bridge to the exact engine).
    """

    def __init__(self, base):
        if isinstance(base, ParetoStep):
            self.kind = "pareto"
        elif isinstance(base, StepDistribution):
            self.kind = "lattice"
            self._cum = np.cumsum(base.probs)
            self._support = base.support.astype(float)
        else:
            raise ParameterError("sampler base must be ParetoStep or StepDistribution")
        self.base = base

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def alpha(self) -> float | None:
        return getattr(self.base, "alpha", None)

    def scaling_c(self, n: int) -> float:
        return self.base.scaling_c(n)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, dim) array of increments."""
        if self.kind == "lattice":
            u = rng.random(size)
            idx = np.searchsorted(self._cum, u, side="right")
            idx = np.minimum(idx, len(self._cum) - 1)
            return self._support[idx]
        p: ParetoStep = self.base
        r = p.xm * rng.random(size) ** (-1.0 / p.alpha)
        if p.dim == 1:
            sign = np.where(rng.random(size) < p.skew_up, 1.0, -1.0)
            return (sign * r - p.mean_offset()).reshape(size, 1)
        direction = rng.standard_normal((size, p.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * r[:, None]

    def tail(self, t: float) -> float:
        """P(|X| > t) of the uncentred radial part (band-check reference)."""
        if self.kind == "lattice":
            norms = np.sqrt((self._support**2).sum(axis=1))
            return float(self.base.probs[norms > t].sum())
        return self.base.tail(t)


def _chunks(samples: int, chunk: int = _CHUNK):
    done = 0
    while done < samples:
        take = min(chunk, samples - done)
        yield done // chunk, take
        done += take


def estimate_survival(sampler: HeavyStepSampler, x, n: int, samples: int,
                      seed: int) -> Estimate:
    """P(tau_x > n): fraction of paths with x1 + S1(k) > 0 for all k <= n."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x[0] <= 0:
        raise ParameterError("x1 > 0 required")
    if n == 0:
        return Estimate(1.0, 0.0, samples, seed)
    hits = 0
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        s1 = np.zeros(take)
        alive = np.ones(take, dtype=bool)
        for _ in range(n):
            s1 += sampler.sample(rng, take)[:, 0]
            alive &= x[0] + s1 > 0.0
        hits += int(alive.sum())
    p = hits / samples
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / samples), samples, seed)


def _in_cube(pos: np.ndarray, corner: np.ndarray, r: float) -> np.ndarray:
    ok = np.ones(pos.shape[0], dtype=bool)
    for ax in range(pos.shape[1]):
        ok &= (pos[:, ax] >= corner[ax]) & (pos[:, ax] < corner[ax] + r)
    return ok


def estimate_pn_cube(sampler: HeavyStepSampler, x, y, r: float, n: int,
                     samples: int, seed: int) -> Estimate:
    """P(x + S(n) in y + r*[0,1)^d, tau_x > n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x[0] <= 0 or r <= 0:
        raise ParameterError("need x1 > 0 and r > 0")
    hits = 0
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        pos = np.tile(x, (take, 1))
        alive = np.ones(take, dtype=bool)
        for _ in range(n):
            pos += sampler.sample(rng, take)
            alive &= pos[:, 0] > 0.0
        hits += int((alive & _in_cube(pos, y, r)).sum())
    p = hits / samples
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / samples), samples, seed)


def estimate_green_cube(sampler: HeavyStepSampler, x, y, r: float, horizon: int,
                        samples: int, seed: int, bias_bound: float = 0.0) -> Estimate:
    """Expected occupation of y + r*[0,1)^d before the exit time, from n = 0.

    Truncated at ``horizon``; pass the certified tail bound of the discarded
    part as ``bias_bound`` so consumers can widen their tolerance.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x[0] <= 0 or r <= 0:
        raise ParameterError("need x1 > 0 and r > 0")
    total = 0.0
    total_sq = 0.0
    start_hit = 1.0 if bool(_in_cube(x[None, :], y, r)[0]) else 0.0
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        pos = np.tile(x, (take, 1))
        occ = np.full(take, start_hit)
        alive = np.ones(take, dtype=bool)
        for _ in range(horizon):
            if not alive.any():
                break
            idx = np.nonzero(alive)[0]
            pos[idx] += sampler.sample(rng, idx.size)
            still = pos[idx, 0] > 0.0
            alive[idx] = still
            live_idx = idx[still]
            if live_idx.size:
                occ[live_idx] += _in_cube(pos[live_idx], y, r)
        total += float(occ.sum())
        total_sq += float((occ * occ).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return Estimate(mean, math.sqrt(var / samples), samples, seed, bias_bound)


def estimate_green_cubes(sampler: HeavyStepSampler, x, ys, r: float, horizon: int,
                         samples: int, seed: int, bias_bounds=None) -> list[Estimate]:
    """Green estimates for several target cubes from one path ensemble.

    Occupation pooling: each path contributes its visit count to every
    target, so the ensemble (and the RNG stream) is shared; estimates for
    different targets are correlated but individually unbiased.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ys = [np.atleast_1d(np.asarray(y, dtype=float)) for y in ys]
    if x[0] <= 0 or r <= 0:
        raise ParameterError("need x1 > 0 and r > 0")
    if bias_bounds is None:
        bias_bounds = [0.0] * len(ys)
    tot = np.zeros(len(ys))
    tot_sq = np.zeros(len(ys))
    start_hits = np.array(
        [1.0 if bool(_in_cube(x[None, :], y, r)[0]) else 0.0 for y in ys]
    )
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        pos = np.tile(x, (take, 1))
        occ = np.tile(start_hits, (take, 1))
        alive = np.ones(take, dtype=bool)
        for _ in range(horizon):
            if not alive.any():
                break
            idx = np.nonzero(alive)[0]
            pos[idx] += sampler.sample(rng, idx.size)
            still = pos[idx, 0] > 0.0
            alive[idx] = still
            live_idx = idx[still]
            if live_idx.size:
                live_pos = pos[live_idx]
                for j, y in enumerate(ys):
                    occ[live_idx, j] += _in_cube(live_pos, y, r)
        tot += occ.sum(axis=0)
        tot_sq += (occ * occ).sum(axis=0)
    out = []
    for j in range(len(ys)):
        mean = tot[j] / samples
        var = max(tot_sq[j] / samples - mean * mean, 0.0)
        out.append(Estimate(mean, math.sqrt(var / samples), samples, seed,
                            float(bias_bounds[j])))
    return out


@dataclass(frozen=True)
class MeanderHistogram:
    """Empirical law of (x + S(n)) / c_n conditioned on survival to n."""

    n: int
    c_n: float
    edges: tuple  # per-axis bin edges in scaled coordinates
    masses: np.ndarray  # normalised over accepted paths
    out_mass: float
    n_accepted: int
    acceptance_rate: float
    seed: int

    def __post_init__(self):
        self.masses.flags.writeable = False

    @property
    def dim(self) -> int:
        return len(self.edges)

    def total_variation(self, other: "MeanderHistogram") -> float:
        """TV distance over the common binning, out-of-window as an extra cell."""
        self._check_same_bins(other)
        return 0.5 * (
            float(np.abs(self.masses - other.masses).sum())
            + abs(self.out_mass - other.out_mass)
        )

    def tv_error_bound(self, other: "MeanderHistogram") -> float:
        """1-sigma propagation of per-bin binomial noise into the TV distance."""
        self._check_same_bins(other)

        def cell_sd(h):
            p = np.concatenate([h.masses.ravel(), [h.out_mass]])
            return np.sqrt(np.maximum(p * (1 - p), 0.0) / max(h.n_accepted, 1))

        return 0.5 * float(np.sqrt(cell_sd(self) ** 2 + cell_sd(other) ** 2).sum())

    def _check_same_bins(self, other: "MeanderHistogram") -> None:
        if len(self.edges) != len(other.edges) or any(
            len(a) != len(b) or not np.allclose(a, b)
            for a, b in zip(self.edges, other.edges)
        ):
            raise ParameterError("histograms use different binnings")

    def bin_centers(self) -> list[np.ndarray]:
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def first_marginal(self) -> np.ndarray:
        axes = tuple(range(1, self.masses.ndim))
        return self.masses.sum(axis=axes) if axes else self.masses


def meander_histogram(sampler: HeavyStepSampler, n: int, samples: int, bins,
                      seed: int, window=None, x=None) -> MeanderHistogram:
    """Histogram of (x + S(n)) / c_n over paths surviving to time n.

    Conditioning is by rejection (unbiased); the acceptance rate is reported.
    ``bins`` is an int (per axis) or per-axis sequence; ``window`` a per-axis
    (lo, hi) tuple in scaled coordinates; default (0, 4) on the first axis
    and (-4, 4) transversally.
    """
    d = sampler.dim
    if x is None:
        x = np.zeros(d)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if window is None:
        window = ((0.0, 4.0),) + ((-4.0, 4.0),) * (d - 1)
    if isinstance(bins, int):
        bins = (bins,) * d
    edges = tuple(
        np.linspace(lo, hi, nb + 1) for (lo, hi), nb in zip(window, bins)
    )
    c_n = sampler.scaling_c(n)

    counts = np.zeros(tuple(len(e) - 1 for e in edges))
    n_acc = 0
    n_out = 0
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        pos = np.tile(x, (take, 1))
        alive = np.ones(take, dtype=bool)
        for _ in range(n):
            pos += sampler.sample(rng, take)
            alive &= pos[:, 0] > 0.0
        acc = pos[alive] / c_n
        n_acc += acc.shape[0]
        if acc.shape[0]:
            hist, _ = np.histogramdd(acc, bins=edges)
            counts += hist
            n_out += acc.shape[0] - int(hist.sum())
    if n_acc == 0:
        raise InsufficientSamplesError(
            f"no path survived to n={n} among {samples} samples"
        )
    return MeanderHistogram(
        n=n,
        c_n=c_n,
        edges=edges,
        masses=counts / n_acc,
        out_mass=n_out / n_acc,
        n_accepted=n_acc,
        acceptance_rate=n_acc / samples,
        seed=seed,
    )


def sign_frequency(sampler: HeavyStepSampler, n: int, samples: int, seed: int):
    """Cesaro and tail-window averages of the positivity frequency.

    Returns (cesaro, tail_half): Monte Carlo estimates of
    (1/n) sum_{k<=n} 1{S1(k) > 0} and of the same average over k in (n/2, n].
    The tail window suppresses the small-k transient.
    """
    half = n // 2
    tot_c = tot_c2 = tot_t = tot_t2 = 0.0
    for stream, take in _chunks(samples):
        rng = philox(seed, stream)
        s1 = np.zeros(take)
        pos_all = np.zeros(take)
        pos_tail = np.zeros(take)
        for k in range(1, n + 1):
            s1 += sampler.sample(rng, take)[:, 0]
            up = s1 > 0.0
            pos_all += up
            if k > half:
                pos_tail += up
        f_all = pos_all / n
        f_tail = pos_tail / (n - half)
        tot_c += float(f_all.sum())
        tot_c2 += float((f_all**2).sum())
        tot_t += float(f_tail.sum())
        tot_t2 += float((f_tail**2).sum())
    mc = tot_c / samples
    vc = max(tot_c2 / samples - mc * mc, 0.0)
    mt = tot_t / samples
    vt = max(tot_t2 / samples - mt * mt, 0.0)
    return (
        Estimate(mc, math.sqrt(vc / samples), samples, seed),
        Estimate(mt, math.sqrt(vt / samples), samples, seed),
    )


def empirical_tail_points(sampler: HeavyStepSampler, n_draws: int, seed: int,
                          thresholds) -> dict:
    """Observed P(|X| > t) at the probe thresholds (sampler band check)."""
    rng = philox(seed)
    counts = {float(t): 0 for t in thresholds}
    done = 0
    mean_acc = 0.0
    while done < n_draws:
        take = min(_CHUNK, n_draws - done)
        draws = sampler.sample(rng, take)
        norms = np.linalg.norm(draws, axis=1)
        for t in counts:
            counts[t] += int((norms > t).sum())
        mean_acc += float(draws[:, 0].sum())
        done += take
    return {
        "tail": {t: c / n_draws for t, c in counts.items()},
        "mean_first": mean_acc / n_draws,
    }
