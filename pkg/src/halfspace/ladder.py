"""Ladder heights and renewal functions of the first-coordinate walk.

For the 1D marginal S1 of the walk define

    tau+ = min{k >= 1 : S1(k) > 0},    chi+ = S1(tau+)   (strict ascent, >= 1)
    tau  = min{k >= 1 : S1(k) <= 0},   chi- = -S1(tau)   (weak descent, >= 0)

and the renewal functions

    H(u) = I{u > 0}  + sum_k P(chi+_1 + ... + chi+_k <  u)   (left continuous)
    V(u) = I{u >= 0} + sum_k P(chi-_1 + ... + chi-_k <= u).

The chi PMFs are computed by a first-passage DP: evolve the walk restricted
to the not-yet-exited side and collect the exit mass by landing height, up
to ``horizon`` steps.  Heights above the table cap go to an overflow bucket;
this is exact for H, V at levels <= cap because ladder increments never
decrease the running sum.  Mass still alive at the horizon is the defect.

When the step is skip-free in the exit direction (max up-step 1 for chi+,
max down-step 1 for chi-) and has zero mean, the pending mass's eventual
ladder height is forced (+1, respectively 0) and the defect is assigned
exactly, which makes SRW-like ladder data exact at any finite horizon.
Otherwise the PMF keeps a reported defect, optionally renormalised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sfft

from .errors import ParameterError
from .steps import StepDistribution


@dataclass
class LadderData:
    """Ladder-height PMFs and renewal tables up to integer level U."""

    chi_plus: np.ndarray  # P(chi+ = h), h = 0..cap (index 0 always 0)
    chi_minus: np.ndarray  # P(chi- = h), h = 0..cap
    chi_plus_overflow: float
    chi_minus_overflow: float
    defect_plus: float
    defect_minus: float
    H_int: np.ndarray  # H(u) at integer u = 0..U+1
    V_int: np.ndarray  # V(u) at integer u = 0..U
    U: int
    horizon: int
    adjustments: dict = dc_field(default_factory=dict)
    warnings: list = dc_field(default_factory=list)

    def H(self, u: float) -> float:
        """H(u) for real u (step function, jumps at integers, left continuous)."""
        if u <= 0:
            return 0.0
        k = math.ceil(u) if u == int(u) else int(math.floor(u)) + 1
        k = int(min(k, self.U + 1))
        return float(self.H_int[k])

    def V(self, u: float) -> float:
        """V(u) for real u (right continuous)."""
        if u < 0:
            return 0.0
        k = int(min(math.floor(u), self.U))
        return float(self.V_int[k])

    def H_integral(self, a: float, b: float) -> float:
        """Integral of H over [a, b] (piecewise-constant between integers)."""
        if b <= a:
            return 0.0
        total = 0.0
        x = a
        while x < b:
            nxt = min(math.floor(x) + 1.0, b)
            mid = 0.5 * (x + nxt)
            total += self.H(mid) * (nxt - x)
            x = nxt
        return total


def _conv_full(arr: np.ndarray, kern_hat, fast_len: int, out_len: int) -> np.ndarray:
    hat = sfft.rfft(arr, fast_len)
    return sfft.irfft(hat * kern_hat, fast_len)[:out_len]


def _first_passage_pmf(
    offsets: np.ndarray,
    probs: np.ndarray,
    horizon: int,
    cap: int,
    depth: int,
    direction: str,
):
    """Exit-height PMF of the first passage out of one side of the origin.

    direction 'up': walk stays <= 0, exit when landing at h >= 1.
    direction 'down': walk stays >= 1 (start at 0), exit at h = -landing >= 0.
    Returns (pmf[0..cap], overflow, defect).
    """
    kmin, kmax = int(offsets.min()), int(offsets.max())
    klen = kmax - kmin + 1
    kern = np.zeros(klen)
    kern[offsets - kmin] = probs

    if direction == "up":
        # positions -depth..0 ; index i <-> position i - depth
        size = depth + 1
        start_idx = depth
        exit_height = lambda pos: pos  # positions >= 1
    else:
        # positions 0..depth ; index i <-> position i
        size = depth + 1
        start_idx = 0
        exit_height = None

    out_len = size + klen - 1
    direct = len(offsets) <= 48
    if not direct:
        fast = sfft.next_fast_len(out_len, True)
        kern_hat = sfft.rfft(kern, fast)

    fld = np.zeros(size)
    fld[start_idx] = 1.0
    pmf = np.zeros(cap + 1)
    overflow = 0.0
    escaped = 0.0

    for _ in range(horizon):
        if direct:
            conv = np.zeros(out_len)
            for off, p in zip(offsets, probs):
                i0 = int(off - kmin)
                conv[i0 : i0 + size] += p * fld
        else:
            conv = _conv_full(fld, kern_hat, fast, out_len)
        if direction == "up":
            # conv index j <-> position j - depth + kmin
            base = -depth + kmin
            first_exit = 1 - base  # index of position 1
            live = conv[:first_exit]
            exits = conv[first_exit:]
            h0 = 1
        else:
            base = 0 + kmin
            first_live = 1 - base  # index of position 1
            exits_arr = conv[:first_live]  # positions <= 0, height = -pos
            live = conv[first_live:]
            exits = exits_arr[::-1]  # heights 0, 1, 2, ... ascending
            h0 = 0
        n_keep = max(0, min(exits.size, cap + 1 - h0))
        if n_keep:
            pmf[h0 : h0 + n_keep] += exits[:n_keep]
        if exits.size > n_keep:
            overflow += float(exits[n_keep:].sum())
        # clip the live part back into the box
        if direction == "up":
            # live covers positions base .. 0 ; keep -depth..0
            lo_pos = base
            drop = -depth - lo_pos  # positions below -depth escape
            if drop > 0:
                escaped += float(live[:drop].sum())
                live = live[drop:]
            nxt = np.zeros(size)
            nxt[size - live.size :] = live
        else:
            # live covers positions 1 .. (size-1 + kmax); keep 1..depth
            keep = depth  # number of positions 1..depth
            if live.size > keep:
                escaped += float(live[keep:].sum())
                live = live[:keep]
            nxt = np.zeros(size)
            nxt[1 : 1 + live.size] = live
        fld = nxt
        if fld.sum() < 1e-16:
            break

    defect = float(fld.sum()) + escaped
    return pmf, float(overflow), defect


def _renewal_measure(pmf: np.ndarray, upto: int, weak_zero: bool) -> np.ndarray:
    """M(j) = sum_{k>=0} P(Z_k = j), j = 0..upto, for ladder sums Z_k.

    With a mass p0 at zero (weak ladder) the recursion is defective-renewal
    style: M(0) = 1/(1-p0), M(j) = (sum_{i=1..j} pmf[i] M(j-i)) / (1-p0).
    """
    p0 = float(pmf[0]) if weak_zero else 0.0
    if p0 >= 1.0:
        raise ParameterError("weak ladder has all mass at 0; walk does not descend")
    M = np.zeros(upto + 1)
    M[0] = 1.0 / (1.0 - p0)
    kmax = len(pmf) - 1
    for j in range(1, upto + 1):
        i_hi = min(j, kmax)
        s = float(np.dot(pmf[1 : i_hi + 1], M[j - i_hi : j][::-1]))
        M[j] = s / (1.0 - p0)
    return M


def ladder_data(
    step,
    U: int,
    horizon: int,
    depth: int | None = None,
    horizon_minus: int | None = None,
    depth_minus: int | None = None,
    renormalize: bool = True,
    defect_tolerance: float = 0.05,
) -> LadderData:
    """Ladder-height PMFs and renewal tables for the first-coordinate walk.

    ``step`` may be multidimensional; its first-coordinate marginal is used.
    ``U`` is the top level of the H/V tables, ``horizon`` the first-passage
    DP length, ``depth`` the box size on the not-yet-exited side (default:
    three scaling lengths at the horizon).  The descending side may use its
    own horizon/depth: V is usually needed at small arguments only, where it
    converges in far fewer generations than H at large ones.
    """
    if isinstance(step, StepDistribution) and step.dim > 1:
        step = step.first_coordinate_pmf()
    if not isinstance(step, StepDistribution) or step.dim != 1:
        raise ParameterError("ladder_data needs a 1D lattice PMF (or a step to collapse)")
    offsets = step.support[:, 0].astype(np.int64)
    probs = np.asarray(step.probs, dtype=float)
    if not (np.any(offsets > 0) and np.any(offsets < 0)):
        raise ParameterError("marginal must take both signs")
    mean = float(np.dot(offsets, probs))
    mean_zero = abs(mean) < 1e-12

    if horizon_minus is None:
        horizon_minus = horizon
    if depth is None:
        depth = int(max(3 * step.scaling_c(max(horizon, 2)), 20 * step.max_abs_step()))
    if depth_minus is None:
        depth_minus = int(
            max(3 * step.scaling_c(max(horizon_minus, 2)), 20 * step.max_abs_step())
        )

    cap = U
    warnings_list: list[str] = []
    adjustments: dict = {}

    pmf_p, over_p, defect_p = _first_passage_pmf(offsets, probs, horizon, cap, depth, "up")
    if mean_zero and offsets.max() == 1:
        pmf_p[1] += defect_p
        adjustments["ascending"] = "skipfree_exact"
        defect_p = 0.0
    elif renormalize and defect_p > 0.0:
        keep = 1.0 - defect_p
        pmf_p /= keep
        over_p /= keep
        adjustments["ascending"] = "renormalized"
    else:
        adjustments["ascending"] = "defective"

    pmf_m, over_m, defect_m = _first_passage_pmf(
        offsets, probs, horizon_minus, cap, depth_minus, "down"
    )
    if mean_zero and offsets.min() == -1:
        pmf_m[0] += defect_m
        adjustments["descending"] = "skipfree_exact"
        defect_m = 0.0
    elif renormalize and defect_m > 0.0:
        keep = 1.0 - defect_m
        pmf_m /= keep
        over_m /= keep
        adjustments["descending"] = "renormalized"
    else:
        adjustments["descending"] = "defective"

    for tag, d in (("ascending", defect_p), ("descending", defect_m)):
        if d > defect_tolerance:
            warnings_list.append(
                f"{tag} ladder defect {d:.3e} above tolerance {defect_tolerance:g}; "
                "increase the horizon"
            )

    m_plus = _renewal_measure(pmf_p, U, weak_zero=False)
    m_minus = _renewal_measure(pmf_m, U, weak_zero=True)
    H_int = np.concatenate([[0.0], np.cumsum(m_plus)])  # H(u), u = 0..U+1
    V_int = np.cumsum(m_minus)  # V(u), u = 0..U

    return LadderData(
        chi_plus=pmf_p,
        chi_minus=pmf_m,
        chi_plus_overflow=over_p,
        chi_minus_overflow=over_m,
        defect_plus=defect_p,
        defect_minus=defect_m,
        H_int=H_int,
        V_int=V_int,
        U=U,
        horizon=horizon,
        adjustments=adjustments,
        warnings=warnings_list,
    )
