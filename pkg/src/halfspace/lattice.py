"""Exact dynamic programming for lattice walks killed on leaving the upper
half space.

The state is a probability field over box-bounded lattice points with first
coordinate >= 1 (the start point may sit on the boundary row 0 at time 0).
One evolution step convolves the field with the step PMF and moves every
target with first coordinate <= 0 into the killed ledger.  Mass that would
leave the box is an error by default; the 'escape' policy accumulates it in
a separate ledger instead (it is alive when it leaves, so survival counts it;
it can never re-enter, which is the documented approximation for heavy-tailed
runs -- the re-entry flow is O(n^2 * g(box radius)) per unit escaped mass).

Local probabilities are computed by three independent routes:

* :func:`p_n_exact` -- direct DP from the start point;
* :func:`p_n_via_recursion` -- the renewal-type recursion
  n b_n(y) = P(S(n)=y, S1(n)>0) + sum_{k<n} sum_z P(S(k)=y-z, S1(k)>0) b_{n-k}(z)
  for walks started at the origin;
* :func:`p_n_via_min_decomposition` -- splitting the path at the first-
  coordinate minimum,
  p_n(x,y) = sum_{k<=n} sum_{1 <= z1 <= min(x1, y1+1)} p+_k(z-x) b_{n-k}(y-z),
  where p+_k is the kernel of the walk killed on becoming positive.

The Green function accumulates the DP fields and certifies the discarded
tail with the ladder-renewal skeleton V(x1) H(min(c_n, y1)) / (n c_n^d)
scaled by the largest ratio observed inside the horizon (an empirical
constant, flagged as such in the result).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sfft

from .errors import BoxOverflowError, ParameterError
from .steps import StepDistribution

Box = tuple[tuple[int, int], ...]

_DIRECT_ATOM_LIMIT = 48


def auto_box(x, n: int, step: StepDistribution, pad: int = 0) -> Box:
    """Smallest box containing every point reachable from x in n steps."""
    x = np.asarray(x, dtype=np.int64)
    lo_s, hi_s = step.axis_bounds()
    lo = x + n * lo_s - pad
    hi = x + n * hi_s + pad
    bounds = [(0, int(max(hi[0], x[0], 1)))]
    for j in range(1, step.dim):
        bounds.append((int(lo[j]), int(hi[j])))
    return tuple(bounds)


@dataclass(frozen=True)
class KilledField:
    """Probability field of the killed walk at a fixed time.

    live mass + killed_mass + escaped_mass = 1 (within accumulated roundoff).
    All live mass sits at first coordinate >= 1 for time >= 1.
    """

    time: int
    box: Box
    mass: np.ndarray
    killed_mass: float
    escaped_mass: float = 0.0

    def __post_init__(self):
        self.mass.flags.writeable = False

    @property
    def dim(self) -> int:
        return len(self.box)

    def live_mass(self) -> float:
        return float(self.mass.sum())

    def total_mass(self) -> float:
        return self.live_mass() + self.killed_mass + self.escaped_mass

    def index_of(self, point) -> tuple[int, ...] | None:
        idx = []
        for c, (lo, hi) in zip(point, self.box):
            if not (lo <= c <= hi):
                return None
            idx.append(int(c - lo))
        return tuple(idx)

    def prob(self, point) -> float:
        idx = self.index_of(point)
        return 0.0 if idx is None else float(self.mass[idx])

    def prob_many(self, points) -> np.ndarray:
        return np.array([self.prob(p) for p in points])

    def items(self, threshold: float = 0.0):
        """Yield (point, mass) pairs above threshold, for CSV export."""
        nz = np.argwhere(self.mass > threshold)
        lows = np.array([lo for lo, _ in self.box])
        for idx in nz:
            yield tuple(int(v) for v in (idx + lows)), float(self.mass[tuple(idx)])

    @classmethod
    def point_mass(cls, x, box: Box) -> "KilledField":
        x = tuple(int(v) for v in np.atleast_1d(x))
        if x[0] < 0:
            raise ParameterError("start point must have first coordinate >= 0")
        if box[0][0] != 0:
            raise ParameterError("box axis 0 must start at 0")
        arr = np.zeros(tuple(hi - lo + 1 for lo, hi in box))
        idx = []
        for c, (lo, hi) in zip(x, box):
            if not (lo <= c <= hi):
                raise ParameterError(f"start point {x} outside box {box}")
            idx.append(c - lo)
        arr[tuple(idx)] = 1.0
        return cls(time=0, box=box, mass=arr, killed_mass=0.0)


class KilledEvolver:
    """One-step evolution operator with cached FFT plans for a fixed box."""

    def __init__(self, step: StepDistribution, box: Box, policy: str = "error"):
        if policy not in ("error", "escape"):
            raise ParameterError("policy must be 'error' or 'escape'")
        if len(box) != step.dim:
            raise ParameterError("box dimension does not match the step")
        if box[0][0] != 0:
            raise ParameterError("box axis 0 must start at 0")
        self.step = step
        self.box = box
        self.policy = policy
        self.kern, self.kern_lo = step.kernel()
        self.shape = tuple(hi - lo + 1 for lo, hi in box)
        self.full_shape = tuple(
            s + k - 1 for s, k in zip(self.shape, self.kern.shape)
        )
        self.direct = step.support.shape[0] <= _DIRECT_ATOM_LIMIT
        if not self.direct:
            self.fast_shape = tuple(sfft.next_fast_len(s, True) for s in self.full_shape)
            self._kern_hat = sfft.rfftn(self.kern, self.fast_shape)

    def _convolve(self, mass: np.ndarray) -> np.ndarray:
        if self.direct:
            out = np.zeros(self.full_shape)
            for vec, p in zip(self.step.support, self.step.probs):
                ofs = vec - self.kern_lo
                sl = tuple(slice(int(o), int(o) + s) for o, s in zip(ofs, mass.shape))
                out[sl] += p * mass
            return out
        hat = sfft.rfftn(mass, self.fast_shape)
        conv = sfft.irfftn(hat * self._kern_hat, self.fast_shape)
        return conv[tuple(slice(0, s) for s in self.full_shape)]

    def advance(self, fld: KilledField) -> KilledField:
        out = self._convolve(fld.mass)
        out_lo = np.array([lo for lo, _ in fld.box]) + self.kern_lo
        total = float(out.sum())

        # rows with first coordinate <= 0 die, wherever the transverse part is
        n_dead_rows = int(max(0, 1 - out_lo[0]))
        killed_inc = float(out[:n_dead_rows].sum()) if n_dead_rows > 0 else 0.0
        alive = out[n_dead_rows:]
        alive_lo = out_lo.copy()
        alive_lo[0] += n_dead_rows

        new_mass = np.zeros(self.shape)
        src, dst = [], []
        for ax, (lo, hi) in enumerate(self.box):
            a0 = int(alive_lo[ax])
            a1 = a0 + alive.shape[ax] - 1
            o0, o1 = max(a0, lo), min(a1, hi)
            if o0 > o1:
                src = None
                break
            src.append(slice(o0 - a0, o1 - a0 + 1))
            dst.append(slice(o0 - lo, o1 - lo + 1))
        inside = 0.0
        if src is not None:
            block = alive[tuple(src)]
            new_mass[tuple(dst)] = block
            inside = float(block.sum())
        escaped_inc = total - inside - killed_inc

        if self.policy == "error" and escaped_inc > max(1e-13 * max(total, 1e-30), 0.0):
            raise BoxOverflowError(
                f"step {fld.time}->{fld.time + 1}: {escaped_inc:.3e} probability "
                f"attempted to leave the box {self.box}; enlarge the box or use "
                "the 'escape' policy"
            )
        return KilledField(
            time=fld.time + 1,
            box=self.box,
            mass=new_mass,
            killed_mass=fld.killed_mass + killed_inc,
            escaped_mass=fld.escaped_mass + max(escaped_inc, 0.0),
        )


def evolve_killed(fld: KilledField, step: StepDistribution, policy: str = "error") -> KilledField:
    """Single killed-convolution step (convenience wrapper over the evolver)."""
    return KilledEvolver(step, fld.box, policy).advance(fld)


def killed_fields(x, n_max: int, step: StepDistribution, box: Box | None = None,
                  policy: str = "error"):
    """Yield the killed fields at times 0..n_max started from x."""
    if box is None:
        box = auto_box(x, n_max, step)
    fld = KilledField.point_mass(x, box)
    ev = KilledEvolver(step, box, policy)
    yield fld
    for _ in range(n_max):
        fld = ev.advance(fld)
        yield fld


def p_n_table(x, n_max: int, step: StepDistribution, box: Box | None = None,
              policy: str = "error") -> list[KilledField]:
    return list(killed_fields(x, n_max, step, box, policy))


def p_n_exact(x, y, n: int, step: StepDistribution, box: Box | None = None,
              policy: str = "error") -> float:
    """P(x + S(n) = y, walk killed on first coordinate <= 0 survives to n)."""
    y = tuple(int(v) for v in np.atleast_1d(y))
    if y[0] < 1:
        raise ParameterError("target must lie in the open half space (y1 >= 1)")
    for fld in killed_fields(x, n, step, box, policy):
        if fld.time == n:
            return fld.prob(y)
    raise AssertionError("unreachable")


def survival_exact(x, n: int, step: StepDistribution, box: Box | None = None,
                   policy: str = "error") -> float:
    """P(tau_x > n): live mass (in-box plus escaped ledger) at time n."""
    for fld in killed_fields(x, n, step, box, policy):
        if fld.time == n:
            return fld.live_mass() + fld.escaped_mass
    raise AssertionError("unreachable")


def survival_series(x, n_max: int, step: StepDistribution, box: Box | None = None,
                    policy: str = "error") -> np.ndarray:
    """P(tau_x > n) for n = 0..n_max from a single DP sweep."""
    out = np.empty(n_max + 1)
    for fld in killed_fields(x, n_max, step, box, policy):
        out[fld.time] = fld.live_mass() + fld.escaped_mass
    return out


# -- free-walk machinery -----------------------------------------------------


def _free_box(step: StepDistribution, n_max: int) -> Box:
    lo_s, hi_s = step.axis_bounds()
    return tuple(
        (int(n_max * l), int(n_max * h)) for l, h in zip(lo_s, hi_s)
    )


def free_fields(step: StepDistribution, n_max: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """(array, lo) pairs for the unrestricted n-step PMFs, n = 0..n_max."""
    kern, klo = step.kernel()
    arr = np.ones((1,) * step.dim)
    lo = np.zeros(step.dim, dtype=np.int64)
    out = [(arr, lo.copy())]
    from scipy.signal import fftconvolve

    for _ in range(n_max):
        arr = fftconvolve(arr, kern)
        lo = lo + klo
        out.append((arr, lo.copy()))
    return out


def restricted_free_kernels(step: StepDistribution, n_max: int):
    """a_k(z) = P(S(k) = z, z1 >= 1): free PMFs masked to the open half space."""
    out = []
    for arr, lo in free_fields(step, n_max):
        cut = int(max(0, 1 - lo[0]))
        a = arr[cut:]
        alo = lo.copy()
        alo[0] += cut
        out.append((np.ascontiguousarray(a), alo))
    return out


def _dot_shifted(arr_a, lo_a, arr_b, lo_b, target) -> float:
    """sum_w A(w) * B(target - w) over the overlap of the two supports."""
    target = np.asarray(target, dtype=np.int64)
    # B(target - w) as an array in w: flip B and shift
    flip = arr_b[tuple(slice(None, None, -1) for _ in range(arr_b.ndim))]
    flo = target - (lo_b + np.array(arr_b.shape) - 1)
    src_a, src_f = [], []
    for ax in range(arr_a.ndim):
        a0, a1 = int(lo_a[ax]), int(lo_a[ax]) + arr_a.shape[ax] - 1
        b0, b1 = int(flo[ax]), int(flo[ax]) + flip.shape[ax] - 1
        o0, o1 = max(a0, b0), min(a1, b1)
        if o0 > o1:
            return 0.0
        src_a.append(slice(o0 - a0, o1 - a0 + 1))
        src_f.append(slice(o0 - b0, o1 - b0 + 1))
    return float(np.sum(arr_a[tuple(src_a)] * flip[tuple(src_f)]))


def bn_table(step: StepDistribution, n_max: int, variant: str = "40",
             method: str = "fft"):
    """b_n = p_n(origin, .) for n = 0..n_max via the renewal recursion.

    variant '40' convolves the restricted free kernel against the killed
    table; variant '41' swaps the operands (the two displayed recurrences).
    With method='direct' the convolutions accumulate in C loops whose order
    differs between variants, giving a meaningful numerical cross-check.
    """
    if variant not in ("40", "41"):
        raise ParameterError("variant must be '40' or '41'")
    from scipy.signal import convolve

    a_tab = restricted_free_kernels(step, n_max)
    # b_0 = delta at the origin (empty walk, no survival constraint yet)
    b_tab = [(np.ones((1,) * step.dim), np.zeros(step.dim, dtype=np.int64))]
    for n in range(1, n_max + 1):
        acc, acc_lo = a_tab[n][0].copy(), a_tab[n][1].copy()
        for k in range(1, n):
            a_arr, a_lo = a_tab[k]
            b_arr, b_lo = b_tab[n - k]
            if b_arr.sum() == 0.0:
                continue
            if variant == "40":
                conv = convolve(a_arr, b_arr, method=method)
            else:
                conv = convolve(b_arr, a_arr, method=method)
            conv_lo = a_lo + b_lo
            acc, acc_lo = _add_aligned(acc, acc_lo, conv, conv_lo)
        acc /= n
        cut = int(max(0, 1 - acc_lo[0]))
        if cut:
            acc = acc[cut:]
            acc_lo = acc_lo.copy()
            acc_lo[0] += cut
        b_tab.append((acc, acc_lo))
    return b_tab


def _add_aligned(a, lo_a, b, lo_b):
    """Sum of two offset arrays on the union of their supports."""
    lo = np.minimum(lo_a, lo_b)
    hi_a = lo_a + np.array(a.shape) - 1
    hi_b = lo_b + np.array(b.shape) - 1
    hi = np.maximum(hi_a, hi_b)
    out = np.zeros(tuple(int(h - l + 1) for l, h in zip(lo, hi)))
    sl_a = tuple(slice(int(la - l), int(la - l) + s) for la, l, s in zip(lo_a, lo, a.shape))
    sl_b = tuple(slice(int(lb - l), int(lb - l) + s) for lb, l, s in zip(lo_b, lo, b.shape))
    out[sl_a] += a
    out[sl_b] += b
    return out, lo


def p_n_via_recursion(y, n: int, step: StepDistribution, variant: str = "40",
                      table=None) -> float:
    """b_n(y) = P(S(n) = y, tau_0 > n) through the recursion route."""
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if n == 0:
        return 1.0 if not y.any() else 0.0
    if y[0] < 1:
        return 0.0
    tab = table if table is not None else bn_table(step, n, variant)
    arr, lo = tab[n]
    idx = y - lo
    if np.any(idx < 0) or np.any(idx >= np.array(arr.shape)):
        return 0.0
    return float(arr[tuple(int(i) for i in idx)])


# -- decomposition at the first-coordinate minimum ---------------------------


def descent_kernels(step: StepDistribution, n_max: int):
    """p+_k(w) = P(S(k) = w, S1(j) <= 0 for all j <= k), k = 0..n_max.

    Computed with the killed DP applied to the walk with the first axis
    flipped (staying nonpositive becomes staying positive).
    """
    flipped_support = step.support.copy()
    flipped_support[:, 0] *= -1
    flipped = StepDistribution(flipped_support, step.probs, name=step.name + ".flip")
    lo_s, hi_s = step.axis_bounds()
    box = [(0, int(1 + n_max * max(-lo_s[0], 1)))]
    for j in range(1, step.dim):
        box.append((int(n_max * lo_s[j]), int(n_max * hi_s[j])))
    out = []
    for fld in killed_fields([1] + [0] * (step.dim - 1), n_max, flipped, tuple(box)):
        # field coordinate v corresponds to w1 = 1 - v1, w_t = v_t
        arr = fld.mass[::-1] if step.dim == 1 else fld.mass[::-1, ...]
        lo = np.zeros(step.dim, dtype=np.int64)
        lo[0] = 1 - (fld.box[0][1])  # after flip, first axis spans [1-hi, 0]
        for j in range(1, step.dim):
            lo[j] = fld.box[j][0]
        out.append((np.ascontiguousarray(arr), lo))
    return out


def p_n_via_min_decomposition(x, y, n: int, step: StepDistribution,
                              b_tables=None, plus_kernels=None) -> float:
    """p_n(x, y) by decomposing at the minimum of the first coordinate.

    Valid for x on the closed half space (x1 >= 0) and y inside (y1 >= 1);
    z1 runs over (0, min(x1, y1+1)].
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if x[0] < 0 or y[0] < 1:
        raise ParameterError("need x1 >= 0 and y1 >= 1")
    b_tab = b_tables if b_tables is not None else bn_table(step, n)
    p_tab = plus_kernels if plus_kernels is not None else descent_kernels(step, n)
    z1_hi = int(min(x[0], y[0] + 1))
    if z1_hi < 1:
        # no interior minimum level available: only x1 = 0 walks, which must
        # immediately behave like the origin walk
        return p_n_via_recursion(y - x, n, step, table=b_tab) if x[0] == 0 else 0.0
    total = 0.0
    for k in range(0, n + 1):
        p_arr, p_lo = p_tab[k]
        b_arr, b_lo = b_tab[n - k]
        # restrict p+_k(z - x) to 1 <= z1 <= z1_hi, i.e. w1 in [1-x1, z1_hi-x1]
        w_lo, w_hi = 1 - int(x[0]), z1_hi - int(x[0])
        a0 = int(p_lo[0])
        a1 = a0 + p_arr.shape[0] - 1
        o0, o1 = max(a0, w_lo), min(a1, w_hi)
        if o0 > o1:
            continue
        sub = p_arr[o0 - a0 : o1 - a0 + 1]
        sub_lo = p_lo.copy()
        sub_lo[0] = o0
        total += _dot_shifted(sub, sub_lo, b_arr, b_lo, y - x)
    return total


# -- generating-function identity check --------------------------------------


def bs_coefficients(step: StepDistribution, t, n_max: int):
    """Coefficient sequences of the killed-walk / free-walk CF identity.

    Left side: L_n = E[exp(i t.S(n)); tau_0 > n] from the killed DP.
    Right side: coefficients of exp( sum_n s^n/n E[exp(i t.S(n)); S1(n) > 0] )
    by exact power-series exponentiation.  Both sequences start with 1 at
    n = 0 and must agree identically in n.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size != step.dim:
        raise ParameterError("frequency vector must match the step dimension")

    def phases(lo, shape):
        acc = np.zeros(shape)
        for ax in range(len(shape)):
            coords = (np.arange(shape[ax]) + lo[ax]) * t[ax]
            view = [None] * len(shape)
            view[ax] = slice(None)
            acc = acc + coords[tuple(view)]
        return np.exp(1j * acc)

    lhs = np.empty(n_max + 1, dtype=complex)
    lhs[0] = 1.0
    for fld in killed_fields([0] * step.dim, n_max, step):
        if fld.time == 0:
            continue
        lo = np.array([b[0] for b in fld.box])
        lhs[fld.time] = np.sum(fld.mass * phases(lo, fld.mass.shape))

    gamma = np.empty(n_max + 1, dtype=complex)
    gamma[0] = 0.0
    for n, (arr, lo) in enumerate(restricted_free_kernels(step, n_max)):
        if n == 0:
            continue
        gamma[n] = np.sum(arr * phases(lo, arr.shape))

    rhs = np.empty(n_max + 1, dtype=complex)
    rhs[0] = 1.0
    for n in range(1, n_max + 1):
        rhs[n] = sum(gamma[k] * rhs[n - k] for k in range(1, n + 1)) / n
    return lhs, rhs


# -- Green function -----------------------------------------------------------


@dataclass
class GreenResult:
    """Partial Green sum with a certified (empirical-constant) tail bound."""

    x: tuple
    y: tuple
    partial: float
    tail_bound: float
    n_max: int
    c_emp: float
    tail_mode: str
    escaped_mass: float = 0.0
    flags: dict = dc_field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.partial

    @property
    def upper(self) -> float:
        return self.partial + self.tail_bound


def green_series(x, ys, step: StepDistribution, n_max: int,
                 box: Box | None = None, policy: str = "error",
                 ladder=None, scaling=None, tail_mode: str = "p11") -> list[GreenResult]:
    """Green values G(x, y) for several targets from one DP sweep.

    tail_mode 'p11' certifies sum_{n > n_max} p_n with the renewal skeleton
    (requires ladder tables and a scaling sequence); 'none' reports a zero
    bound and flags the truncation.
    """
    x = tuple(int(v) for v in np.atleast_1d(x))
    ys = [tuple(int(v) for v in np.atleast_1d(y)) for y in ys]
    if tail_mode not in ("p11", "none"):
        raise ParameterError("tail_mode must be 'p11' or 'none'")
    if tail_mode == "p11" and (ladder is None or scaling is None):
        raise ParameterError("tail_mode 'p11' needs ladder tables and a scaling sequence")

    acc = np.zeros(len(ys))
    ratio_max = np.zeros(len(ys))
    esc = 0.0
    v_x = ladder.V(x[0]) if ladder is not None else float("nan")
    d = step.dim
    for fld in killed_fields(x, n_max, step, box, policy):
        p_now = fld.prob_many(ys)
        acc += p_now
        esc = fld.escaped_mass
        n = fld.time
        if tail_mode == "p11" and n >= 1:
            c_n = scaling(n)
            for j, y in enumerate(ys):
                if p_now[j] > 0.0:
                    skel = v_x * ladder.H(min(c_n, y[0])) / (n * c_n**d)
                    if skel > 0:
                        ratio_max[j] = max(ratio_max[j], p_now[j] / skel)

    out = []
    for j, y in enumerate(ys):
        if tail_mode == "none":
            out.append(GreenResult(x, y, float(acc[j]), 0.0, n_max, float("nan"),
                                   tail_mode, esc, {"truncated": True}))
            continue
        bound, flags = _p11_tail(ratio_max[j] * v_x, y[0], ladder, scaling, n_max, d)
        flags["empirical_constant"] = True
        out.append(GreenResult(x, y, float(acc[j]), bound, n_max, float(ratio_max[j]),
                               tail_mode, esc, flags))
    return out


def _p11_tail(coef: float, y1: int, ladder, scaling, n_max: int, d: int,
              rel_stop: float = 1e-12, hard_cap: int = 4_000_000):
    """coef * sum_{n > n_max} H(min(c_n, y1)) / (n c_n^d).

    The summand is nonincreasing in n, so geometric blocks bounded by their
    left endpoint give an upper bound; the final remainder uses the local
    power-law slope (regular variation makes it asymptotically exact, and
    the whole bound is empirical because coef is).
    """
    flags: dict = {}
    if coef <= 0.0:
        return 0.0, flags

    def h(n: int) -> float:
        c_n = scaling(n)
        return ladder.H(min(c_n, y1)) / (n * c_n**d)

    total = 0.0
    n_lo = n_max + 1
    h_lo = h(n_lo)
    while n_lo < hard_cap and h_lo * n_lo > rel_stop * max(total, 1e-300):
        n_hi = max(n_lo, int(n_lo * 1.1))
        total += h_lo * (n_hi - n_lo + 1)
        n_lo = n_hi + 1
        h_lo = h(n_lo)
    h2 = h(2 * n_lo)
    if h2 > 0.0 and h_lo > 0.0:
        slope = math.log(h2 / h_lo) / math.log(2.0)
        if slope >= -1.0:
            flags["divergence_warning"] = True
            return float("inf"), flags
        total += h_lo * n_lo / (-slope - 1.0)
    return coef * total, flags


def green_exact(x, y, step: StepDistribution, n_max: int,
                tail_mode: str = "p11", box: Box | None = None,
                policy: str = "error", ladder=None, scaling=None) -> GreenResult:
    """G(x, y) = sum_n p_n(x, y) truncated at n_max with a certified bound."""
    return green_series(x, [y], step, n_max, box, policy, ladder, scaling, tail_mode)[0]
