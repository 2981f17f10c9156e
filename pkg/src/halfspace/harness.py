"""Experiment orchestration: configuration, comparison tables, constant
fitting, and deterministic CSV/JSON reports.

Every run is a pure function of (config, seed): rows are emitted in grid
order, floats are written with 17 significant digits, JSON keys are sorted,
and nothing time- or path-dependent enters the outputs, so identical inputs
give identical bytes.  Grid cells may run on a thread pool; each cell draws
from its own counter-based substream, so the schedule cannot change results.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .asymptotics import (
    AsymptoticContext,
    RVSurrogate,
    bound_large_dev,
    fit_renewal_surrogates,
    fit_slowly_varying,
    meander_density_from_histogram,
    predict_green,
    predict_normal_dev,
    predict_small_dev,
)
from .errors import FitError, ParameterError
from .ladder import ladder_data
from .lattice import auto_box, green_series, killed_fields
from .mc import HeavyStepSampler, estimate_pn_cube, meander_histogram
from .stable import ScalingSeq, StableParams, TailProfile, limit_scale
from .steps import ParetoStep, StepDistribution, step_from_config

SCHEMA_VERSION = 1
MODES = ("exact", "mc", "compare", "green", "meander", "verify", "table")
MC_MODES = ("mc", "meander")


@dataclass
class ExperimentConfig:
    """JSON-serialisable description of one experiment."""

    walk: dict
    mode: str
    x_grid: list = dc_field(default_factory=list)
    y_grid: list = dc_field(default_factory=list)
    n_grid: list = dc_field(default_factory=list)
    r: float = 1.0
    samples: int = 0
    horizon: int = 10_000
    bins: int = 20
    seed: int | None = None
    out: str = "out"
    threads: int = 1
    box: list | None = None
    ladder_u: int = 256
    ladder_horizon: int = 4096
    regime_a: float = 5.0
    tail_target: float = 1e-3
    alpha: float | None = None
    beta: float = 0.0
    verify_level: str = "quick"
    emit_plot: bool = False
    tolerances: dict = dc_field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.mode in ("exact", "mc", "compare", "green"):
            if not self.x_grid or not self.y_grid or not self.n_grid:
                raise ParameterError(f"mode {self.mode!r} needs non-empty x/y/n grids")
        if self.mode == "meander" and not self.n_grid:
            raise ParameterError("meander mode needs a non-empty n grid")
        if self.mode in MC_MODES or (self.mode == "compare" and self.samples):
            if self.seed is None:
                raise ParameterError(f"mode {self.mode!r} needs a seed")
            if self.samples <= 0:
                raise ParameterError(f"mode {self.mode!r} needs samples > 0")
        if self.threads < 1:
            raise ParameterError("threads >= 1")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict | str | Path) -> "ExperimentConfig":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**obj)


@dataclass
class ComparisonRow:
    """One measured-vs-predicted cell of a sweep."""

    x: tuple
    y: tuple
    n: int
    measured: float
    stderr: float | None
    exact: bool
    predicted: float | None
    ratio: float | None
    regime: str

    @staticmethod
    def make(x, y, n, measured, stderr, exact, predicted, regime) -> "ComparisonRow":
        ratio = None
        if predicted is not None and predicted > 0.0:
            ratio = measured / predicted
        return ComparisonRow(tuple(x), tuple(y), int(n), float(measured),
                             stderr, exact, predicted, ratio, regime)


def regime_tag(x1: float, y1: float, dist: float, n: int, c_n: float,
               a_factor: float = 5.0) -> str:
    """'small' when both boundary distances are below c_n/log n, 'large' when
    |x-y| >= a_factor * c_n, otherwise 'normal'."""
    delta = c_n / math.log(max(n, 3))
    if x1 <= delta and y1 <= delta and dist < a_factor * c_n:
        return "small"
    if dist >= a_factor * c_n:
        return "large"
    return "normal"


@dataclass(frozen=True)
class ConstantFit:
    value: float
    dispersion: float  # interquartile range / median
    n_rows: int
    statistic: str
    stable: bool


def fit_constant(ratios, statistic: str = "max", min_rows: int = 5,
                 dispersion_cap: float = 0.5) -> ConstantFit:
    """Empirical constant from measured/skeleton ratios.

    ``statistic`` is 'max' (for bounds) or 'median' (for asymptotics); the
    fit is flagged unstable when the interquartile dispersion exceeds 50%.
    """
    vals = np.asarray([r for r in ratios if r is not None and np.isfinite(r)], dtype=float)
    if vals.size < min_rows:
        raise FitError(f"need at least {min_rows} ratios, got {vals.size}")
    if statistic == "max":
        value = float(vals.max())
    elif statistic == "median":
        value = float(np.median(vals))
    else:
        raise ParameterError("statistic must be 'max' or 'median'")
    q25, q50, q75 = np.percentile(vals, [25, 50, 75])
    dispersion = float((q75 - q25) / q50) if q50 > 0 else float("inf")
    return ConstantFit(value, dispersion, int(vals.size), statistic,
                       dispersion <= dispersion_cap)


# -- deterministic reports ----------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (tuple, list, np.ndarray)):
        return "|".join(_fmt(float(c) if isinstance(c, float) else c) for c in v)
    return str(v)


ROW_COLUMNS = ["x", "y", "n", "measured", "stderr", "exact", "predicted", "ratio", "regime"]


def write_rows_csv(path: Path, rows: list[ComparisonRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROW_COLUMNS)
        for r in rows:
            w.writerow([
                _fmt(r.x), _fmt(r.y), r.n, _fmt(r.measured), _fmt(r.stderr),
                _fmt(r.exact), _fmt(r.predicted), _fmt(r.ratio), r.regime,
            ])


def write_histogram_csv(path: Path, hists) -> None:
    """Meander histograms as (n, bin lower corner, mass) rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "bin_lo", "mass"])
        for h in hists:
            lows = np.meshgrid(*[e[:-1] for e in h.edges], indexing="ij")
            flat = [low.ravel() for low in lows]
            for i, m in enumerate(h.masses.ravel()):
                corner = tuple(float(f[i]) for f in flat)
                w.writerow([h.n, _fmt(corner), _fmt(float(m))])
            w.writerow([h.n, "out", _fmt(h.out_mass)])


def write_summary(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


PLOT_TEMPLATE = """# gnuplot script generated by the halfspace harness
set datafile separator ','
set logscale xy
set xlabel 'n'
set ylabel 'measured / predicted'
plot '{csv}' using 3:8 every ::1 with points title 'ratio'
"""


def write_plot_script(path: Path, csv_name: str) -> None:
    path.write_text(PLOT_TEMPLATE.format(csv=csv_name))


# -- context assembly ---------------------------------------------------------


def build_context(step, alpha: float, beta: float = 0.0,
                  ladder_u: int = 256, ladder_horizon: int = 4096,
                  tail: TailProfile | None = None,
                  with_surrogates: bool = True) -> AsymptoticContext:
    """Assemble the asymptotic context for a lattice walk."""
    if not isinstance(step, StepDistribution):
        raise ParameterError("build_context expects a lattice step")
    d = step.dim
    params = StableParams(alpha, beta, limit_scale(d, alpha), d, "isotropic")
    ld = ladder_data(step, U=ladder_u, horizon=ladder_horizon)
    sur_h = sur_v = None
    if with_surrogates:
        try:
            sur_h, sur_v = fit_renewal_surrogates(ld, alpha, params.rho)
        except FitError:
            pass
    if tail is None and alpha < 2:
        tail = tail_profile_from_lattice(step, alpha)
    return AsymptoticContext(
        params=params,
        scaling=ScalingSeq(step),
        ladder=ld,
        tail=tail,
        surrogate_H=sur_h,
        surrogate_V=sur_v,
    )


def tail_profile_from_lattice(step: StepDistribution, alpha: float,
                              probe_fraction: float = 0.125) -> TailProfile:
    """Power-law tail profile calibrated on the step's own (truncated) tail."""
    norms = np.sqrt((step.support.astype(float) ** 2).sum(axis=1))
    t0 = max(norms.max() * probe_fraction, 2.0)
    p_tail = float(step.probs[norms > t0].sum())
    if p_tail <= 0:
        raise ParameterError("step has no mass beyond the probe radius")
    scale = p_tail * t0**alpha
    return TailProfile.power(scale, alpha, step.dim)


def _cell_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence((int(seed), int(idx))).generate_state(1)[0])


# -- mode drivers -------------------------------------------------------------


def _grid_cells(cfg: ExperimentConfig):
    for x in cfg.x_grid:
        for y in cfg.y_grid:
            for n in cfg.n_grid:
                yield tuple(np.atleast_1d(x)), tuple(np.atleast_1d(y)), int(n)


def _run_exact(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    step = step_from_config(cfg.walk)
    if not isinstance(step, StepDistribution):
        raise ParameterError("exact mode needs a lattice walk")
    n_max = max(cfg.n_grid)
    wanted_n = set(int(n) for n in cfg.n_grid)
    box = tuple(tuple(b) for b in cfg.box) if cfg.box else None

    def sweep(x):
        rows = []
        ys = [tuple(np.atleast_1d(y)) for y in cfg.y_grid]
        for fld in killed_fields(np.atleast_1d(x), n_max, step, box):
            if fld.time in wanted_n:
                for y in ys:
                    rows.append(ComparisonRow.make(
                        np.atleast_1d(x), y, fld.time, fld.prob(y),
                        None, True, None, "exact"))
        return rows

    xs = list(cfg.x_grid)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            chunks = list(ex.map(sweep, xs))
    else:
        chunks = [sweep(x) for x in xs]
    rows = [r for ch in chunks for r in ch]
    write_rows_csv(out / "rows.csv", rows)
    return 0, {"n_rows": len(rows)}


def _run_mc(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    sampler = HeavyStepSampler(step_from_config(cfg.walk))
    cells = list(_grid_cells(cfg))

    def one(args):
        idx, (x, y, n) = args
        est = estimate_pn_cube(sampler, x, y, cfg.r, n, cfg.samples,
                               _cell_seed(cfg.seed, idx))
        return ComparisonRow.make(x, y, n, est.value, est.stderr, False, None, "mc")

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            rows = list(ex.map(one, enumerate(cells)))
    else:
        rows = [one(a) for a in enumerate(cells)]
    write_rows_csv(out / "rows.csv", rows)
    return 0, {"n_rows": len(rows)}


def _require_alpha(cfg: ExperimentConfig) -> float:
    alpha = cfg.alpha if cfg.alpha is not None else cfg.walk.get("alpha")
    if alpha is None:
        raise ParameterError("compare/green modes need an alpha (config or walk family)")
    return float(alpha)


def _run_compare(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    step = step_from_config(cfg.walk)
    if not isinstance(step, StepDistribution):
        raise ParameterError("compare mode measures with the exact engine; lattice walks only")
    alpha = _require_alpha(cfg)
    ctx = build_context(step, alpha, cfg.beta, cfg.ladder_u, cfg.ladder_horizon)
    n_max = max(cfg.n_grid)
    wanted = set(int(n) for n in cfg.n_grid)
    box = tuple(tuple(b) for b in cfg.box) if cfg.box else None

    meander_dens: dict[int, object] = {}
    if cfg.samples:
        sampler = HeavyStepSampler(step)
        for n in sorted(wanted):
            hist = meander_histogram(sampler, n, cfg.samples, cfg.bins,
                                     _cell_seed(cfg.seed, n))
            meander_dens[n] = meander_density_from_histogram(hist)

    rows = []
    surv: dict[tuple, dict[int, float]] = {}
    for xi, x in enumerate(cfg.x_grid):
        x_t = tuple(np.atleast_1d(x))
        surv[x_t] = {}
        for fld in killed_fields(np.atleast_1d(x), n_max, step, box,
                                 policy="escape" if cfg.box else "error"):
            if fld.time not in wanted:
                continue
            n = fld.time
            surv[x_t][n] = fld.live_mass() + fld.escaped_mass
            c_n = ctx.scaling(n)
            for y in cfg.y_grid:
                y_t = tuple(np.atleast_1d(y))
                dist = float(np.linalg.norm(np.subtract(y_t, x_t)))
                tag = regime_tag(x_t[0], y_t[0], dist, n, c_n, cfg.regime_a)
                if tag == "small":
                    pred = predict_small_dev(ctx, x_t, y_t, n)
                elif tag == "large" and ctx.tail is not None:
                    pred = bound_large_dev(ctx, x_t, y_t)
                elif tag == "normal" and n in meander_dens:
                    pred = predict_normal_dev(ctx, x_t, y_t, n, meander_dens[n],
                                              survival=surv[x_t][n])
                else:
                    pred = None
                rows.append(ComparisonRow.make(x_t, y_t, n, fld.prob(y_t),
                                               None, True, pred, tag))
    write_rows_csv(out / "rows.csv", rows)
    fits = {}
    for tag, stat in (("small", "median"), ("normal", "median"), ("large", "max")):
        try:
            fits[tag] = fit_constant([r.ratio for r in rows if r.regime == tag], stat)
        except FitError:
            pass
    return 0, {"n_rows": len(rows), "fitted_constants": fits,
               "surrogate_used": ctx.flags.get("surrogate_used", False)}


def _run_green(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    step = step_from_config(cfg.walk)
    alpha = _require_alpha(cfg)
    ctx = build_context(step, alpha, cfg.beta, cfg.ladder_u, cfg.ladder_horizon)
    box = tuple(tuple(b) for b in cfg.box) if cfg.box else None
    rows = []
    for x in cfg.x_grid:
        x_t = tuple(np.atleast_1d(x))
        results = green_series(x_t, cfg.y_grid, step, cfg.horizon, box,
                               "escape" if cfg.box else "error",
                               ladder=ctx.ladder, scaling=ctx.scaling)
        for res in results:
            pred = None
            if step.dim >= 2:
                pred = predict_green(ctx, res.x, res.y)
            rows.append(ComparisonRow.make(res.x, res.y, cfg.horizon, res.value,
                                           res.tail_bound, True, pred, "green"))
    write_rows_csv(out / "rows.csv", rows)
    summary = {"n_rows": len(rows)}
    try:
        summary["fitted_constants"] = {
            "green": fit_constant([r.ratio for r in rows], "median")
        }
    except FitError:
        pass
    return 0, summary


def _run_meander(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    sampler = HeavyStepSampler(step_from_config(cfg.walk))
    hists = []
    acceptance = {}
    for n in cfg.n_grid:
        h = meander_histogram(sampler, int(n), cfg.samples, cfg.bins,
                              _cell_seed(cfg.seed, int(n)))
        if h.acceptance_rate < 1e-4:
            raise ParameterError(
                f"acceptance rate {h.acceptance_rate:.2e} at n={n} below 1e-4; "
                "reduce n or raise samples"
            )
        hists.append(h)
        acceptance[int(n)] = h.acceptance_rate
    write_histogram_csv(out / "rows.csv", hists)
    tv = {}
    for a, b in zip(hists, hists[1:]):
        tv[f"{a.n}->{b.n}"] = {
            "tv": a.total_variation(b),
            "mc_error": a.tv_error_bound(b),
        }
    return 0, {"acceptance": acceptance, "tv_table": tv,
               "n_accepted": {h.n: h.n_accepted for h in hists}}


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """Execute one experiment; returns the process exit status."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "verify":
        from .verify import run_checks

        results = run_checks(cfg.verify_level)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "mode": "verify",
            "level": cfg.verify_level,
            "checks": {r.name: {"passed": r.passed, "details": r.details} for r in results},
        }
        write_summary(out / "summary.json", payload)
        return 0 if all(r.passed for r in results) else 1

    if cfg.mode == "table":
        _print_table(out / "rows.csv")
        return 0

    driver = {
        "exact": _run_exact,
        "mc": _run_mc,
        "compare": _run_compare,
        "green": _run_green,
        "meander": _run_meander,
    }[cfg.mode]
    status, extra = driver(cfg, out)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "config": cfg.to_json(),
    }
    payload.update(extra)
    write_summary(out / "summary.json", payload)
    if cfg.emit_plot:
        write_plot_script(out / "plot.gp", "rows.csv")
    return status


def _print_table(csv_path: Path) -> None:
    if not csv_path.exists():
        raise ParameterError(f"no rows.csv at {csv_path}")
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    widths = [max(len(cell) for cell in col) for col in zip(*rows)]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
