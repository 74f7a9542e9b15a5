"""Convergence experiments, CSV tables and the property-verification suite."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dispersive import (
    CBRT4,
    LambdaSet,
    amplification,
    apply_exact,
    derivative_multiplier_bound,
    lambda4,
    lambda5,
    lambda_set,
    moment,
    moment_violations,
    stability_identity_residual,
)
from .elliptic import (
    complete_K,
    corrected_cnoidal,
    jacobi_cn,
    printed_cn_wave,
    pde_residual,
)
from .errors import ConfigError, NumericalFailure
from .fourier import TrigPolynomial
from .grid import make_uniform_grid
from .interpolation import Builder, interpolate, interpolation_error_norms, p1_orthogonality_residual
from .norms import error_norms, hs_seminorm, l2_norm, weighted_norm
from .quadrature import gauss_rule
from .stepper import FluxSpec, SchemeConfig, consistency_error, numerical_solution, run

log = logging.getLogger(__name__)

THREADS_ENV = "DISPERSL_THREADS"
SWEEP_KINDS = ("dt", "h", "none")
REFERENCES = ("cnoidal", "printed", "none")


@dataclass(frozen=True)
class ExperimentSpec:
    nu: float = 1e-3
    flux: FluxSpec = field(default_factory=FluxSpec.kdv)
    lambda_name: str = "L5"
    interpolation: str = "hermite"
    nx: int | None = 1000
    dt: float | None = None
    t_end: float = 1.0
    fp_tol: float = 1e-13
    fp_max_iter: int = 100
    sweep: str = "none"
    dt_list: tuple[float, ...] = ()
    h_list: tuple[float, ...] = ()
    dt_rule_coeff: float | None = None
    dt_rule_exp: float | None = None
    reference: str = "cnoidal"
    initial: str | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.sweep not in SWEEP_KINDS:
            raise ConfigError(f"sweep must be one of {SWEEP_KINDS}")
        if self.reference not in REFERENCES:
            raise ConfigError(f"reference must be one of {REFERENCES}")
        if self.initial not in (None, "cnoidal", "printed"):
            raise ConfigError("initial must be 'cnoidal' or 'printed'")
        if self.sweep == "dt" and not self.dt_list:
            raise ConfigError("dt sweep needs a nonempty dt_list")
        if self.sweep == "h":
            if not self.h_list:
                raise ConfigError("h sweep needs a nonempty h_list")
            if self.dt_rule_coeff is None or self.dt_rule_exp is None:
                raise ConfigError("h sweep needs dt_rule_coeff and dt_rule_exp")
            if not self.dt_rule_exp > 0:
                raise ConfigError("dt_rule_exp must be positive")
        if self.sweep in ("dt", "none") and self.nx is None:
            raise ConfigError("nx is required unless sweeping h")

    @property
    def lambda_set(self) -> LambdaSet:
        return lambda_set(self.lambda_name)

    def scheme(self, dt: float) -> SchemeConfig:
        return SchemeConfig(
            nu=self.nu,
            flux=self.flux,
            lambda_set=self.lambda_set,
            interpolation=self.interpolation,
            dt=dt,
            t_end=self.t_end,
            fp_tol=self.fp_tol,
            fp_max_iter=self.fp_max_iter,
        )

    def grid_points(self) -> list[tuple[int, float]]:
        """(nx, dt) for each row, in configured order."""
        if self.sweep == "dt":
            return [(self.nx, dt) for dt in self.dt_list]
        if self.sweep == "h":
            out = []
            for h in self.h_list:
                nx = round(1.0 / h)
                if abs(nx * h - 1.0) > 1e-12:
                    raise ConfigError(f"h = {h} is not the reciprocal of an integer")
                out.append((nx, self.dt_rule_coeff * h**self.dt_rule_exp))
            return out
        if self.dt is None:
            raise ConfigError("a single run needs dt")
        return [(self.nx, self.dt)]


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    dt: float
    final_time: float
    rel_l2_error: float | None
    hs_star_error: float | None
    weighted_error: float | None
    wall_seconds: float
    max_fp_iters: int
    status: str = "ok"


ROW_FIELDS = [f.name for f in fields(ConvergenceRow)]


# -- config files -----------------------------------------------------------

def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _number_list(text: str) -> tuple[float, ...]:
    return tuple(_number(t) for t in text.split(",") if t.strip())


_KEYS = {
    "nu", "flux", "flux_coeffs", "lambda", "interp", "nx", "dt", "t_end", "fp_tol",
    "fp_max_iter", "sweep", "dt_list", "h_list", "dt_rule_coeff", "dt_rule_exp",
    "reference", "initial", "output",
}


def parse_config(text: str) -> ExperimentSpec:
    """Parse flat ``key = value`` text; ``#`` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value

    kw: dict = {}
    try:
        if "nu" in raw:
            kw["nu"] = _number(raw["nu"])
        flux_kind = raw.get("flux", "kdv")
        kw["flux"] = FluxSpec(flux_kind, _number_list(raw.get("flux_coeffs", "")))
        if "lambda" in raw:
            lambda_set(raw["lambda"])
            kw["lambda_name"] = raw["lambda"].upper()
        if "interp" in raw:
            kw["interpolation"] = Builder(raw["interp"].lower()).value
        if "nx" in raw:
            kw["nx"] = int(raw["nx"])
        for key in ("dt", "t_end", "fp_tol", "dt_rule_coeff", "dt_rule_exp"):
            if key in raw:
                kw[key] = _number(raw[key])
        if "fp_max_iter" in raw:
            kw["fp_max_iter"] = int(raw["fp_max_iter"])
        if "sweep" in raw:
            kw["sweep"] = raw["sweep"].lower()
        for key in ("dt_list", "h_list"):
            if key in raw:
                kw[key] = _number_list(raw[key])
        if "reference" in raw:
            kw["reference"] = raw["reference"].lower()
        if "initial" in raw:
            kw["initial"] = raw["initial"].lower()
        if "output" in raw:
            kw["output_path"] = raw["output"]
        spec = ExperimentSpec(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if spec.sweep == "h" and "nx" not in raw:
        spec = replace(spec, nx=None)
    return spec


def load_config(path: str | os.PathLike) -> ExperimentSpec:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- experiments ------------------------------------------------------------

def _wave(name: str, nu: float):
    return corrected_cnoidal(nu) if name == "cnoidal" else printed_cn_wave(nu)


def run_row(spec: ExperimentSpec, nx: int, dt: float) -> ConvergenceRow:
    """One full run; numerical failures produce a row with status 'failed: ...'."""
    grid = make_uniform_grid(nx)
    cfg = spec.scheme(dt)
    start_name = spec.initial or (spec.reference if spec.reference != "none" else "cnoidal")
    start = _wave(start_name, spec.nu)
    try:
        result = run(cfg, grid, lambda x: start(x, 0.0), lambda x: start(x, 0.0, 1))
    except NumericalFailure as exc:
        log.warning("run nx=%d dt=%g failed: %s", nx, dt, exc)
        nan = float("nan")
        return ConvergenceRow(grid.h, dt, nan, None, None, None, nan, -1, f"failed: {exc}")
    rel = star = weighted = None
    if spec.reference != "none":
        ref = _wave(spec.reference, spec.nu)
        uh = numerical_solution(result.state, cfg)
        rel, star, weighted = error_norms(uh, ref.at(result.final_time), dt)
    return ConvergenceRow(
        h=grid.h,
        dt=dt,
        final_time=result.final_time,
        rel_l2_error=rel,
        hs_star_error=star,
        weighted_error=weighted,
        wall_seconds=result.wall_seconds,
        max_fp_iters=result.max_iterations,
    )


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    try:
        cap = int(raw) if raw else 0
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _run_rows(spec: ExperimentSpec, points: Sequence[tuple[int, float]]) -> list[ConvergenceRow]:
    workers = worker_count(len(points))
    if workers == 1:
        return [run_row(spec, nx, dt) for nx, dt in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_row, spec, nx, dt) for nx, dt in points]
        return [f.result() for f in futures]


def convergence_in_dt(spec: ExperimentSpec) -> list[ConvergenceRow]:
    """Fixed mesh, one run per time step; rows ordered by dt descending."""
    if spec.sweep != "dt":
        raise ConfigError("convergence_in_dt needs sweep = dt")
    points = sorted(spec.grid_points(), key=lambda p: -p[1])
    return _run_rows(spec, points)


def convergence_in_h(spec: ExperimentSpec) -> list[ConvergenceRow]:
    """dt = coeff * h^exp per mesh; final time floor(T/dt) * dt."""
    if spec.sweep != "h":
        raise ConfigError("convergence_in_h needs sweep = h")
    return _run_rows(spec, spec.grid_points())


def single_run(spec: ExperimentSpec) -> list[ConvergenceRow]:
    return _run_rows(spec, spec.grid_points())


def fit_slope(table: Sequence, x_column: str, y_column: str, tail: int = 2) -> float | None:
    """Least-squares slope of log(y) against log(x) over the last ``tail`` rows.

    Returns None when fewer than two rows are available.
    """
    rows = list(table)
    if len(rows) < 2:
        return None
    if tail < 2:
        raise ValueError("tail must be at least 2")
    rows = rows[-tail:]

    def get(row, col):
        return row[col] if isinstance(row, dict) else getattr(row, col)

    xs = np.array([get(r, x_column) for r in rows], dtype=float)
    ys = np.array([get(r, y_column) for r in rows], dtype=float)
    if np.any(~(xs > 0)) or np.any(~(ys > 0)):
        raise ValueError("slope fitting needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    lx0 = lx - lx.mean()
    return float(np.dot(lx0, ly - ly.mean()) / np.dot(lx0, lx0))


# -- CSV --------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def rows_to_csv(rows: Iterable[ConvergenceRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_fmt(v) for v in asdict(row).values()])
    return buf.getvalue()


def write_csv(rows: Iterable[ConvergenceRow], path: str | os.PathLike) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8", newline="")


def _parse_field(name: str, text: str):
    if name == "status":
        return text
    if text == "":
        return None
    if name == "max_fp_iters":
        return int(text)
    return float(text)


def csv_to_rows(text: str) -> list[ConvergenceRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ROW_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [ConvergenceRow(**{k: _parse_field(k, v) for k, v in rec.items()}) for rec in reader]


def read_csv(path: str | os.PathLike) -> list[ConvergenceRow]:
    return csv_to_rows(Path(path).read_text(encoding="utf-8"))


PLOT_SCRIPT = """\
# Log-log plot of a convergence table written by dispersl.
import csv, sys
import matplotlib.pyplot as plt

path, xcol = sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "dt"
rows = [r for r in csv.DictReader(open(path)) if r["rel_l2_error"]]
plt.loglog([float(r[xcol]) for r in rows], [float(r["rel_l2_error"]) for r in rows], "o-")
plt.xlabel(xcol)
plt.ylabel("relative L2 error")
plt.grid(True, which="both")
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"""


# -- property verification --------------------------------------------------

@dataclass
class PropertyResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        text = f"[{mark}] {self.name}: value={self.value:.6g} threshold={self.threshold:.6g}"
        return text + (f" ({self.detail})" if self.detail else "")


@dataclass
class VerificationReport:
    seed: int
    results: list[PropertyResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def pattern(self) -> tuple[tuple[str, bool], ...]:
        return tuple((r.name, r.passed) for r in self.results)

    def text(self) -> str:
        lines = [r.line() for r in self.results]
        n_fail = sum(not r.passed for r in self.results)
        lines.append(f"{len(self.results) - n_fail}/{len(self.results)} properties passed")
        return "\n".join(lines)


def _observed_orders(hs: Sequence[float], errs: Sequence[float]) -> np.ndarray:
    e = np.asarray(errs)
    r = np.asarray(hs)
    return np.log(e[:-1] / e[1:]) / np.log(r[:-1] / r[1:])


def check_moments(name: str, pairs, orders: Iterable[int]) -> PropertyResult:
    targets = {0: 1.0, 1: 0.0, 2: 0.0, 3: -1.0, 4: 0.0}
    worst, detail = 0.0, []
    for k in orders:
        m = moment(pairs, k)
        worst = max(worst, abs(m - targets[k]))
        detail.append(f"k={k}:{m:.6g}")
    return PropertyResult(f"moments[{name}]", worst <= 1e-12, worst, 1e-12, " ".join(detail))


def _amplification_check(ls: LambdaSet, span: float, n: int = 100_000) -> PropertyResult:
    theta = np.linspace(0.0, span, n)
    amp = amplification(ls, theta, 1.0)
    worst = float(amp.max())
    return PropertyResult(f"amplification[{ls.name}]", worst <= 1.0 + 1e-12, worst, 1.0 + 1e-12)


def _identity_check(ls: LambdaSet, rng: np.random.Generator, trials: int = 100) -> PropertyResult:
    worst = 0.0
    for _ in range(trials):
        v = TrigPolynomial.random(int(rng.integers(0, 9)), rng)
        delta = float(rng.uniform(1e-3, 0.2))
        res = stability_identity_residual(ls, v, delta) / max(v.l2_norm_sq(), 1e-300)
        worst = max(worst, res)
    return PropertyResult(f"stability_identity[{ls.name}]", worst <= 1e-12, worst, 1e-12)


def _norm_decay_check(ls: LambdaSet, rng: np.random.Generator, trials: int = 100) -> PropertyResult:
    """||S v|| <= ||v|| and |S v|_2 <= |v|_2 on exact trig polynomials."""
    worst = 0.0
    for _ in range(trials):
        v = TrigPolynomial.random(int(rng.integers(0, 17)), rng)
        delta = float(rng.uniform(1e-3, 0.2))
        sv = apply_exact(ls, v, delta)
        for s in (0, 2):
            a, b = math.sqrt(sv.seminorm_sq(s)), math.sqrt(v.seminorm_sq(s))
            if b > 0:
                worst = max(worst, a / b - 1.0)
    return PropertyResult(f"norm_nonexpansive[{ls.name}]", worst <= 1e-12, worst, 1e-12,
                          "L2 and H2-seminorm ratios minus one")


def _p1_check(builder: str, rng: np.random.Generator, pairs: int = 20) -> PropertyResult:
    worst = 0.0
    grid = make_uniform_grid(16)
    for _ in range(pairs):
        v = TrigPolynomial.random(int(rng.integers(1, 6)), rng)
        w = TrigPolynomial.random(int(rng.integers(1, 6)), rng)
        scale = math.sqrt(v.seminorm_sq(2) * w.seminorm_sq(2))
        worst = max(worst, abs(p1_orthogonality_residual(v, w, grid, builder)) / scale)
    return PropertyResult(f"P1_orthogonality[{builder}]", worst <= 1e-8, worst, 1e-8)


def interpolation_rates(builder: str, nxs=(16, 32, 64, 128)):
    v = TrigPolynomial.from_cos_sin(sin=[1.0])
    errs = [interpolation_error_norms(v, make_uniform_grid(n), builder) for n in nxs]
    hs = [1.0 / n for n in nxs]
    l2 = _observed_orders(hs, [e[0] for e in errs])
    h2 = _observed_orders(hs, [e[1] for e in errs])
    return l2, h2


def _rate_checks(builder: str) -> list[PropertyResult]:
    l2, h2 = interpolation_rates(builder)
    return [
        PropertyResult(f"P2_L2_order[{builder}]", bool(l2.min() >= 3.8), float(l2.min()), 3.8),
        PropertyResult(f"P3_H2_order[{builder}]", bool(h2.min() >= 1.8), float(h2.min()), 1.8),
    ]


def _weighted_stability_check(builder: str, rng: np.random.Generator, budget: float = 10.0):
    worst = -np.inf
    for nx in (32, 64):
        grid = make_uniform_grid(nx)
        h = grid.h
        for dt in (h**4, 10 * h**4, 1e-4, 1e-3, 1e-2):
            v = TrigPolynomial.random(int(rng.integers(1, 6)), rng)
            iv = interpolate(v, grid, builder)
            lhs = weighted_norm(l2_norm(lambda x: iv(x), grid), hs_seminorm(iv, 2), 2, h, dt)
            rhs = weighted_norm(math.sqrt(v.l2_norm_sq()), math.sqrt(v.seminorm_sq(2)), 2, h, dt)
            worst = max(worst, lhs / rhs - (1.0 + budget * dt))
    return PropertyResult(f"weighted_interp_stability[{builder}]", worst <= 0.0, worst, 0.0,
                          f"max of ratio - (1 + {budget:g} dt)")


CONSISTENCY_DTS = (1e-2, 5e-3, 2.5e-3)


def consistency_orders(ls: LambdaSet, nu: float = 1e-3, nx: int = 256, t_n: float = 0.5):
    wave = corrected_cnoidal(nu)
    grid = make_uniform_grid(nx)
    l2 = []
    star = []
    for dt in CONSISTENCY_DTS:
        cfg = SchemeConfig(nu, FluxSpec.kdv(), ls, "hermite", dt, 1.0)
        a, b = consistency_error(wave, t_n, cfg, grid)
        l2.append(a)
        star.append(b)
    return _observed_orders(CONSISTENCY_DTS, l2), _observed_orders(CONSISTENCY_DTS, star)


def _consistency_check(ls: LambdaSet, threshold: float) -> PropertyResult:
    l2, star = consistency_orders(ls)
    order = float(l2.min())
    return PropertyResult(f"D3_consistency_order[{ls.name}]", order >= threshold, order, threshold,
                          f"H2-star order {star.min():.3f}")


def residual_comparison(nu: float, rng: np.random.Generator, n_points: int = 100):
    """Max |PDE residual| of the cn^2 wave and of the printed cn profile."""
    flux = FluxSpec.kdv()
    good = corrected_cnoidal(nu)
    bad = printed_cn_wave(nu)
    xs = rng.uniform(0.0, 1.0, n_points)
    ts = rng.uniform(0.0, 1.0, n_points)
    r_good = max(abs(pde_residual(good, nu, flux, x, t)) for x, t in zip(xs, ts))
    r_bad = max(abs(pde_residual(bad, nu, flux, x, t)) for x, t in zip(xs, ts))
    scale = nu * float(np.max(np.abs(good(np.linspace(0, 1, 1001), 0.0, 3))))
    return r_good, r_bad, scale


def _elliptic_checks(rng: np.random.Generator) -> list[PropertyResult]:
    out = []
    worst = 0.0
    for k in (0.3, 1.0 / math.sqrt(2.0), 0.9):
        x = rng.uniform(-10.0, 10.0, 200)
        e = 1e-3
        cn = jacobi_cn(x, k)
        d = (-jacobi_cn(x + 2 * e, k) + 8 * jacobi_cn(x + e, k) - 8 * jacobi_cn(x - e, k)
             + jacobi_cn(x - 2 * e, k)) / (12 * e)
        worst = max(worst, float(np.max(np.abs(d**2 - (1 - cn**2) * (1 - k * k + k * k * cn**2)))))
    out.append(PropertyResult("cn_first_integral", worst <= 1e-9, worst, 1e-9))

    worst = 0.0
    for k in (0.3, 1.0 / math.sqrt(2.0), 0.9):
        x = rng.uniform(-50.0, 50.0, 200)
        worst = max(worst, float(np.max(np.abs(jacobi_cn(x + 4 * complete_K(k), k) - jacobi_cn(x, k)))))
    out.append(PropertyResult("cn_period_4K", worst <= 1e-10, worst, 1e-10))

    ks = np.linspace(0.0, 0.99, 100)
    diffs = np.diff([complete_K(k) for k in ks])
    out.append(PropertyResult("K_monotone", bool(np.all(diffs > 0)), float(diffs.min()), 0.0))

    r_good, r_bad, scale = residual_comparison(1e-3, rng)
    out.append(PropertyResult("cnoidal_pde_residual", r_good <= 1e-6 * scale, r_good, 1e-6 * scale))
    ratio = r_bad / max(r_good, 1e-300)
    out.append(PropertyResult("printed_formula_residual_ratio", ratio >= 1e3, ratio, 1e3))
    return out


def verify_properties(seed: int = 0, extra_sets: dict[str, Sequence] | None = None
                      ) -> VerificationReport:
    """Run every structural check with a seeded generator."""
    rng = np.random.default_rng(seed)
    l4, l5 = lambda4(), lambda5()
    results = [
        check_moments("L4", l4, range(4)),
        check_moments("L5", l5, range(5)),
    ]
    for name, pairs in (extra_sets or {}).items():
        bad = moment_violations(pairs)
        k0 = moment(pairs, 0)
        results.append(PropertyResult(
            f"moments[{name}]", not bad, max((abs(v - e) for _, v, e in bad), default=0.0),
            1e-12, f"k=0:{k0:.6g}" + (f" first failing k={bad[0][0]}" if bad else ""),
        ))
    results += [
        _amplification_check(l4, 2.0 * math.pi / CBRT4 * 10),
        _amplification_check(l5, math.pi * 10),
        _identity_check(l4, rng),
        _identity_check(l5, rng),
        _norm_decay_check(l4, rng),
        _norm_decay_check(l5, rng),
    ]
    for ls in (l4, l5):
        bound = derivative_multiplier_bound(ls)
        results.append(PropertyResult(f"D2_bounded[{ls.name}]", math.isfinite(bound), bound,
                                      math.inf, "sum |gamma| (informational)"))
    for builder in ("spline", "hermite"):
        results.append(_p1_check(builder, rng))
        results += _rate_checks(builder)
        results.append(_weighted_stability_check(builder, rng))
    results.append(_consistency_check(l4, 0.30))
    results.append(_consistency_check(l5, 0.60))
    rule = gauss_rule(7)
    exact_err = rule.check_exactness()
    results.append(PropertyResult("quadrature_degree13", exact_err <= 1e-12, exact_err, 1e-12))
    results += _elliptic_checks(rng)
    return VerificationReport(seed, results)


PRINTED_L4_PAIRS = ((-0.25, CBRT4), (0.25, 0.0), (0.75, CBRT4), (-0.25, 2.0 * CBRT4))
