"""Command-line front end.

    tensor-spectra simulate --ensemble cue-tensor-cue --n 20 --samples 8192 --seed 1
    tensor-spectra void --ensemble cue2-tensor --m 8 --samples 16384 --s-grid 0,0.5,1,2
    tensor-spectra theory
    tensor-spectra lemmas
    tensor-spectra reproduce-fig1 --output fig1.csv

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from . import kernel_theory as kt
from . import lemma_lab as ll
from .ensembles import EnsembleSpec, Kind
from .errors import NumericalError, TensorSpectraError
from .spectral_stats import (
    histogram_from_values,
    ks_exponential,
    pooled_spacings,
    void_curve,
)

log = logging.getLogger("tensor_spectra")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3

COMMANDS = ("simulate", "void", "theory", "lemmas", "reproduce-fig1", "reproduce-fig2")
FIGURE_RUNS = {
    "reproduce-fig1": (Kind.CUE_TENSOR_CUE, ((2, 2**17), (3, 2**16), (20, 2**13))),
    "reproduce-fig2": (Kind.CUE2_TENSOR, ((2, 2**17), (3, 2**16), (8, 2**14))),
}
KS_LIMIT = 0.02


class UsageError(TensorSpectraError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    runs: tuple[EnsembleSpec, ...] = ()
    bins: int = 40
    s_max: float = 4.0
    s_grid: tuple[float, ...] = ()
    downscale: int = 0
    seed: int = 0
    output: str | None = None
    fmt: str = "csv"
    workers: int | str = "auto"

    def echo(self) -> dict[str, str]:
        """Everything that determines the payload; worker count and paths excluded."""
        out = {"command": self.command, "seed": str(self.seed)}
        if self.command in ("simulate", "void"):
            spec = self.runs[0]
            out["ensemble"] = spec.kind.value
            out["m" if spec.kind is Kind.CUE2_TENSOR else "n"] = str(spec.size)
            out["samples"] = str(spec.samples)
        if self.command in ("simulate", "reproduce-fig1", "reproduce-fig2"):
            out["bins"] = str(self.bins)
            out["s_max"] = repr(self.s_max)
        if self.command == "void":
            out["s_grid"] = ",".join(repr(s) for s in self.s_grid)
        if self.command.startswith("reproduce") and self.downscale:
            out["downscale"] = str(self.downscale)
        return out


@dataclass
class RunReport:
    config: RunConfig
    columns: list[str]
    rows: list[list[Any]]
    extra: dict[str, Any] = field(default_factory=dict)
    checks: list[dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensor-spectra", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", "-o")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", default="auto")
        if name in ("simulate", "void"):
            p.add_argument("--ensemble", required=True, choices=[k.value for k in Kind])
            p.add_argument("--n", type=int)
            p.add_argument("--m", type=int)
            p.add_argument("--samples", type=int, default=4096)
        if name in ("simulate", "reproduce-fig1", "reproduce-fig2"):
            p.add_argument("--bins", type=int, default=40)
            p.add_argument("--s-max", type=float, default=4.0)
        if name == "void":
            p.add_argument("--s-max", type=float, default=4.0)
            p.add_argument("--ds", type=float, default=0.1)
            p.add_argument("--s-grid")
        if name.startswith("reproduce"):
            p.add_argument("--downscale", type=int, default=0,
                           help="divide every sample count by 2**DOWNSCALE")
    return parser


def _parse_workers(value: str) -> int | str:
    if value == "auto":
        return value
    try:
        w = int(value)
    except ValueError:
        raise UsageError(f"--workers must be an integer or 'auto', got {value!r}") from None
    if w < 1:
        raise UsageError("--workers must be >= 1")
    return w


def parse_config(argv: list[str]) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError(f"a command is required: one of {', '.join(COMMANDS)}")
    common = dict(command=ns.command, seed=ns.seed, output=ns.output, fmt=ns.fmt,
                  workers=_parse_workers(ns.workers))
    if ns.command in ("simulate", "void"):
        kind = Kind(ns.ensemble)
        want, other = ("m", "n") if kind is Kind.CUE2_TENSOR else ("n", "m")
        if getattr(ns, other) is not None:
            raise UsageError(f"--{other} does not apply to ensemble {kind.value}; use --{want}")
        size = getattr(ns, want)
        if size is None:
            raise UsageError(f"ensemble {kind.value} requires --{want}")
        try:
            spec = EnsembleSpec(kind, size, ns.samples, ns.seed)
        except TensorSpectraError as exc:
            raise UsageError(str(exc)) from None
        common["runs"] = (spec,)
    if ns.command == "simulate" or ns.command.startswith("reproduce"):
        if ns.bins < 1 or not ns.s_max > 0:
            raise UsageError("need --bins >= 1 and --s-max > 0")
        common.update(bins=ns.bins, s_max=ns.s_max)
    if ns.command == "void":
        if ns.s_grid:
            try:
                grid = tuple(float(t) for t in ns.s_grid.split(","))
            except ValueError:
                raise UsageError(f"bad --s-grid {ns.s_grid!r}") from None
        else:
            if not (ns.ds > 0 and ns.s_max > 0):
                raise UsageError("need --ds > 0 and --s-max > 0")
            steps = int(round(ns.s_max / ns.ds))
            grid = tuple(float(i * ns.ds) for i in range(steps + 1))
        if any(g < 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise UsageError("--s-grid must be non-negative and strictly increasing")
        common.update(s_grid=grid, s_max=grid[-1])
    if ns.command.startswith("reproduce"):
        if ns.downscale < 0:
            raise UsageError("--downscale must be >= 0")
        kind, plan = FIGURE_RUNS[ns.command]
        common["runs"] = tuple(
            EnsembleSpec(kind, size, max(1, samples >> ns.downscale), ns.seed) for size, samples in plan
        )
        common["downscale"] = ns.downscale
    return RunConfig(**common)


def config_from_echo(lines) -> RunConfig:
    """Rebuild a RunConfig from the ``# key=value`` header of a persisted CSV."""
    echo = {}
    for line in lines:
        line = line.strip()
        if not line.startswith("#"):
            break
        key, _, value = line[1:].strip().partition("=")
        echo[key] = value
    argv = [echo.pop("command")]
    for key, value in echo.items():
        argv += ["--" + key.replace("_", "-"), value]
    return parse_config(argv)


def _check(name: str, passed: bool, **detail) -> dict[str, Any]:
    return {"name": name, "passed": bool(passed), **detail}


def _histogram_rows(spec: EnsembleSpec, config: RunConfig):
    values = pooled_spacings(spec, config.workers)
    hist = histogram_from_values(values, config.bins, config.s_max)
    rows = [
        [float(a), float(b), float(d), int(c)]
        for a, b, d, c in zip(hist.edges[:-1], hist.edges[1:], hist.values, hist.counts)
    ]
    return rows, hist, ks_exponential(values)


def _run_simulate(config: RunConfig) -> RunReport:
    spec = config.runs[0]
    rows, hist, ks = _histogram_rows(spec, config)
    extra = {"ks_exponential": ks, "total_spacings": hist.total, "overflow": hist.overflow}
    return RunReport(config, ["bin_left", "bin_right", "density", "count"], rows, extra)


def _run_void(config: RunConfig) -> RunReport:
    spec = config.runs[0]
    curve = void_curve(spec, config.s_grid, config.workers)
    rows = [
        [float(s), float(e), float(se), int(curve.samples)]
        for s, e, se in zip(curve.s, curve.estimate, curve.stderr)
    ]
    extra = {"poisson_reference": [math.exp(-s) for s in curve.s]}
    return RunReport(config, ["s", "E_hat", "stderr", "samples"], rows, extra)


def _run_figure(config: RunConfig) -> RunReport:
    rows, ks = [], {}
    label = "M" if config.runs[0].kind is Kind.CUE2_TENSOR else "N"
    for spec in config.runs:
        r, _, ks[spec.size] = _histogram_rows(spec, config)
        for a, b, d, c in r:
            rows.append([spec.size, spec.samples, a, b, d, c, math.exp(-0.5 * (a + b)), ks[spec.size]])
    sizes = [spec.size for spec in config.runs]
    ordered = all(ks[big] < ks[small] for small, big in zip(sizes, sizes[1:]))
    checks = [
        _check("ks_decreasing", ordered, ks={str(k): v for k, v in ks.items()}),
        _check("ks_largest_below_limit", ks[sizes[-1]] < KS_LIMIT, value=ks[sizes[-1]], bound=KS_LIMIT),
    ]
    columns = [label, "samples", "bin_left", "bin_right", "density", "count", "exp_center", "ks"]
    return RunReport(config, columns, rows, {"ks_exponential": ks}, checks)


def _theory_checks(seed: int) -> list[dict[str, Any]]:
    checks = []
    err0 = max(abs(kt.sine_kernel(kt.KernelContext(n), 0.0) - n / kt.TWO_PI) for n in range(1, 65))
    checks.append(_check("sine_kernel_at_zero", err0 <= 1e-12, value=err0, bound=1e-12))
    zero_err = 0.0
    for n in range(2, 65):
        xs = kt.TWO_PI * np.arange(1, n) / n
        zero_err = max(zero_err, float(np.max(np.abs(kt.sine_kernel(kt.KernelContext(n), xs)))))
    checks.append(_check("sine_kernel_zeros", zero_err <= 1e-10, value=zero_err, bound=1e-10))
    q = kt.intensity_integral_check(kt.KernelContext(2), 2, method="quadrature")
    checks.append(_check("intensity_integral_k2_N2", abs(q.estimate - 1) <= 1e-9, value=q.estimate))
    for k, n in ((2, 4), (3, 4), (3, 6)):
        r = kt.intensity_integral_check(kt.KernelContext(n), k, mc_samples=10**5, seed=seed)
        checks.append(_check(f"intensity_integral_k{k}_N{n}", abs(r.estimate - 1) <= 3 * r.stderr,
                             value=r.estimate, stderr=r.stderr))
    for n in (2, 8, 20):
        for k in range(1, 6):
            r = kt.intensity_sup_check(kt.KernelContext(n), k, trials=10**4, seed=seed,
                                       kernel_points=10**5)
            checks.append(_check(f"intensity_bound_k{k}_N{n}", r.passed, value=r.max_intensity,
                                 bound=r.bound))
    for n in (2, 3):
        vals = [kt.void_series(kt.KernelContext(n), s).value for s in (0.0, 0.5, 1.0, 2.0)]
        mono = all(b <= a + 1e-9 for a, b in zip(vals, vals[1:])) and vals[0] == 1.0
        checks.append(_check(f"void_series_N{n}", mono, value=vals))
        grid = np.arange(1, 64) * n * n / 64
        mean = (sum(kt.tensor_pair_intensity(kt.KernelContext(n), 0.0, float(d)) for d in grid)
                + kt.tensor_pair_intensity(kt.KernelContext(n), 0.0, 1e-12)) / 64
        checks.append(_check(f"tensor_pair_mean_N{n}", abs(mean - (1 - 1 / n**2)) <= 1e-9,
                             value=mean, bound=1 - 1 / n**2))
    return checks


def _lemma_checks() -> list[dict[str, Any]]:
    checks = []
    ok = all(ll.stirling_identity_check(k, x) for k in range(1, 21) for x in range(31))
    checks.append(_check("stirling_identity", ok))
    worst = -math.inf
    all_ok = True
    for s in range(2, 9):
        for g20 in range(1, 20):
            gamma = g20 / 20
            if gamma > 1 / s - 0.05 + 1e-12:
                break
            for n in range(1, 61):
                r = ll.multinomial_tail(s, gamma, n)
                all_ok &= r.within_bound
                worst = max(worst, r.tail_float - r.hoeffding)
    checks.append(_check("multinomial_tail_below_hoeffding", all_ok, value=worst))
    t60 = ll.multinomial_tail(4, 0.1, 60).tail
    t12 = ll.multinomial_tail(4, 0.1, 12).tail
    checks.append(_check("multinomial_tail_decreasing", t60 < t12, value=[float(t60), float(t12)]))
    rep = ll.rank_lemma_check(4, 8)
    checks.append(_check("rank_lemma", rep.passed, value=rep.checked,
                         counterexamples=len(rep.counterexamples)))
    return checks


def _checks_report(config: RunConfig, checks) -> RunReport:
    rows = [[c["name"], json.dumps(c.get("value")), json.dumps(c.get("bound")), int(c["passed"])]
            for c in checks]
    return RunReport(config, ["check", "value", "bound", "passed"], rows, {}, checks)


def run(config: RunConfig) -> RunReport:
    start = time.perf_counter()
    if config.command == "simulate":
        report = _run_simulate(config)
    elif config.command == "void":
        report = _run_void(config)
    elif config.command == "theory":
        report = _checks_report(config, _theory_checks(config.seed))
    elif config.command == "lemmas":
        report = _checks_report(config, _lemma_checks())
    else:
        report = _run_figure(config)
    report.wall_time = time.perf_counter() - start
    return report


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    text = str(value)
    return '"' + text.replace('"', '""') + '"' if ("," in text or '"' in text) else text


def render_csv(report: RunReport) -> str:
    lines = [f"# {k}={v}" for k, v in report.config.echo().items()]
    lines.append(",".join(report.columns))
    lines += [",".join(_fmt(v) for v in row) for row in report.rows]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_json(report: RunReport) -> str:
    doc = {
        "config": report.config.echo(),
        "results": {
            "columns": report.columns,
            "rows": report.rows,
            "extra": report.extra,
            "checks": report.checks,
        },
        "meta": {"version": report.version, "wall_time": report.wall_time, "passed": report.passed},
    }
    return json.dumps(_jsonable(doc), indent=1) + "\n"


def persist(report: RunReport, path: str, fmt: str = "csv") -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    text = render_csv(report) if fmt == "csv" else render_json(report)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except UsageError as exc:
        _build_parser().print_usage(sys.stderr)
        print(f"tensor-spectra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run(config)
    except NumericalError as exc:
        log.error("numerical failure in %s: %s", config.command, exc)
        return EXIT_NUMERICAL
    try:
        if config.output:
            persist(report, config.output, config.fmt)
        else:
            sys.stdout.write(render_csv(report) if config.fmt == "csv" else render_json(report))
    except OSError as exc:
        log.error("could not write %s: %s", config.output, exc)
        return EXIT_USAGE
    for c in report.checks:
        log.info("%s %s", "PASS" if c["passed"] else "FAIL", c["name"])
    log.info("%s finished in %.1f s", config.command, report.wall_time)
    return EXIT_OK if report.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
