"""Command-line interface: dim, measure, operator, sweep and verify.

Every command builds a ResultTable and writes it as CSV (``#`` metadata
lines, a header row, LF line endings) or JSON ({metadata, columns, rows}).
Exit codes: 0 ok, 1 failed assertion, 2 usage error, 3 nonconvergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .errors import DomainError, NonConvergence, StaleDimension

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONV = 0, 1, 2, 3

DEFAULT_TOL = {"eigen": 1e-12, "moran": 1e-13, "root": 1e-12, "chi": 1e-9, "stale": 1e-10}


class UsageError(Exception):
    pass


# -- configuration -----------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    command: str
    kind: str = "gauss"
    n: tuple = (2,)
    grid: int = 48
    depth: int = 2
    eps: tuple = (0.3, 0.5, 0.7)
    t: tuple = (1.0,)
    families: str | None = None
    format: str = "csv"
    out: str | None = None
    seed: int = 0
    jobs: int = 1
    explain: bool = False
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    h_error: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "gauss"):
            raise UsageError(f"unknown kind {self.kind!r}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")
        if any(not (v > 0) for v in self.tol.values()):
            raise UsageError("all tolerances must be positive")
        if self.jobs < 1 or self.grid < 16 or self.depth < 1:
            raise UsageError("jobs >= 1, grid >= 16 and depth >= 1 are required")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["n"] = [_n_str(v) for v in self.n]
        d["eps"], d["t"] = list(self.eps), list(self.t)
        d.pop("out")
        return d

    @classmethod
    def from_echo(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["n"] = tuple(parse_n_token(str(v)) for v in d["n"])
        d["eps"], d["t"] = tuple(d["eps"]), tuple(d["t"])
        return cls(**d)


def _n_str(v):
    return "inf" if v == math.inf else int(v)


def parse_n_token(tok: str):
    tok = tok.strip().lower()
    if tok in ("inf", "infinity", "oo"):
        return math.inf
    try:
        v = int(tok)
    except ValueError:
        raise UsageError(f"bad n value {tok!r}") from None
    if v < 1:
        raise UsageError(f"n must be positive, got {v}")
    return v


def parse_n(spec: str, geometric: bool = False) -> tuple:
    """'5', '2,4,8' or 'a..b' (every integer, or doublings from a with --geometric)."""
    spec = str(spec).strip()
    if ".." in spec:
        a, b = (parse_n_token(p) for p in spec.split("..", 1))
        if a == math.inf or b == math.inf or a > b:
            raise UsageError(f"bad range {spec!r}")
        if geometric:
            out, v = [], a
            while v <= b:
                out.append(v)
                v *= 2
            return tuple(out)
        return tuple(range(a, b + 1))
    return tuple(parse_n_token(p) for p in spec.split(",") if p.strip())


def _floats(spec) -> tuple:
    try:
        return tuple(float(p) for p in str(spec).split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad number list {spec!r}") from None


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line without '=': {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(args) -> RunConfig:
    """Config file values first, then any flag given on the command line."""
    raw = read_config_file(args.config) if args.config else {}
    for key in ("kind", "n", "grid", "depth", "eps", "t", "families", "format", "out",
                "seed", "jobs", "h_error"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if args.explain:
        raw["explain"] = True
    geometric = args.geometric or str(raw.pop("geometric", "")).lower() in ("1", "true", "yes")
    tol = dict(DEFAULT_TOL)
    for key in [k for k in raw if k.startswith("tol.")]:
        tol[key[4:]] = raw.pop(key)
    for item in args.tol or ():
        if "=" not in item:
            raise UsageError(f"--tol expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        tol[k.strip()] = v
    try:
        tol = {k: float(v) for k, v in tol.items()}
        kw = dict(command=args.command, tol=tol)
        if "kind" in raw:
            kw["kind"] = str(raw["kind"]).lower()
        if "n" in raw:
            kw["n"] = parse_n(raw["n"], geometric)
        for key in ("grid", "depth", "seed", "jobs"):
            if key in raw:
                kw[key] = int(raw[key])
        for key in ("eps", "t"):
            if key in raw:
                kw[key] = _floats(raw[key])
        if "families" in raw:
            fam = str(raw["families"]).lower()
            kw["families"] = "" if fam in ("", "none") else fam
        if "format" in raw:
            kw["format"] = str(raw["format"]).lower()
        if "out" in raw:
            kw["out"] = raw["out"]
        if "explain" in raw:
            kw["explain"] = str(raw["explain"]).lower() in ("1", "true", "yes")
        if "h_error" in raw:
            kw["h_error"] = float(raw["h_error"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    unknown = set(raw) - {"kind", "n", "grid", "depth", "eps", "t", "families", "format",
                          "out", "seed", "jobs", "explain", "h_error"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**kw)


# -- tables -------------------------------------------------------------------------

@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    failures: int = 0

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} fields, table has {len(self.columns)} columns")
        self.rows.append(list(row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in self.metadata.items():
            buf.write(f"# {key}={json.dumps(val, sort_keys=True)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_csv_cell(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"metadata": self.metadata, "columns": self.columns,
               "rows": [[_json_cell(v) for v in row] for row in self.rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    s = str(v)
    return f'"{s}"' if ("," in s or '"' in s) else s


def _json_cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _metadata(cfg: RunConfig, **extra) -> dict:
    from .density import FITTED_C, FITTED_C3
    meta = {"config": cfg.echo(),
            "versions": {"hausgauss": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "fitted_constants": {"C": FITTED_C, "C3": FITTED_C3}}
    meta.update(extra)
    return meta


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# -- dim / sweep ------------------------------------------------------------------------

def _dim_worker(job):
    from .dimension import dimension
    kind, n, grid, tol = job
    return dimension(kind, n, grid, tol)


def cmd_dim(cfg: RunConfig) -> ResultTable:
    from .dimension import extrapolate, lyapunov_chi
    ns = sorted(_finite_ns(cfg))
    results = _pmap(_dim_worker, [(cfg.kind, n, cfg.grid, cfg.tol["root"]) for n in ns], cfg.jobs)
    extra = {}
    if cfg.kind == "linear":
        chi = lyapunov_chi(cfg.tol["chi"])
        extra["chi"] = {"value": chi.chi, "lower": chi.lower, "upper": chi.upper}
    cols = ["n", "h_n", "residual", "n_one_minus_h", "extrapolation", "degenerate"]
    if cfg.explain:
        cols += ["method", "two_grid_gap", "evaluations"]
    table = ResultTable(cols, metadata=_metadata(cfg, **extra))
    fit_n, fit_y = [], []
    for r in results:
        y = r.n * (1.0 - r.h)
        if not r.degenerate:
            fit_n.append(r.n)
            fit_y.append(y)
        ex = extrapolate(fit_n, fit_y)
        row = [r.n, r.h, r.residual, y, ex.limit if ex else math.nan, r.degenerate]
        if cfg.explain:
            row += [r.method, r.diagnostics.get("two_grid_gap", math.nan),
                    r.diagnostics.get("evaluations", r.diagnostics.get("bisections", 0))]
        table.add(*row)
    return table


def cmd_sweep(cfg: RunConfig) -> ResultTable:
    """Dimension of every n in the list; the linear kind uses the block-moment sweep."""
    from .dimension import moran_residual, moran_sweep
    ns = sorted(_finite_ns(cfg))
    table = ResultTable(["n", "h_n", "residual", "n_one_minus_h"], metadata=_metadata(cfg))
    if cfg.kind == "linear":
        hs, res = moran_sweep(max(ns[-1], 2))
        for n in ns:
            h, r = (0.0, 0.0) if n == 1 else (float(hs[n - 2]), float(res[n - 2]))
            table.add(n, h, r, n * (1.0 - h))
        # independent spot checks by direct summation
        rng = np.random.default_rng(cfg.seed)
        picks = [n for n in ns if n > 1]
        for n in rng.choice(picks, size=min(50, len(picks)), replace=False) if picks else ():
            if abs(moran_residual(int(n), float(hs[n - 2]))) >= 1e-12:
                table.failures += 1
        table.failures += int(sum(1 for row in table.rows if row[2] >= 1e-12))
        return table
    for r in _pmap(_dim_worker, [(cfg.kind, n, cfg.grid, cfg.tol["root"]) for n in ns], cfg.jobs):
        table.add(r.n, r.h, r.residual, r.n * (1.0 - r.h))
    return table


def _finite_ns(cfg):
    ns = [n for n in cfg.n if n != math.inf]
    if len(ns) != len(cfg.n):
        raise UsageError("n = inf is only meaningful for the operator command")
    return ns


# -- measure ---------------------------------------------------------------------------

FAMILY_TAGS = ("fallback", "a", "b", "c", "d")


def _measure_worker(job):
    from .density import measure_estimate
    kind, n, grid, families, eps, depth = job
    return measure_estimate(kind, n, families=families, grid_M=grid, eps_list=eps, D=depth)


def cmd_measure(cfg: RunConfig) -> ResultTable:
    from .density import FAMILY_D_MAX_N
    ns = sorted(_finite_ns(cfg))
    if any(n < 2 for n in ns):
        raise UsageError("measure needs n >= 2")
    jobs = []
    for n in ns:
        fam = cfg.families if cfg.families is not None else ("abcd" if n <= FAMILY_D_MAX_N else "abc")
        if n > FAMILY_D_MAX_N:
            fam = fam.replace("d", "")
        eps = tuple(e for e in cfg.eps if math.floor(n - n ** (1 - e)) + 1 >= 1)
        jobs.append((cfg.kind, n, cfg.grid, fam, eps, min(cfg.depth, 3)))
    results = _pmap(_measure_worker, jobs, cfg.jobs)
    cols = ["n", "h_n", "H_lower", "H_upper", "normalized", "witness_family"]
    if cfg.explain:
        cols += ["witness_lo", "witness_hi", "cap"] + [f"ratio_{t}" for t in FAMILY_TAGS]
    table = ResultTable(cols, metadata=_metadata(cfg))
    for e in results:
        row = [e.n, e.h, e.H_lower, e.H_upper, e.normalized, e.best_family]
        if cfg.explain:
            lo, hi = e.best_interval.as_float()
            row += [lo, hi, e.cap] + [float(e.family_best.get(t, math.nan)) for t in FAMILY_TAGS]
        table.add(*row)
        if e.H_upper > 1 + 1e-9:
            table.failures += 1
    return table


# -- operator --------------------------------------------------------------------------

# test functions and their BV norms (sup + total variation on [0, 1])
PROBES = (("one", lambda x: np.ones_like(x), 1.0),
          ("x", lambda x: x, 2.0),
          ("inv", lambda x: 1.0 / (1.0 + x), 1.5))


def cmd_operator(cfg: RunConfig) -> ResultTable:
    from .spectral import INF, chebyshev_grid, eigen, hensley_tail_bound, perturbation_probe
    cols = ["t", "n", "lambda", "abs_lambda_minus_1", "probe", "bound"]
    if cfg.explain:
        cols += [f"probe_{name}" for name, _, _ in PROBES]
    table = ResultTable(cols, metadata=_metadata(cfg))
    grid = chebyshev_grid(cfg.grid)
    for t in cfg.t:
        for n in cfg.n:
            sd = eigen(t, n, cfg.grid, tol=cfg.tol["eigen"])
            if n == INF:
                probes, bound = [0.0] * len(PROBES), 0.0
            else:
                probes = [perturbation_probe(t, n, f, grid) / bv for _, f, bv in PROBES]
                bound = hensley_tail_bound(t, n)
            row = [t, _n_str(n), sd.lam, abs(sd.lam - 1.0), max(probes), bound]
            if cfg.explain:
                row += probes
            table.add(*row)
            if max(probes) > bound:
                table.failures += 1
    return table


# -- verify ----------------------------------------------------------------------------

def cmd_verify(cfg: RunConfig) -> ResultTable:
    from .verify import run_suites
    table = ResultTable(["suite", "check", "status", "value", "limit"])
    checks = run_suites(cfg)
    for c in checks:
        table.add(c.suite, c.name, "PASS" if c.passed else "FAIL", c.value, c.limit)
    table.failures = sum(not c.passed for c in checks)
    table.metadata = _metadata(cfg, assertions=len(checks), failures=table.failures)
    return table


COMMANDS = {"dim": cmd_dim, "measure": cmd_measure, "operator": cmd_operator,
            "sweep": cmd_sweep, "verify": cmd_verify}


# -- entry point -------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kind", choices=["linear", "gauss"])
    common.add_argument("--n", help="single value, comma list, or range a..b")
    common.add_argument("--geometric", action="store_true", help="range a..b by doubling")
    common.add_argument("--grid", type=int, help="collocation grid size M")
    common.add_argument("--depth", type=int, help="cylinder depth D for exhaustive families")
    common.add_argument("--eps", help="comma list of eps values for F_n(eps)")
    common.add_argument("--t", help="comma list of t values (operator)")
    common.add_argument("--families", help="candidate families, subset of 'abcd' or 'none'")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--explain", action="store_true")
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--tol", action="append", metavar="KEY=VALUE",
                        help=f"tolerance override, keys {sorted(DEFAULT_TOL)}")
    common.add_argument("--h-error", dest="h_error", type=float,
                        help="verify: shift every h_n by this amount (fault injection)")
    parser = argparse.ArgumentParser(prog="hausgauss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        table = COMMANDS[cfg.command](cfg)
    except (UsageError, DomainError) as exc:
        print(f"hausgauss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as exc:
        print(f"hausgauss: nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except StaleDimension as exc:
        print(f"hausgauss: stale dimension: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = table.render(cfg.format)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.command == "verify":
        print(f"verify: {len(table.rows) - table.failures}/{len(table.rows)} checks passed",
              file=sys.stderr)
    return EXIT_FAIL if table.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
