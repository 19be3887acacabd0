"""Command-line driver: ``fracdiff``, ``validate``, ``solve`` and ``cache``.

Parameters come from an INI file (``--config``) with one section per
command; every physical parameter has an explicit key.  Numbers in CSV
output use ``repr``, the shortest string that round-trips the double, so
identical inputs give byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource budget refused, 5 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cache import CacheError, OperatorCache, write_coefficients
from .evolve import NumericalFailure, evolve, initial_field, wave_diagnostics
from .fourier import MACHINE_EPS, forward_transform, inverse_transform
from .fracderiv import DEFAULT_LEVELS, BudgetExceeded, apply_operator, build_operator
from .grid import even_extension, make_grid, sample_even_extension
from .oracles import FUNCTIONS, get_function
from .validation import TABLES, alpha_grid, compute_tables, rate_curve

log = logging.getLogger("fracspec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_BUDGET = 4
EXIT_IO = 5

FULL_SCALE_GRID = 1001
DESK_GRID = 101

# the long traveling-wave run; only used with --full-scale
FULL_SCALE_SOLVE = {"tau": "100", "N": "4096", "L": "2000", "t_end": "2000", "stride": "10000"}


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    value = float(value)
    return repr(value) if math.isfinite(value) else "nan"


# --- config parsing ---------------------------------------------------------

class Section:
    """Typed access to one config section, with defaults and range checks."""

    def __init__(self, name: str, values: dict):
        self.name = name
        self.values = dict(values)

    def _raw(self, key, default):
        raw = self.values.get(key)
        if raw is None or raw.strip() == "":
            if default is None:
                raise ConfigError(f"[{self.name}] missing required key {key!r}")
            return str(default)
        return raw.strip()

    def number(self, key, default=None, lo=None, hi=None, positive=False) -> float:
        raw = self._raw(key, default)
        try:
            value = float(Fraction(raw))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"[{self.name}] {key}={raw!r} is not a number") from None
        if positive and not value > 0:
            raise ConfigError(f"[{self.name}] {key} must be positive, got {raw}")
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            raise ConfigError(f"[{self.name}] {key}={raw} outside [{lo}, {hi}]")
        return value

    def integer(self, key, default=None, lo=None) -> int:
        raw = self._raw(key, default)
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}={raw!r} is not an integer") from None
        if lo is not None and value < lo:
            raise ConfigError(f"[{self.name}] {key} must be >= {lo}, got {value}")
        return value

    def flag(self, key, default=False) -> bool:
        raw = self._raw(key, "yes" if default else "no").lower()
        if raw in ("1", "yes", "true", "on"):
            return True
        if raw in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key}={raw!r} is not a boolean")

    def text(self, key, default=None) -> str:
        return self._raw(key, default)

    def optional(self, key) -> str | None:
        raw = self.values.get(key)
        return raw.strip() if raw and raw.strip() else None

    def grid_size(self, key="N", default=None) -> int:
        N = self.integer(key, default, lo=4)
        if N % 2:
            raise ConfigError(f"[{self.name}] {key} must be even, got {N}")
        if N & (N - 1):
            log.warning("[%s] %s=%d is not a power of two", self.name, key, N)
        return N

    def levels(self, key="levels", default=DEFAULT_LEVELS) -> tuple[int, ...]:
        raw = self._raw(key, ",".join(map(str, default)))
        try:
            levels = tuple(int(p) for p in raw.replace("-", ",").split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}={raw!r} is not a list of integers") from None
        if not levels or levels[0] < 1 or levels != tuple(range(levels[0], levels[0] + len(levels))):
            raise ConfigError(f"[{self.name}] {key} must be consecutive levels >= 1, got {raw}")
        return levels

    def alphas(self) -> list[float]:
        """``alphas`` as a comma list, or a single ``alpha`` (default 0.5)."""
        raw = self.optional("alphas")
        parts = raw.split(",") if raw else [self._raw("alpha", "0.5")]
        out = []
        for p in parts:
            try:
                a = float(Fraction(p.strip()))
            except (ValueError, ZeroDivisionError):
                raise ConfigError(f"[{self.name}] alpha value {p!r} is not a number") from None
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"[{self.name}] alpha={p.strip()} outside [0, 1]")
            out.append(a)
        return out


def load_config(path: str | None, command: str) -> Section:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (N vs n)
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    values = dict(parser[command]) if parser.has_section(command) else {}
    return Section(command, values)


def _cache(section: Section) -> OperatorCache | None:
    root = section.optional("cache_dir")
    return OperatorCache(root) if root else None


def _operator(section: Section, alpha: float, N: int, levels):
    cache = _cache(section)
    if cache is None:
        return build_operator(alpha, N, levels)
    return cache.get_or_build(alpha, N, levels)


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    log.info("wrote %s", path)


# --- commands ---------------------------------------------------------------

def _read_samples(path: str, N: int) -> np.ndarray:
    """Last column of a CSV (header optional) holding the ``N`` nodal values."""
    values = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    values.append(float(row[-1]))
                except ValueError:
                    if values:
                        raise ConfigError(f"{path}: non-numeric value {row[-1]!r}") from None
    except FileNotFoundError:
        raise ConfigError(f"sample file not found: {path}") from None
    if len(values) != N:
        raise ConfigError(f"{path}: expected {N} samples, found {len(values)}")
    return np.array(values)


def cmd_fracdiff(args, section: Section) -> int:
    fid = section.optional("function")
    sample_file = section.optional("sample_file")
    if (fid is None) == (sample_file is None):
        raise ConfigError("[fracdiff] set exactly one of 'function' or 'sample_file'")
    tf = None
    if fid is not None:
        if fid not in FUNCTIONS:
            raise ConfigError(f"[fracdiff] unknown function id {fid!r}; known: {sorted(FUNCTIONS)}")
        tf = get_function(fid)
    N = section.grid_size("N", tf.N if tf else None)
    L = section.number("L", tf.recommended_L if tf else None, positive=True)
    levels = section.levels()
    alphas = section.alphas()
    grid = make_grid(N, L)
    if tf is not None:
        samples = sample_even_extension(tf.v, grid)
    else:
        samples = even_extension(_read_samples(sample_file, N))
    field = forward_transform(samples)

    rows = []
    for alpha in alphas:
        op = _operator(section, alpha, N, levels)
        approx = apply_operator(op, field, L)[:N]
        exact = tf.exact(grid.x_nodes, alpha) if tf is not None and tf.has_exact(alpha) else None
        err = None if exact is None else np.abs(approx - exact)
        for j in range(N):
            rows.append([fmt(alpha), fmt(grid.x_nodes[j]), fmt(approx[j]),
                         "" if exact is None else fmt(exact[j]),
                         "" if err is None else fmt(err[j])])
        if err is not None:
            print(f"alpha={fmt(alpha)} max_error={fmt(err.max())}")
        else:
            print(f"alpha={fmt(alpha)} max_abs={fmt(np.abs(approx).max())}")
    name = section.text("output", "fracdiff.csv")
    _write_csv(Path(args.out) / name, ["alpha", "x", "numerical", "exact", "abs_error"], rows)
    return EXIT_OK


def _levels_tag(levels) -> str:
    return "-".join(map(str, levels))


def cmd_validate(args, section: Section) -> int:
    if args.alpha_grid is not None:
        points = args.alpha_grid
    elif args.full_scale:
        points = FULL_SCALE_GRID
    else:
        points = section.integer("alpha_grid", DESK_GRID, lo=2)
    names_raw = section.text("tables", "all")
    names = list(TABLES) if names_raw == "all" else [n.strip() for n in names_raw.split(",")]
    unknown = [n for n in names if n not in TABLES]
    if unknown:
        raise ConfigError(f"[validate] unknown tables {unknown}; known: {list(TABLES)}")
    threads = args.threads or section.integer("threads", 1, lo=1)
    log.info("validating %s on %d alpha points", names, points)
    tables = compute_tables(names, alpha_grid(points), threads=threads)

    out = Path(args.out)
    for name, table in tables.items():
        rows = [[_levels_tag(ls)] + [fmt(v) for v in values] for ls, values in table.rows()]
        _write_csv(out / f"table_{name}.csv", ["levels"] + table.functions, rows)
        keys = [(ls, fid) for ls in table.level_sets for fid in table.functions]
        header = ["alpha"] + [f"{fid}:{_levels_tag(ls)}" for ls, fid in keys]
        curve_rows = [[fmt(a)] + [fmt(table.curves[key][i]) for key in keys]
                      for i, a in enumerate(table.alphas)]
        _write_csv(out / f"curves_{name}.csv", header, curve_rows)
        if table.alphas.size > 2:
            _write_rates(out / f"rates_{name}.csv", table)
        for ls, values in table.rows():
            print(f"{name} {_levels_tag(ls)} " + " ".join(fmt(v) for v in values))
    return EXIT_OK


def _write_rates(path: Path, table):
    """``log2(E^(ls_i) / E^(ls_{i+1}))`` for consecutive rows of equal length."""
    pairs = [(a, b) for a, b in zip(table.level_sets, table.level_sets[1:])
             if len(a) == len(b) and b[0] == a[0] + 1]
    if not pairs:
        return
    header, columns = ["alpha"], []
    for a, b in pairs:
        for fid in table.functions:
            header.append(f"{fid}:{_levels_tag(a)}/{_levels_tag(b)}")
            columns.append(rate_curve(table.curves[(a, fid)], table.curves[(b, fid)]))
    rows = [[fmt(alpha)] + [fmt(c[i]) for c in columns] for i, alpha in enumerate(table.alphas)]
    _write_csv(path, header, rows)


def cmd_solve(args, section: Section) -> int:
    if args.full_scale:
        for key, value in FULL_SCALE_SOLVE.items():
            section.values.setdefault(key, value)
    alpha = section.number("alpha", "1/3", lo=0.0, hi=1.0)
    tau = section.number("tau", 1.0, positive=True)
    N = section.grid_size("N", 128)
    L = section.number("L", 20.0, positive=True)
    dt = section.number("dt", 0.01, positive=True)
    t_end = section.number("t_end", 20.0, lo=0.0)
    stride = section.integer("stride", 100, lo=1)
    level = section.number("level", 0.5)
    levels = section.levels()
    dealias = section.flag("dealias", False)
    clean_factor = section.number("clean_factor", MACHINE_EPS, lo=0.0)
    relative = section.flag("clean_relative", True)
    datum_id = section.text("datum", "tanh-step")
    if datum_id not in FUNCTIONS:
        raise ConfigError(f"[solve] unknown datum {datum_id!r}; known: {sorted(FUNCTIONS)}")
    steps = round(t_end / dt)
    if abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigError(f"[solve] t_end={t_end} is not a multiple of dt={dt}")

    op = _operator(section, alpha, N, levels)
    grid = make_grid(N, L)
    v0 = initial_field(N, L, get_function(datum_id).v)
    snapshots, diagnostics = [], []
    last = {}

    def record(field, t, step):
        v = inverse_transform(field)[:N]
        if not np.all(np.isfinite(v)):
            raise NumericalFailure(step, t)
        snapshots.extend([fmt(t), fmt(grid.x_nodes[j]), fmt(v[j])] for j in range(N))
        try:
            d = wave_diagnostics(field, level, L=L)
            pos = d["position"]
        except ValueError:
            d = {"overshoot": max(v.max() - 1.0, -v.min(), 0.0), "max": v.max(), "min": v.min()}
            pos = math.nan
        speed = math.nan
        if last and t != last["t"]:
            speed = (pos - last["pos"]) / (t - last["t"])
        last.update(t=t, pos=pos)
        diagnostics.append([step, fmt(t), fmt(pos), fmt(speed), fmt(d["overshoot"]),
                            fmt(d["max"]), fmt(d["min"])])
        log.info("t=%s position=%s speed=%s", fmt(t), fmt(pos), fmt(speed))

    state = evolve(v0, op, L, dt, tau, t_end, stride=stride, dealias=dealias,
                   clean_factor=clean_factor, relative=relative, callback=record)
    out = Path(args.out)
    _write_csv(out / "snapshots.csv", ["t", "x", "v"], snapshots)
    _write_csv(out / "diagnostics.csv",
               ["step", "t", "position", "speed", "overshoot", "max", "min"], diagnostics)
    write_coefficients(out / "final_coeffs.fsop", state.current, alpha, levels)
    print(" ".join(map(str, diagnostics[-1])))
    return EXIT_OK


def cmd_cache(args, section: Section) -> int:
    root = args.cache_dir or section.optional("cache_dir") or str(Path(args.out) / "cache")
    cache = OperatorCache(root)
    if args.action == "list":
        for e in cache.entries():
            print(f"{e.path.name} alpha={fmt(e.alpha)} N={e.N} levels={_levels_tag(e.levels)} "
                  f"sha256={e.checksum} bytes={e.size}")
        return EXIT_OK
    if args.action == "build":
        N = section.grid_size("N", 128)
        levels = section.levels()
        for alpha in section.alphas() if (section.optional("alphas") or section.optional("alpha")) \
                else [1 / 3]:
            path = cache.path_for(alpha, N, levels)
            cache.get_or_build(alpha, N, levels)
            print(f"built {path}")
        return EXIT_OK
    # purge: keys from the section narrow the selection
    alpha = section.number("alpha") if section.optional("alpha") else None
    N = section.integer("N") if section.optional("N") else None
    levels = section.levels() if section.optional("levels") else None
    print(f"removed {cache.purge(alpha, N, levels)} entries")
    return EXIT_OK


COMMANDS = {
    "fracdiff": cmd_fracdiff,
    "validate": cmd_validate,
    "solve": cmd_solve,
    "cache": cmd_cache,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI file with one section per command")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--alpha-grid", metavar="N", type=int, default=None,
                        help="number of alpha points for validate (default 101)")
    common.add_argument("--threads", metavar="N", type=int, default=None)
    common.add_argument("--full-scale", action="store_true",
                        help="1001-point alpha grid / long traveling-wave run")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fracspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fracdiff", parents=[common], help="fractional derivative of a function")
    sub.add_parser("validate", parents=[common], help="error tables over an alpha grid")
    sub.add_parser("solve", parents=[common], help="run the KdV-Burgers evolution")
    p = sub.add_parser("cache", parents=[common], help="manage the operator cache")
    p.add_argument("action", choices=["list", "build", "purge"])
    p.add_argument("--cache-dir", metavar="DIR", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.alpha_grid is not None and args.alpha_grid < 2:
            raise ConfigError("--alpha-grid needs at least 2 points")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        section = load_config(args.config, args.command)
        return COMMANDS[args.command](args, section)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NumericalFailure, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CacheError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
