"""Command-line entry point: ``sharpdecay <command> --config problem.yaml [options]``.

Commands: bands, rate, green, example, probe, verify. Module errors exit with
the code carried by their class (2 config, 3 spectral proximity, 4 search
failure, 5 verify failure, others 6 and up).
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import dispersion, oracle, resolvent, sharpness, spectrum
from .errors import ConfigError, LatticeError, VerifyFailure
from .invariants import run_suite
from .lattice import Box, Impurity, PeriodicPotential


@dataclass
class Problem:
    name: str
    V: PeriodicPotential
    v: Impurity | None = None


@dataclass
class RunConfig:
    command: str
    problem: Problem
    lam: complex | None = None
    sweep: np.ndarray | None = None
    grid: int | None = None
    box: int | None = None
    tol: float = 1e-8
    seed: int = 0
    out: Path | None = None


def _key_lines(node) -> dict:
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def load_problem(path) -> Problem:
    """Read a YAML (or JSON) problem file; errors name the line and field."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
        lines = _key_lines(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: malformed config: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    def fail(field, msg):
        line = lines.get(field)
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: field '{field}': {msg}")

    for key in ("dim", "periods", "values"):
        if key not in raw:
            fail(key, "missing")
    dim = raw["dim"]
    if not isinstance(dim, int) or dim < 1:
        fail("dim", f"expected a positive integer, got {dim!r}")
    periods = raw["periods"]
    if (not isinstance(periods, list) or len(periods) != dim
            or not all(isinstance(p, int) and p >= 1 for p in periods)):
        fail("periods", f"expected {dim} positive integers, got {periods!r}")
    try:
        values = np.asarray(raw["values"], dtype=float)
    except (TypeError, ValueError):
        fail("values", "expected real numbers")
    Q = math.prod(periods)
    if values.size != Q:
        fail("values", f"expected {Q} entries (prod of periods), got {values.size}")
    V = PeriodicPotential(tuple(periods), values.reshape(periods))
    v = None
    if raw.get("impurity") is not None:
        v = _load_impurity(raw["impurity"], dim, lambda msg: fail("impurity", msg))
    return Problem(str(raw.get("name", path.stem)), V, v)


def _load_impurity(entry_map, dim, fail) -> Impurity:
    if not isinstance(entry_map, dict):
        fail("expected a mapping with 'support' or 'family'")
    if "support" in entry_map:
        support = {}
        for entry in entry_map["support"] or []:
            site = entry.get("site") if isinstance(entry, dict) else None
            if not isinstance(site, list) or len(site) != dim:
                fail(f"support site must be a list of {dim} integers, got {site!r}")
            support[tuple(int(a) for a in site)] = complex(entry.get("value", 0.0))
        return Impurity(support=support)
    if "family" in entry_map:
        try:
            return Impurity(family=entry_map["family"], amplitude=complex(entry_map.get("amplitude", 1.0)),
                            rate=float(entry_map.get("rate", 1.0)), gamma=float(entry_map.get("gamma", 2.0)))
        except LatticeError as exc:
            fail(str(exc))
    fail("expected 'support' or 'family'")


def parse_lambda(text: str) -> complex:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--lambda: cannot parse {text!r} as RE[,IM]") from exc
    if len(parts) not in (1, 2) or not all(math.isfinite(p) for p in parts):
        raise ConfigError(f"--lambda: expected RE[,IM], got {text!r}")
    return complex(parts[0], parts[1] if len(parts) == 2 else 0.0)


def parse_sweep(text: str) -> np.ndarray:
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError as exc:
        raise ConfigError(f"--lambda-sweep: expected START:STOP:COUNT, got {text!r}") from exc
    if count < 1 or start <= 0 or stop <= 0:
        raise ConfigError("--lambda-sweep: START and STOP must be positive, COUNT at least 1")
    return np.geomspace(start, stop, count)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharpdecay", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["bands", "rate", "green", "example", "probe", "verify"])
    p.add_argument("--config", required=True, help="problem file (YAML or JSON)")
    p.add_argument("--lambda", dest="lam", help="energy RE[,IM]")
    p.add_argument("--lambda-sweep", dest="sweep", help="START:STOP:COUNT, log-spaced")
    p.add_argument("--grid", type=int, help="band grid per axis (default 256 for d=1, 64 for d=2)")
    p.add_argument("--box", type=int, help="box half-width L")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="write the CSV/report here instead of stdout")
    return p


def make_config(args) -> RunConfig:
    cfg = RunConfig(args.command, load_problem(args.config), tol=args.tol, seed=args.seed,
                    out=args.out, grid=args.grid, box=args.box)
    if args.lam is not None:
        cfg.lam = parse_lambda(args.lam)
    if args.sweep is not None:
        cfg.sweep = parse_sweep(args.sweep)
    if cfg.grid is not None and cfg.grid < 2:
        raise ConfigError("--grid must be at least 2")
    if cfg.box is not None and cfg.box < 1:
        raise ConfigError("--box must be at least 1")
    if not cfg.tol > 0:
        raise ConfigError("--tol must be positive")
    needs_lambda = {"green", "example"} | ({"rate"} if cfg.sweep is None else set())
    if cfg.command in needs_lambda and cfg.lam is None:
        raise ConfigError(f"{cfg.command} needs --lambda")
    return cfg


def _emit(cfg: RunConfig, text: str):
    if cfg.out is not None:
        cfg.out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_bands(cfg: RunConfig):
    bs = spectrum.band_structure(cfg.problem.V, cfg.grid or spectrum.default_grid(cfg.problem.V.dim))
    sys.stdout.write(bs.summary())
    if cfg.out is not None:
        cfg.out.write_text(bs.to_csv())


def cmd_rate(cfg: RunConfig):
    V = cfg.problem.V
    bands = spectrum.cached_bands(V, cfg.grid)
    if cfg.sweep is not None:
        rows = dispersion.asymptotic_ratio_sweep(V, cfg.sweep, bands=bands, seed=cfg.seed)
        _emit(cfg, dispersion.sweep_to_csv(rows))
        return
    _emit(cfg, dispersion.rate(V, cfg.lam, bands=bands, seed=cfg.seed).summary())


def cmd_green(cfg: RunConfig):
    V = cfg.problem.V
    origin = (0,) * V.dim
    box = Box.centered(cfg.box or 3, V.dim)
    table = resolvent.green_table(V, cfg.lam, [(tuple(s), origin) for s in box.sites()],
                                  tol=cfg.tol)
    _emit(cfg, table.to_csv())


def cmd_example(cfg: RunConfig):
    V = cfg.problem.V
    bands = spectrum.cached_bands(V, cfg.grid)
    box = Box.centered(cfg.box, V.dim) if cfg.box else None
    ex = sharpness.construct_sharp_example(V, cfg.lam, box)
    rep = sharpness.verify_sharp_example(ex, V, bands)
    xs = np.random.default_rng(cfg.seed).random((20, V.dim)) / np.asarray(V.q)
    frac = sharpness.fraction_representation_check(ex, V, xs)
    _emit(cfg, rep.text() + f"fraction_max_error: {frac.max_error:.3e}\n"
          f"check fraction: {'pass' if frac.ok else 'FAIL'}\n")


def cmd_probe(cfg: RunConfig):
    V = cfg.problem.V
    bands = spectrum.cached_bands(V, cfg.grid)
    a, b = bands.union()[0]
    pad = 0.025 * (b - a)
    L = cfg.box or (80 if V.dim == 1 else 14)
    Ls = sorted({max(1, L // 4), max(1, L // 2), L})
    rep = oracle.embedded_eigenvalue_probe(V, cfg.problem.v, (a + pad, b - pad), Ls)
    _emit(cfg, rep.to_csv())


def cmd_verify(cfg: RunConfig):
    results = run_suite(cfg.problem.V, cfg.problem.v, seed=cfg.seed, grid=cfg.grid, tol=cfg.tol)
    failed = [r for r in results if not r.ok]
    lines = [f"verify {cfg.problem.name} seed={cfg.seed}"]
    lines += [r.line() for r in results]
    lines.append(f"verify: {len(results) - len(failed)} passed, {len(failed)} failed")
    _emit(cfg, "\n".join(lines) + "\n")
    if failed:
        raise VerifyFailure(f"{len(failed)} invariant(s) failed: " + ", ".join(r.name for r in failed))


COMMANDS = {"bands": cmd_bands, "rate": cmd_rate, "green": cmd_green, "example": cmd_example,
            "probe": cmd_probe, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        COMMANDS[cfg.command](cfg)
    except LatticeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
