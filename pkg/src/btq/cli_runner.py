"""Configuration, caching and reporting front end.

Config files are sectioned ``key = value`` text. Keys before the first
section header belong to ``[model]``::

    kind = torus2
    N = 1

    [run]
    p = 8, 12, 16, 24, 32
    seed = 0

    [symbols]
    f = cos_x:1
    g = sin_y:1
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import semiclassics as sc
from . import symbols as sy
from .cache import EigenCache
from .model_geometry import Kind, SymplecticModel, check_quantizable

logger = logging.getLogger("btq")

STUDIES = ("gap", "product", "commutator", "kernel", "symbol", "density", "decay", "weighted",
           "ordering", "constants", "fock-verify")
PLANE_STUDIES = ("product", "commutator", "kernel", "fock-verify")

DEFAULT_P = {
    "gap": (4, 8, 16, 24), "product": (8, 12, 16, 24, 32), "commutator": (8, 12, 16, 24, 32),
    "kernel": (8, 16, 24), "symbol": (8, 12, 16, 24), "density": (24,), "decay": (16, 24),
    "weighted": (8, 16), "ordering": (8, 12, 16, 24), "constants": (8, 12, 16),
    "fock-verify": (1, 2, 4, 8),
}
PLANE_P = (1, 2, 4, 8)


class ParseError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


class UnknownKey(ParseError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    N: Optional[int] = None
    B0: Optional[float] = None
    B1: float = 0.0

    def build(self) -> SymplecticModel:
        if Kind(self.kind) is Kind.FOCK_PLANE:
            return SymplecticModel.plane(1.0 if self.B0 is None else self.B0)
        if self.B0 is None:
            return SymplecticModel.torus(1 if self.N is None else self.N, self.B1)
        model = SymplecticModel(Kind.TORUS2, self.B0, self.B1)
        N = check_quantizable(model)
        if self.N is not None and self.N != N:
            raise ParseError(f"N={self.N} inconsistent with B0={self.B0}")
        return model


@dataclass(frozen=True)
class RunSection:
    p: tuple = ()
    seed: int = 0
    method: str = "lanczos"
    tol: float = 1e-8


@dataclass(frozen=True)
class GridSection:
    phi_max: float = 0.2
    multiple: int = 8


@dataclass(frozen=True)
class SymbolSection:
    f: str = "cos_x:1"
    g: str = "sin_y:1"
    matrix_f: str = "mat_f"
    matrix_g: str = "mat_g"
    plane_f: str = "x"
    plane_g: str = "y"


@dataclass(frozen=True)
class PathSection:
    cache: Optional[str] = None
    out: str = "btq_out"


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    run: RunSection = RunSection()
    grid: GridSection = GridSection()
    symbols: SymbolSection = SymbolSection()
    p: dict = field(default_factory=dict)  # per-study p lists
    tolerances: sc.Tolerances = sc.Tolerances()
    paths: PathSection = PathSection()

    def p_list(self, study: str) -> tuple:
        if study in self.p:
            return self.p[study]
        if self.run.p:
            return self.run.p
        return PLANE_P if self.model.kind == Kind.FOCK_PLANE.value and study != "fock-verify" \
            else DEFAULT_P[study]

    def hash(self) -> str:
        return hashlib.sha256(serialize(self, include_paths=False).encode()).hexdigest()[:16]


SECTIONS = {"model": ModelConfig, "run": RunSection, "grid": GridSection, "symbols": SymbolSection,
            "tolerances": sc.Tolerances, "paths": PathSection}

_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _line_index(text: str, offset: int) -> dict:
    where = {}
    section = "model"
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = n - offset
            continue
        k = _KEY_RE.match(line)
        if k:
            where[(section, k.group(1).strip())] = n - offset
    return where


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _convert(tp, raw: str):
    tp = str(tp)
    if "tuple" in tp:
        vals = tuple(float(t) for t in raw.replace(",", " ").split())
        return vals
    if "int" in tp:
        return int(raw)
    if "float" in tp:
        return float(raw)
    return raw.strip()


def parse_text(text: str) -> RunConfig:
    first = next((l for l in text.splitlines() if l.strip() and not l.lstrip().startswith(("#", ";"))), "")
    offset = 0 if _SECTION_RE.match(first) else 1
    body = text if offset == 0 else "[model]\n" + text
    where = _line_index(body, offset)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   strict=True, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(body)
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno - offset) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno - offset) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line!r}", lineno - offset) from None
    parts = {}
    p_lists = {}
    for section in cp.sections():
        line = where.get((section, None))
        if section == "p":
            for key, raw in cp[section].items():
                if key not in STUDIES:
                    raise UnknownKey(f"unknown study {key!r} in [p]", where.get((section, key)))
                try:
                    p_lists[key] = _ints(raw)
                except ValueError:
                    raise ParseError(f"bad p list {raw!r}", where.get((section, key))) from None
            continue
        if section not in SECTIONS:
            raise UnknownKey(f"unknown section [{section}]", line)
        fields = {f.name: f for f in dataclasses.fields(SECTIONS[section])}
        values = {}
        for key, raw in cp[section].items():
            lineno = where.get((section, key))
            if key not in fields:
                raise UnknownKey(f"unknown key {key!r} in [{section}]", lineno)
            try:
                if section == "run" and key == "p":
                    values[key] = _ints(raw)
                elif section == "paths":
                    values[key] = raw.strip()
                else:
                    values[key] = _convert(fields[key].type, raw)
            except ValueError:
                raise ParseError(f"bad value {raw!r} for {key!r}", lineno) from None
        parts[section] = values
    if "kind" not in parts.get("model", {}):
        raise ParseError("model kind is required")
    try:
        model = ModelConfig(**parts.pop("model"))
        model.build()
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        exc.args = (f"{exc} (line {where.get(('model', 'kind'))})",)
        raise
    cfg = RunConfig(model=model, p=p_lists,
                    **{k: SECTIONS[k](**v) for k, v in parts.items()})
    for name in (cfg.symbols.f, cfg.symbols.g, cfg.symbols.matrix_f, cfg.symbols.matrix_g,
                 cfg.symbols.plane_f, cfg.symbols.plane_g):
        try:
            sy.from_name(name)
        except (KeyError, ValueError):
            raise ParseError(f"unknown symbol {name!r}", where.get(("symbols", None))) from None
    return cfg


def parse_config(path) -> RunConfig:
    return parse_text(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: RunConfig, include_paths: bool = True) -> str:
    """Canonical text form; every field is written explicitly."""
    out = []
    for name in ("model", "run", "grid", "symbols", "tolerances", "paths"):
        if name == "paths" and not include_paths:
            continue
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in dataclasses.fields(sec):
            v = getattr(sec, f.name)
            if v is None or v == ():
                continue
            out.append(f"{f.name} = {_fmt(v)}")
        out.append("")
    if cfg.p:
        out.append("[p]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in sorted(cfg.p.items()))
        out.append("")
    return "\n".join(out)


# -- running --------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def write_report(report: sc.ConvergenceReport, out: Path, config_hash: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stem = report.study
    cols = []
    for row in report.rows:
        cols.extend(k for k in row if k not in cols)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in report.rows:
            w.writerow([repr(float(row[c])) if isinstance(row.get(c), float) else row.get(c, "")
                        for c in cols])
    summary = _jsonable(report.summary())
    summary["config_hash"] = config_hash
    summary["timestamp"] = datetime.now(timezone.utc).isoformat()
    with open(out / f"{stem}.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_study(name: str, cfg: RunConfig, solver: sc.QuantumSpaceSolver, jobs: int = 1):
    model = cfg.model.build()
    tol = cfg.tolerances
    ps = list(cfg.p_list(name))
    sym = cfg.symbols
    if model.is_torus and name not in ("fock-verify", "constants", "ordering"):
        solver.prefetch(model, ps, jobs=jobs)
    f, g = (sym.f, sym.g) if model.is_torus else (sym.plane_f, sym.plane_g)
    f, g = sy.from_name(f), sy.from_name(g)
    if name == "gap":
        return sc.run_gap_study(model, ps, solver, tol)
    if name == "product":
        return sc.run_product_study(model, f, g, ps, solver, tol)
    if name == "commutator":
        return sc.run_commutator_study(model, f, g, ps, solver, tol)
    if name == "kernel":
        return sc.run_kernel_study(model, ps, solver, tol)
    if name == "symbol":
        return sc.run_symbol_study(model, f, ps, solver, tol)
    if name == "density":
        return sc.run_density_study(model, ps, solver, tol)
    if name == "decay":
        return sc.run_decay_study(model, ps, solver, tol)
    if name == "weighted":
        return sc.run_weighted_study(model, f, ps, solver, tol)
    if name == "ordering":
        solver.prefetch(model, ps, r=2, jobs=jobs)
        return sc.run_ordering_study(model, sy.from_name(sym.matrix_f), sy.from_name(sym.matrix_g),
                                     ps, solver, tol)
    if name == "constants":
        return sc.run_constant_tracking(model, ps, solver, g=g)
    if name == "fock-verify":
        return sc.run_fock_verify(ps)
    raise ValueError(f"unknown study {name!r}")


def expand_studies(names, cfg: RunConfig) -> list:
    plane = cfg.model.kind == Kind.FOCK_PLANE.value
    varying = not plane and cfg.model.B1 != 0
    everything = PLANE_STUDIES if plane else tuple(s for s in STUDIES if not (varying and s == "kernel"))
    out = []
    for n in names:
        group = everything if n == "all" else (n,)
        for s in group:
            if s not in STUDIES:
                raise ValueError(f"unknown study {s!r}")
            if s not in out:
                out.append(s)
    return out


def run(cfg: RunConfig, studies, jobs: int = 1, cache: EigenCache | None = None) -> int:
    """Run ``studies``; exit code 0 if every verdict passes, 2 if any is
    inconclusive, 1 on failure or error."""
    out = Path(cfg.paths.out)
    config_hash = cfg.hash()
    solver = sc.QuantumSpaceSolver(sc.GridPolicy(cfg.grid.phi_max, cfg.grid.multiple),
                                   seed=cfg.run.seed, method=cfg.run.method, tol=cfg.run.tol,
                                   cache=cache)
    bad = inconclusive = False
    for name in expand_studies(studies, cfg):
        logger.info("study %s: p=%s", name, list(cfg.p_list(name)))
        try:
            report = run_study(name, cfg, solver, jobs)
        except Exception as exc:  # surfaced as exit 1
            logger.error("study %s failed: %s: %s", name, type(exc).__name__, exc)
            bad = True
            continue
        write_report(report, out, config_hash)
        logger.info("study %s: verdict %s", name, report.verdict.value)
        bad |= report.verdict is sc.Verdict.FAIL
        inconclusive |= report.verdict is sc.Verdict.INCONCLUSIVE
    return 1 if bad else 2 if inconclusive else 0


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="btq", description="Toeplitz quantization experiments on lattice models.")
    ap.add_argument("studies", nargs="+", choices=STUDIES + ("all",), metavar="study",
                    help="one or more of: " + ", ".join(STUDIES + ("all",)))
    ap.add_argument("--config", required=True, help="configuration file")
    ap.add_argument("--out", help="output directory (overrides [paths] out)")
    ap.add_argument("--cache", help="eigen cache directory (overrides BTQ_CACHE)")
    ap.add_argument("--seed", type=_u64, help="solver seed")
    ap.add_argument("--p", help="comma-separated p list applied to every study")
    ap.add_argument("--jobs", type=int, default=1, help="parallel eigensolves")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, seed=args.seed))
        if args.p:
            cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, p=_ints(args.p)), p={})
        if args.out:
            cfg = dataclasses.replace(cfg, paths=dataclasses.replace(cfg.paths, out=args.out))
        cache = EigenCache.from_env(args.cache or cfg.paths.cache)
        return run(cfg, args.studies, jobs=max(1, args.jobs), cache=cache)
    except Exception as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
