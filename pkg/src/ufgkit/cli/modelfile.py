"""Declarative model files.

A model file is INI text::

    [model]
    name = grusin
    dim = 2
    noises = 1

    [parameters]
    k = 1

    [fields]
    V0 = k*x, 0
    V1 = 0, x

    [certificate]            ; optional, rows ``alpha.i = beta: phi; ...``
    1.0 = 1: -k

    [test]
    f = tanh(y)

    [run]
    m = 1
    t_grid = 1.0, 3.0, 0.5
    paths = 200000
    dt = 1e-3
    seed = 42
    base_point = 1, 0
    directions = 1           ; multi-indices separated by ';'
    chain = 1: 1.0           ; reachability chain ``alpha: duration; ...``

Multi-indices are written with dots (``1.2.0``).  Errors report the line
and column of the offending text.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..exprparse import ExprSyntaxError, UnknownVariableError, parse_expr, parse_function
from ..liealg import VectorField, build_hierarchy
from ..sdesim.model import SdeModel
from ..ufgcheck import UfgCertificate

SECTIONS = ("model", "parameters", "fields", "certificate", "test", "run")
RUN_KEYS = ("m", "t_grid", "paths", "dt", "seed", "base_point", "directions", "chain", "fd_step", "tol")


class ModelError(Exception):
    code = "cli"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f"line {line}" + (f", column {column}" if column is not None else "") if line else ""
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.column = column


class ModelSyntaxError(ModelError):
    pass


class UnknownName(ModelSyntaxError):
    pass


class DimensionMismatch(ModelError):
    pass


class UnboundParameter(ModelError):
    pass


@dataclass(frozen=True)
class RunSettings:
    m: int | None = None
    t_grid: tuple = (1.0, 3.0, 0.5)
    paths: int = 10000
    dt: float = 1e-3
    seed: int = 0
    base_point: tuple | None = None
    directions: tuple | None = None
    chain: tuple = ()
    fd_step: float = 1e-2
    tol: float = 0.2

    def times(self) -> list[float]:
        return grid_times(*self.t_grid)


@dataclass(frozen=True)
class ModelFile:
    name: str
    dim: int
    noises: int
    parameters: dict
    fields: tuple  # per field: tuple of component strings
    certificate: dict | None = None  # row -> {beta: expression string}
    test_function: str | None = None
    run: RunSettings = field(default_factory=RunSettings)

    # derived objects ---------------------------------------------------------
    def vector_fields(self) -> list[VectorField]:
        names = list(self.parameters)
        return [VectorField([parse_expr(c, self.dim, names) for c in comps]) for comps in self.fields]

    def sde_model(self) -> SdeModel:
        return SdeModel(self.vector_fields(), dict(self.parameters), self.name)

    def hierarchy(self, m: int | None = None):
        m = m if m is not None else self.run.m
        if m is None:
            raise ModelError("no bracket order: set [run] m or pass --m")
        return build_hierarchy(self.vector_fields(), m)

    def parsed_certificate(self, m: int) -> UfgCertificate | None:
        if self.certificate is None:
            return None
        names = list(self.parameters)
        rows = {row: {beta: parse_expr(e, self.dim, names) for beta, e in coeffs.items()}
                for row, coeffs in self.certificate.items()}
        return UfgCertificate(m, rows)

    def test_callable(self):
        if self.test_function is None:
            raise ModelError("model has no [test] function")
        return parse_function(self.test_function, self.dim, dict(self.parameters))

    def base_point(self) -> np.ndarray:
        bp = self.run.base_point
        return np.zeros(self.dim) if bp is None else np.array(bp, dtype=float)

    def directions(self) -> list[tuple]:
        if self.run.directions is not None:
            return [tuple(a) for a in self.run.directions]
        return [(i,) for i in range(1, self.noises + 1)]


def grid_times(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ValueError("time grid needs step > 0 and stop >= start")
    n = int(round((stop - start) / step))
    if abs(start + n * step - stop) > 1e-9 * max(1.0, abs(stop)):
        raise ValueError("time grid stop is not reachable in whole steps")
    return [round(start + k * step, 12) for k in range(n + 1)]


# parsing ------------------------------------------------------------------------

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]\s*(.*)$")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _locate(text: str) -> dict:
    """``(section, key) -> (line, column of the value)`` from the raw text."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            continue
        if line.lstrip().startswith(("#", ";")) or section is None:
            continue
        m = _KEY_RE.match(line)
        if m:
            where[(section, m.group(1).strip())] = (n, m.start(2) + 1)
    return where


def _strip_comment(value: str) -> str:
    return re.split(r"\s[;#]", value, maxsplit=1)[0].strip()


def parse_index(text: str) -> tuple:
    text = text.strip()
    if not re.fullmatch(r"\d+(\.\d+)*", text):
        raise ValueError(f"bad multi-index {text!r}")
    return tuple(int(p) for p in text.split("."))


def format_index(alpha: Sequence[int]) -> str:
    return ".".join(str(a) for a in alpha)


def _number(value: str, kind, what: str, loc):
    try:
        return kind(value)
    except ValueError:
        raise ModelSyntaxError(f"{what}: expected {kind.__name__}, got {value!r}", *loc) from None


def _floats(value: str, what: str, loc) -> tuple:
    return tuple(_number(p.strip(), float, what, loc) for p in value.split(","))


def parse_model(text: str) -> ModelFile:
    """Parse and validate a model file; raises :class:`ModelError` subclasses."""
    cp = configparser.ConfigParser(inline_comment_prefixes=None, interpolation=None,
                                   comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ModelSyntaxError("text before the first [section]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ModelSyntaxError("unparseable line", lineno, 1) from None
    except configparser.Error as exc:
        raise ModelSyntaxError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    where = _locate(text)

    def loc(section, key):
        return where.get((section, key), (None, None))

    for s in cp.sections():
        if s not in SECTIONS:
            line = next((n for n, ln in enumerate(text.splitlines(), 1)
                         if _SECTION_RE.match(ln) and _SECTION_RE.match(ln).group(1).strip() == s), None)
            raise ModelSyntaxError(f"unknown section [{s}]", line, 1)
    for s in ("model", "fields"):
        if not cp.has_section(s):
            raise ModelSyntaxError(f"missing section [{s}]")

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return _strip_comment(cp.get(section, key))
        return default

    mdl = cp["model"]
    for key in mdl:
        if key not in ("name", "dim", "noises"):
            raise ModelSyntaxError(f"unknown key {key!r} in [model]", *loc("model", key))
    name = get("model", "name", "model")
    if get("model", "dim") is None:
        raise ModelSyntaxError("[model] needs dim")
    dim = _number(get("model", "dim"), int, "dim", loc("model", "dim"))
    if dim < 1:
        raise ModelSyntaxError("dim must be positive", *loc("model", "dim"))

    params = {}
    if cp.has_section("parameters"):
        for key in cp["parameters"]:
            lc = loc("parameters", key)
            if not re.fullmatch(r"[A-Za-z_]\w*", key):
                raise ModelSyntaxError(f"bad parameter name {key!r}", *lc)
            if not get("parameters", key):
                raise UnboundParameter(f"parameter {key} has no value", *lc)
            val = _number(get("parameters", key), float, f"parameter {key}", lc)
            if not val > 0:
                raise ModelSyntaxError(f"parameter {key} must be positive", *lc)
            params[key] = val

    field_keys = list(cp["fields"])
    expected = [f"V{i}" for i in range(len(field_keys))]
    if sorted(field_keys, key=lambda k: (len(k), k)) != expected:
        raise ModelSyntaxError(f"fields must be named V0..V{len(field_keys) - 1}, got {field_keys}",
                               *loc("fields", field_keys[0]) if field_keys else (None, None))
    noises = len(field_keys) - 1
    declared = get("model", "noises")
    if declared is not None:
        d = _number(declared, int, "noises", loc("model", "noises"))
        if d != noises:
            raise DimensionMismatch(f"declared {d} noise fields, found {noises}", *loc("model", "noises"))
    fields = []
    for key in expected:
        line, col0 = loc("fields", key)
        raw = _strip_comment(cp.get("fields", key))
        comps, offset = [], 0
        for part in raw.split(","):
            col = (col0 or 1) + offset + len(part) - len(part.lstrip())
            try:
                parse_expr(part.strip(), dim, list(params))
            except UnknownVariableError as exc:
                raise UnknownName(f"{key}: {exc}", line, col + exc.column - 1) from None
            except ExprSyntaxError as exc:
                raise ModelSyntaxError(f"{key}: {exc}", line, col + exc.column - 1) from None
            comps.append(part.strip())
            offset += len(part) + 1
        if len(comps) != dim:
            raise DimensionMismatch(f"{key} has {len(comps)} components, dim is {dim}", line, col0)
        fields.append(tuple(comps))

    certificate = None
    if cp.has_section("certificate"):
        certificate = {}
        for key in cp["certificate"]:
            line, col = loc("certificate", key)
            try:
                row = parse_index(key)
            except ValueError as exc:
                raise ModelSyntaxError(str(exc), line, 1) from None
            if any(i > noises for i in row):
                raise DimensionMismatch(f"row {key} uses a field index above {noises}", line, 1)
            coeffs = {}
            value = get("certificate", key)
            for item in filter(None, (p.strip() for p in value.split(";"))):
                if ":" not in item:
                    raise ModelSyntaxError(f"row {key}: expected 'beta: phi', got {item!r}", line, col)
                b, e = item.split(":", 1)
                try:
                    beta = parse_index(b)
                    parse_expr(e.strip(), dim, list(params))
                except ValueError as exc:
                    raise ModelSyntaxError(f"row {key}: {exc}", line, col) from None
                coeffs[beta] = e.strip()
            certificate[row] = coeffs

    test_function = None
    if cp.has_section("test"):
        test_function = get("test", "f")
        if test_function is not None:
            try:
                parse_function(test_function, dim, params)
            except ExprSyntaxError as exc:
                line, col = loc("test", "f")
                if isinstance(exc, UnknownVariableError):
                    raise UnknownName(f"test function: {exc}", line, (col or 1) + exc.column - 1) from None
                raise ModelSyntaxError(f"test function: {exc}", line, (col or 1) + exc.column - 1) from None

    run = _parse_run(cp, get, loc, dim, noises) if cp.has_section("run") else RunSettings()
    return ModelFile(name, dim, noises, params, tuple(fields), certificate, test_function, run)


def _parse_run(cp, get, loc, dim: int, noises: int) -> RunSettings:
    for key in cp["run"]:
        if key not in RUN_KEYS:
            raise ModelSyntaxError(f"unknown key {key!r} in [run]", *loc("run", key))
    kw = {}
    if get("run", "m") is not None:
        kw["m"] = _number(get("run", "m"), int, "m", loc("run", "m"))
    for key, kind in (("paths", int), ("seed", int), ("dt", float), ("fd_step", float), ("tol", float)):
        if get("run", key) is not None:
            kw[key] = _number(get("run", key), kind, key, loc("run", key))
    if get("run", "t_grid") is not None:
        g = _floats(get("run", "t_grid"), "t_grid", loc("run", "t_grid"))
        if len(g) != 3:
            raise ModelSyntaxError("t_grid needs start, stop, step", *loc("run", "t_grid"))
        try:
            grid_times(*g)
        except ValueError as exc:
            raise ModelSyntaxError(str(exc), *loc("run", "t_grid")) from None
        kw["t_grid"] = g
    if get("run", "base_point") is not None:
        bp = _floats(get("run", "base_point"), "base_point", loc("run", "base_point"))
        if len(bp) != dim:
            raise DimensionMismatch(f"base_point has {len(bp)} coordinates, dim is {dim}", *loc("run", "base_point"))
        kw["base_point"] = bp

    def indices(text, key):
        out = []
        for p in filter(None, (s.strip() for s in text.split(";"))):
            try:
                alpha = parse_index(p)
            except ValueError as exc:
                raise ModelSyntaxError(str(exc), *loc("run", key)) from None
            if any(i > noises for i in alpha):
                raise DimensionMismatch(f"{p} uses a field index above {noises}", *loc("run", key))
            out.append(alpha)
        return out

    if get("run", "directions") is not None:
        kw["directions"] = tuple(indices(get("run", "directions"), "directions"))
    if get("run", "chain") is not None:
        chain = []
        for item in filter(None, (s.strip() for s in get("run", "chain").split(";"))):
            if ":" not in item:
                raise ModelSyntaxError(f"chain item {item!r} needs 'alpha: duration'", *loc("run", "chain"))
            a, dur = item.split(":", 1)
            chain.append((indices(a, "chain")[0], _number(dur.strip(), float, "chain duration", loc("run", "chain"))))
        kw["chain"] = tuple(chain)
    return RunSettings(**kw)


# serialisation ------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x)) if abs(x) < 1e15 else repr(float(x))


def serialize(model: ModelFile) -> str:
    """Model file text that parses back to an equal :class:`ModelFile`."""
    out = ["[model]", f"name = {model.name}", f"dim = {model.dim}", f"noises = {model.noises}", ""]
    if model.parameters:
        out += ["[parameters]"] + [f"{k} = {_fmt(v)}" for k, v in model.parameters.items()] + [""]
    out += ["[fields]"] + [f"V{i} = {', '.join(c)}" for i, c in enumerate(model.fields)] + [""]
    if model.certificate is not None:
        out.append("[certificate]")
        for row, coeffs in model.certificate.items():
            body = "; ".join(f"{format_index(b)}: {e}" for b, e in coeffs.items())
            out.append(f"{format_index(row)} = {body}".rstrip())
        out.append("")
    if model.test_function is not None:
        out += ["[test]", f"f = {model.test_function}", ""]
    r, default = model.run, RunSettings()
    lines = []
    if r.m is not None:
        lines.append(f"m = {r.m}")
    if r.t_grid != default.t_grid:
        lines.append("t_grid = " + ", ".join(_fmt(x) for x in r.t_grid))
    for key in ("paths", "dt", "seed", "fd_step", "tol"):
        if getattr(r, key) != getattr(default, key):
            v = getattr(r, key)
            lines.append(f"{key} = {v if isinstance(v, int) else _fmt(v)}")
    if r.base_point is not None:
        lines.append("base_point = " + ", ".join(_fmt(x) for x in r.base_point))
    if r.directions is not None:
        lines.append("directions = " + "; ".join(format_index(a) for a in r.directions))
    if r.chain:
        lines.append("chain = " + "; ".join(f"{format_index(a)}: {_fmt(s)}" for a, s in r.chain))
    if lines:
        out += ["[run]"] + lines + [""]
    return "\n".join(out)


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
