"""``key = value`` run configuration with ``[section]`` headers.

Sections and keys::

    [model]    model (plasma|linear), M0, A_bar, C, forcing (plateau|none),
               forcing_amplitude, forcing_component, forcing_start,
               forcing_rise, forcing_end, forcing_fall
    [grid]     x_min, x_max, n_cells
    [solver]   cfl, t_end, ramp_time, scheme, time_samples
    [penalty]  mode, eps, eps_list
    [output]   dir, tag, checkpoints, plots

Matrices are JSON arrays (``A_bar = [[-0.5, 1], [1, -0.5]]``), eps lists
are comma or space separated.
"""

from __future__ import annotations

import configparser
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ConfigValidationError, ParseError
from .forcing import Plateau, component_sources, vector_source
from .model import Model, make_linear_model, make_plasma_model
from .penalty import PenaltyMode
from .solver import Grid1D, Scheme, SolverConfig

KEYS = {
    "model": {"model", "m0", "a_bar", "c", "forcing", "forcing_amplitude", "forcing_component",
              "forcing_start", "forcing_rise", "forcing_end", "forcing_fall"},
    "grid": {"x_min", "x_max", "n_cells"},
    "solver": {"cfl", "t_end", "ramp_time", "scheme", "time_samples"},
    "penalty": {"mode", "eps", "eps_list"},
    "output": {"dir", "tag", "checkpoints", "plots"},
}


@dataclass
class RunManifest:
    model: str
    model_params: dict
    x_min: float
    x_max: float
    n_cells: int
    cfl: float
    t_end: float
    ramp_time: float
    scheme: str
    time_samples: int
    mode: str
    eps_list: List[float]
    out_dir: str
    tag: str
    checkpoints: int = 10
    plots: bool = True
    forcing: dict = field(default_factory=dict)
    source_path: Optional[str] = None

    # -- builders -----------------------------------------------------------

    def grid(self) -> Grid1D:
        return Grid1D.create(self.x_min, self.x_max, self.n_cells)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(t_end=self.t_end, cfl=self.cfl, ramp_time=self.ramp_time,
                            scheme=Scheme(self.scheme))

    def penalty_mode(self) -> PenaltyMode:
        return PenaltyMode.parse(self.mode)

    @property
    def eps(self) -> float:
        return self.eps_list[0]

    def build_model(self, validate: bool = True) -> Model:
        prof = _forcing_profile(self.forcing)
        if self.model == "plasma":
            comp = self.forcing.get("component", 2) - 1
            src = component_sources(2, comp, prof) if prof is not None else None
            return make_plasma_model(self.model_params["M0"], src, validate=validate)
        a_bar = np.asarray(self.model_params["A_bar"], dtype=float)
        n = a_bar.shape[0]
        comp = self.forcing.get("component", n) - 1
        src = vector_source(n, comp, prof) if prof is not None else None
        return make_linear_model(a_bar, self.model_params["C"], src)

    def as_dict(self) -> dict:
        # where files go is not part of what was computed
        return {k: v for k, v in self.__dict__.items() if k not in ("source_path", "out_dir")}


def _forcing_profile(forcing: dict):
    if forcing.get("kind", "plateau") == "none":
        return None
    return Plateau(forcing.get("amplitude", 0.2), forcing.get("start", 0.0), forcing.get("rise", 0.2),
                   forcing.get("end", 2.0), forcing.get("fall", 0.5))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _locate(lines, section, key):
    """Line and column of ``key`` inside ``[section]`` (1-based), or ``(None, None)``."""
    current = None
    for i, raw in enumerate(lines, 1):
        s = raw.strip()
        m = re.match(r"\[\s*([^\]]+?)\s*\]", s)
        if m:
            current = m.group(1).strip().lower()
            continue
        if current == section and "=" in raw:
            k = raw.split("=", 1)[0]
            if k.strip().lower() == key:
                return i, len(k) - len(k.lstrip()) + 1
    return None, None


def _reader():
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#", ";"), strict=True,
                                   interpolation=None, empty_lines_in_values=False,
                                   default_section="__none__")
    return cp


def _raise_parse(exc: configparser.Error, lines):
    if isinstance(exc, configparser.MissingSectionHeaderError):
        raise ParseError("expected a [section] header before the first key", exc.lineno, 1) from None
    if isinstance(exc, configparser.ParsingError):
        lineno, line = exc.errors[0]
        text = line.strip("'\"") if isinstance(line, str) else str(line)
        raw = lines[lineno - 1] if 0 < lineno <= len(lines) else text
        stripped = raw.lstrip()
        col = len(raw) - len(stripped) + 1
        m = re.match(r"\S+", stripped)
        if m:
            col += m.end()
        raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, col) from None
    if isinstance(exc, (configparser.DuplicateOptionError, configparser.DuplicateSectionError)):
        raise ParseError(f"duplicate entry: {exc.message if hasattr(exc, 'message') else exc}",
                         getattr(exc, "lineno", None), 1) from None
    raise ParseError(str(exc)) from None


class _Section:
    def __init__(self, cp, name, lines):
        self.name = name
        self.items = dict(cp.items(name)) if cp.has_section(name) else {}
        self.lines = lines

    def _err(self, key, msg):
        line, col = _locate(self.lines, self.name, key)
        raise ParseError(f"[{self.name}] {key}: {msg}", line, col)

    def has(self, key):
        return key in self.items and self.items[key] != ""

    def text(self, key, default=None):
        if not self.has(key):
            if default is None:
                raise ConfigValidationError(f"missing required key [{self.name}] {key}")
            return default
        return self.items[key].strip()

    def real(self, key, default=None):
        if not self.has(key):
            if default is None:
                raise ConfigValidationError(f"missing required key [{self.name}] {key}")
            return float(default)
        try:
            val = float(self.items[key])
        except ValueError:
            self._err(key, f"not a number: {self.items[key]!r}")
        if not np.isfinite(val):
            self._err(key, "must be finite")
        return val

    def integer(self, key, default=None):
        if not self.has(key):
            if default is None:
                raise ConfigValidationError(f"missing required key [{self.name}] {key}")
            return int(default)
        try:
            return int(self.items[key])
        except ValueError:
            self._err(key, f"not an integer: {self.items[key]!r}")

    def boolean(self, key, default):
        if not self.has(key):
            return default
        v = self.items[key].strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        self._err(key, f"not a boolean: {self.items[key]!r}")

    def matrix(self, key):
        try:
            val = np.asarray(json.loads(self.text(key)), dtype=float)
        except (ValueError, TypeError):
            self._err(key, "expected a JSON array of numbers")
        return np.atleast_2d(val)

    def reals(self, key):
        parts = [s for s in re.split(r"[,\s]+", self.items[key].strip()) if s]
        try:
            return [float(s) for s in parts]
        except ValueError:
            self._err(key, f"not a list of numbers: {self.items[key]!r}")


def parse_config(path, check_only: bool = False) -> RunManifest:
    """Read and validate a configuration file.

    ``check_only`` skips the Mach-range precondition so that ``check`` can
    report an inadmissible plasma model instead of refusing it.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"config file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"config file is not UTF-8: {exc}") from None
    lines = text.splitlines()
    cp = _reader()
    try:
        # one entry per line: indentation never continues a value
        cp.read_string("\n".join(line.lstrip() for line in lines), source=str(path))
    except configparser.Error as exc:
        _raise_parse(exc, lines)

    for sec in cp.sections():
        if sec not in KEYS:
            line, _ = _locate_section(lines, sec)
            raise ParseError(f"unknown section [{sec}]", line, 1)
        for key in cp[sec]:
            if key not in KEYS[sec]:
                line, col = _locate(lines, sec, key)
                raise ParseError(f"unknown key {key!r} in [{sec}]", line, col)

    model_s = _Section(cp, "model", lines)
    grid_s = _Section(cp, "grid", lines)
    solver_s = _Section(cp, "solver", lines)
    pen_s = _Section(cp, "penalty", lines)
    out_s = _Section(cp, "output", lines)

    kind = model_s.text("model").lower()
    params = {}
    if kind == "plasma":
        m0 = model_s.real("m0")
        if not check_only and not (-1.0 < m0 < 0.0):
            raise ConfigValidationError(f"M0 must lie in (-1,0), got {m0}")
        params["M0"] = m0
    elif kind == "linear":
        params["A_bar"] = model_s.matrix("a_bar")
        params["C"] = model_s.matrix("c")
    else:
        raise ConfigValidationError(f"model must be 'plasma' or 'linear', got {kind!r}")

    forcing = {
        "kind": model_s.text("forcing", "plateau").lower(),
        "amplitude": model_s.real("forcing_amplitude", 0.2),
        "start": model_s.real("forcing_start", 0.0),
        "rise": model_s.real("forcing_rise", 0.2),
        "end": model_s.real("forcing_end", 2.0),
        "fall": model_s.real("forcing_fall", 0.5),
    }
    if model_s.has("forcing_component"):
        forcing["component"] = model_s.integer("forcing_component")
    if forcing["kind"] not in ("plateau", "none"):
        raise ConfigValidationError(f"forcing must be 'plateau' or 'none', got {forcing['kind']!r}")

    x_min = grid_s.real("x_min", -1.0)
    x_max = grid_s.real("x_max", 2.0)
    n_cells = grid_s.integer("n_cells")
    if not (x_min < 0.0 < x_max):
        raise ConfigValidationError(f"grid must satisfy x_min < 0 < x_max, got [{x_min}, {x_max}]")
    if n_cells < 4:
        raise ConfigValidationError(f"n_cells must be at least 4, got {n_cells}")

    t_end = solver_s.real("t_end")
    cfl = solver_s.real("cfl", 0.5)
    ramp = solver_s.real("ramp_time", 0.1)
    scheme = solver_s.text("scheme", Scheme.RUSANOV_RK2.value)
    samples = solver_s.integer("time_samples", 100)
    if not t_end > 0:
        raise ConfigValidationError(f"t_end must be positive, got {t_end}")
    if not (0.0 < cfl <= 1.0):
        raise ConfigValidationError(f"cfl must lie in (0,1], got {cfl}")
    if ramp < 0:
        raise ConfigValidationError(f"ramp_time must be non-negative, got {ramp}")
    if scheme not in {s.value for s in Scheme}:
        raise ConfigValidationError(f"unknown scheme {scheme!r}")
    if samples < 2:
        raise ConfigValidationError(f"time_samples must be at least 2, got {samples}")

    mode = pen_s.text("mode", PenaltyMode.PROJECTOR_IN_V.value)
    try:
        PenaltyMode.parse(mode)
    except ValueError:
        raise ConfigValidationError(
            f"mode must be one of {', '.join(m.value for m in PenaltyMode)}, got {mode!r}") from None
    eps_list = pen_s.reals("eps_list") if pen_s.has("eps_list") else []
    if pen_s.has("eps"):
        eps_list = [pen_s.real("eps")] + [e for e in eps_list]
    if not eps_list:
        raise ConfigValidationError("missing [penalty] eps or eps_list")
    if any(not e > 0 for e in eps_list):
        raise ConfigValidationError("eps must be positive")
    seen = []
    for e in eps_list:
        if e not in seen:
            seen.append(e)

    manifest = RunManifest(
        model=kind, model_params=params, x_min=x_min, x_max=x_max, n_cells=n_cells,
        cfl=cfl, t_end=t_end, ramp_time=ramp, scheme=scheme, time_samples=samples,
        mode=PenaltyMode.parse(mode).value, eps_list=seen,
        out_dir=out_s.text("dir", "."), tag=out_s.text("tag", path.stem),
        checkpoints=out_s.integer("checkpoints", 10), plots=out_s.boolean("plots", True),
        forcing=forcing, source_path=str(path),
    )
    if manifest.checkpoints < 1:
        raise ConfigValidationError("checkpoints must be at least 1")
    check_tag(manifest.tag)
    _validate_model(manifest, check_only)
    return manifest


def check_tag(tag: str) -> str:
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", tag):
        raise ConfigValidationError(f"tag may only contain letters, digits, '_', '.', '-': {tag!r}")
    return tag


def _locate_section(lines, sec):
    for i, raw in enumerate(lines, 1):
        m = re.match(r"\s*\[\s*([^\]]+?)\s*\]", raw)
        if m and m.group(1).strip() == sec:
            return i, 1
    return None, None


def _validate_model(manifest: RunManifest, check_only: bool):
    """Build the model once so module preconditions fail before any run."""
    n = 2 if manifest.model == "plasma" else manifest.model_params["A_bar"].shape[0]
    comp = manifest.forcing.get("component")
    if comp is not None and not (1 <= comp <= n):
        raise ConfigValidationError(f"forcing_component must lie in [1, {n}], got {comp}")
    try:
        _forcing_profile(manifest.forcing)
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from None
    manifest.build_model(validate=not check_only)
