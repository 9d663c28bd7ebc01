"""Flat ``key = value`` experiment configuration.

Keys are dotted (``flow.dt = 1e-3``).  ``#`` starts a comment.  Values are
read as int, float, bool (``true``/``false``), comma lists, or bare strings.
Sections left out of a file come from the experiment's defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, SMCFError, ValidationError

__all__ = ["ExperimentConfig", "parse_config", "load_config", "parse_value", "SECTIONS"]

SECTIONS = ("grid", "initial", "flow", "euler", "norms", "params")
TOP_LEVEL = ("experiment", "output_dir", "emit_snapshots_every", "seed")


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [parse_value(t) for t in text.split(",") if t.strip()]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def _tokenize(text: str):
    entries, errors, seen = {}, [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(c.isspace() for c in key):
            errors.append(f"line {lineno}: malformed key {key!r}")
            continue
        if not value:
            errors.append(f"line {lineno}: key {key!r} has no value")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
            continue
        seen[key] = lineno
        entries[key] = parse_value(value)
    if errors:
        raise ParseError(errors)
    return entries


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    euler: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output_dir: str = "out"
    emit_snapshots_every: int = 0
    seed: int = 0

    def get(self, dotted: str):
        head, _, tail = dotted.partition(".")
        if not tail:
            return getattr(self, head)
        return getattr(self, head)[tail]

    def with_value(self, dotted: str, value) -> "ExperimentConfig":
        """A copy with one dotted key replaced (used by sweeps)."""
        import copy

        new = copy.deepcopy(self)
        head, _, tail = dotted.partition(".")
        if not tail:
            setattr(new, head, value)
        else:
            if head not in SECTIONS:
                raise ValidationError([f"unknown section {head!r}"])
            getattr(new, head)[tail] = value
        errs = _validate(new)
        if errs:
            raise ValidationError(errs)
        return new

    def to_text(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        for k in TOP_LEVEL[1:]:
            lines.append(f"{k} = {getattr(self, k)}")
        for sec in SECTIONS:
            for k in sorted(getattr(self, sec)):
                v = getattr(self, sec)[k]
                if isinstance(v, list):
                    v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{sec}.{k} = {v}")
        return "\n".join(lines) + "\n"


def _positive(errs, name, v, integer=False, allow_zero=False):
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    if ok and integer:
        ok = float(v).is_integer()
    if ok:
        ok = v >= 0 if allow_zero else v > 0
    if not ok:
        kind = "integer" if integer else "number"
        errs.append(f"{name} must be a {'non-negative' if allow_zero else 'positive'} {kind} (got {v!r})")


def _validate(cfg: ExperimentConfig, stability=True):
    from .experiments import REGISTRY
    from .generators import GENERATORS

    errs = []
    if cfg.experiment not in REGISTRY:
        errs.append(f"experiment {cfg.experiment!r} is not in the registry {sorted(REGISTRY)}")
        return errs
    n = cfg.grid.get("n")
    if not (isinstance(n, int) and not isinstance(n, bool) and n >= 4 and n & (n - 1) == 0):
        errs.append(f"grid.n must be a power of two >= 4 (got {n!r})")
    if cfg.grid.get("dim") not in (1, 2):
        errs.append(f"grid.dim must be 1 or 2 (got {cfg.grid.get('dim')!r})")
    _positive(errs, "grid.length", cfg.grid.get("length"))
    name = cfg.initial.get("name")
    if name not in GENERATORS:
        errs.append(f"initial.name {name!r} is not a generator {sorted(GENERATORS)}")
    for key in ("dt", "t_end"):
        if key in cfg.flow:
            _positive(errs, f"flow.{key}", cfg.flow[key], allow_zero=key == "t_end")
    if "substeps" in cfg.flow:
        _positive(errs, "flow.substeps", cfg.flow["substeps"], integer=True)
    if "cfl_safety" in cfg.flow:
        v = cfg.flow["cfl_safety"]
        if not (isinstance(v, (int, float)) and 0 < v <= 1):
            errs.append(f"flow.cfl_safety must lie in (0, 1] (got {v!r})")
    if "scheme" in cfg.flow and cfg.flow["scheme"] not in ("rk4_direct", "regularized_euler"):
        errs.append(f"flow.scheme must be rk4_direct or regularized_euler (got {cfg.flow['scheme']!r})")
    for key in ("epsilon",):
        if key in cfg.euler:
            _positive(errs, f"euler.{key}", cfg.euler[key])
    if "willmore_substeps" in cfg.euler:
        v = cfg.euler["willmore_substeps"]
        if not (isinstance(v, int) and v >= 4):
            errs.append(f"euler.willmore_substeps must be an integer >= 4 (got {v!r})")
    s = cfg.norms.get("s")
    if s is not None:
        _positive(errs, "norms.s", s)
        d = cfg.grid.get("dim")
        if isinstance(s, (int, float)) and d in (1, 2) and not s > d / 2:
            errs.append(f"norms.s must exceed d/2 = {d / 2} (got {s})")
    if "k" in cfg.norms and not (isinstance(cfg.norms["k"], int) and 0 <= cfg.norms["k"] <= 6):
        errs.append(f"norms.k must be an integer in [0, 6] (got {cfg.norms['k']!r})")
    if "dh" in cfg.norms:
        _positive(errs, "norms.dh", cfg.norms["dh"])
    if "delta" in cfg.norms and s is not None:
        dlt, d = cfg.norms["delta"], cfg.grid.get("dim", 2)
        if not (isinstance(dlt, (int, float)) and 0 < dlt < s - d / 2):
            errs.append(f"norms.delta must lie in (0, s - d/2) (got {dlt!r})")
    _positive(errs, "emit_snapshots_every", cfg.emit_snapshots_every, integer=True, allow_zero=True)
    _positive(errs, "seed", cfg.seed, integer=True, allow_zero=True)
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        errs.append("output_dir must be a non-empty path")
    if not errs and stability and cfg.flow.get("dt") is not None:
        errs.extend(_stability_errors(cfg))
    return errs


def _stability_errors(cfg: ExperimentConfig):
    from .experiments import build_grid, build_initial
    from .flows import FlowConfig
    from .geometry import compute_geometry

    try:
        grid = build_grid(cfg)
        im, _ = build_initial(cfg, grid)
        fc = FlowConfig(
            dt=float(cfg.flow["dt"]),
            t_end=float(cfg.flow.get("t_end", 0.0)),
            cfl_safety=float(cfg.flow.get("cfl_safety", 0.5)),
            substeps=int(cfg.flow.get("substeps", 1)),
        )
        fc.check(compute_geometry(im))
    except SMCFError as exc:
        return [f"flow: {exc}"]
    return []


def parse_config(text: str, stability: bool = True) -> ExperimentConfig:
    """Parse and fully validate a config; every problem is reported at once."""
    from .experiments import REGISTRY, resolve_name

    entries = _tokenize(text)
    errs = []
    name = entries.pop("experiment", None)
    if name is None:
        raise ValidationError(["missing required key 'experiment'"])
    name = resolve_name(str(name))
    if name not in REGISTRY:
        raise ValidationError([f"experiment {name!r} is not in the registry {sorted(REGISTRY)}"])
    defaults = REGISTRY[name].defaults
    cfg = ExperimentConfig(
        experiment=name,
        **{sec: dict(defaults.get(sec, {})) for sec in SECTIONS},
        output_dir=str(defaults.get("output_dir", f"out/{name}")),
        emit_snapshots_every=int(defaults.get("emit_snapshots_every", 0)),
        seed=int(defaults.get("seed", 0)),
    )
    for key, value in entries.items():
        head, _, tail = key.partition(".")
        if not tail:
            if key in TOP_LEVEL:
                setattr(cfg, key, str(value) if key == "output_dir" else value)
            else:
                errs.append(f"unknown key {key!r}")
        elif head in SECTIONS:
            getattr(cfg, head)[tail] = value
        else:
            errs.append(f"unknown section in key {key!r}")
    if "initial.name" in entries and entries["initial.name"] != defaults.get("initial", {}).get("name"):
        # a different generator does not inherit the default generator's parameters
        cfg.initial = {k[len("initial."):]: v for k, v in entries.items() if k.startswith("initial.")}
    errs.extend(_validate(cfg, stability) if not errs else [])
    if errs:
        raise ValidationError(errs)
    return cfg


def load_config(path, stability: bool = True) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), stability)
