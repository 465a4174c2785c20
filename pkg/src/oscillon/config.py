"""Run configuration: sectioned ``key = value`` text.

Parsing goes through :mod:`configparser`; this module adds the schema,
defaults, typed validation and a canonical echo.  Unknown sections or keys
are rejected with the line they sit on.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Optional

from .errors import ParseError, ValidationError

__all__ = ["RunConfig", "parse_config", "SCHEMA", "DEMO_CONFIG"]


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fractions(text: str) -> tuple:
    return tuple(Fraction(x.strip()) for x in text.split(",") if x.strip())


# section -> key -> (attribute, converter, default)
SCHEMA = {
    "potential": {
        "name": ("potential", str, "Vplus"),
        "coefficients": ("coefficients", _fractions, None),
        "alpha": ("alpha", float, None),
        "certificate": ("certificate", _fractions, None),
    },
    "grid": {"N": ("N", int, 128)},
    "time": {
        "s": ("s", float, 0.0),
        "t": ("t", float, 10.0),
        "dt": ("dt", float, 0.01),
        "method": ("method", str, "strang_exact"),
        "adapt": ("adapt", _bool, False),
        "local_error_target": ("local_error_target", float, 1e-8),
        "dealias": ("dealias", _bool, False),
    },
    "physics": {"H": ("H", float, 1.0)},
    "init": {
        "kind": ("init_kind", str, "thermal"),
        "seed": ("seed", int, 0),
        "amplitude": ("amplitude", float, 1.0),
        "k0": ("k0", float, 4.0),
        "k": ("mode_k", int, 1),
        "mean_fraction": ("mean_fraction", float, 0.0),
        "v_fraction": ("v_fraction", float, 0.5),
        "path": ("init_path", str, None),
    },
    "experiment": {
        "name": ("experiment", str, None),
        "seeds": ("seeds", int, 1),
        "s_values": ("s_values", _floats, None),
        "imax": ("imax", int, 12),
        "factor": ("factor", float, 100.0),
        "points": ("points", int, 100),
        "eps": ("eps", _floats, None),
        "modes": ("modes", int, 16),
        "fill": ("fill", float, 0.9),
        "M": ("oracle_M", _floats, (64.0, 128.0, 256.0)),
    },
    "output": {
        "directory": ("out_dir", str, "out"),
        "snapshot_stride": ("snapshot_stride", int, 10),
        "figures": ("figures", _bool, True),
    },
}

_ATTR = {attr: (sec, key) for sec, keys in SCHEMA.items() for key, (attr, _, _) in keys.items()}


@dataclass
class RunConfig:
    potential: str = "Vplus"
    coefficients: Optional[tuple] = None
    alpha: Optional[float] = None
    certificate: Optional[tuple] = None
    N: int = 128
    s: float = 0.0
    t: float = 10.0
    dt: float = 0.01
    method: str = "strang_exact"
    adapt: bool = False
    local_error_target: float = 1e-8
    dealias: bool = False
    H: float = 1.0
    init_kind: str = "thermal"
    seed: int = 0
    amplitude: float = 1.0
    k0: float = 4.0
    mode_k: int = 1
    mean_fraction: float = 0.0
    v_fraction: float = 0.5
    init_path: Optional[str] = None
    experiment: Optional[str] = None
    seeds: int = 1
    s_values: Optional[tuple] = None
    imax: int = 12
    factor: float = 100.0
    points: int = 100
    eps: Optional[tuple] = None
    modes: int = 16
    fill: float = 0.9
    oracle_M: tuple = (64.0, 128.0, 256.0)
    out_dir: str = "out"
    snapshot_stride: int = 10
    figures: bool = True

    def validate(self) -> "RunConfig":
        def bad(attr, msg):
            sec, key = _ATTR[attr]
            raise ValidationError(f"{sec}.{key} {msg}")

        if not self.H > 0:
            bad("H", "must be > 0")
        if self.N < 8 or self.N & (self.N - 1):
            bad("N", "must be a power of two >= 8")
        if self.t < self.s:
            bad("t", "must be >= time.s")
        if not self.dt > 0:
            bad("dt", "must be > 0")
        if self.method not in ("strang_exact", "rk4"):
            bad("method", "must be strang_exact or rk4")
        if not self.local_error_target > 0:
            bad("local_error_target", "must be > 0")
        if self.init_kind not in ("thermal", "mode", "file"):
            bad("init_kind", "must be thermal, mode or file")
        if self.init_kind == "file" and not self.init_path:
            bad("init_path", "is required when init.kind = file")
        if self.amplitude < 0:
            bad("amplitude", "must be >= 0")
        if not self.k0 > 0:
            bad("k0", "must be > 0")
        if self.mode_k < 0:
            bad("mode_k", "must be >= 0")
        if not 0 <= self.mean_fraction < 1:
            bad("mean_fraction", "must be in [0, 1)")
        if not 0 <= self.v_fraction <= 1:
            bad("v_fraction", "must be in [0, 1]")
        if self.potential == "custom" and not self.coefficients:
            bad("coefficients", "are required for a custom potential")
        if self.seeds < 1:
            bad("seeds", "must be >= 1")
        if self.points < 1:
            bad("points", "must be >= 1")
        if self.snapshot_stride < 0:
            bad("snapshot_stride", "must be >= 0")
        return self

    def to_text(self) -> str:
        """Canonical echo: every key, fixed order, defaults filled in."""
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key, (attr, _, _) in keys.items():
                val = getattr(self, attr)
                if val is None:
                    continue
                if isinstance(val, tuple):
                    val = ", ".join(str(x) for x in val)
                elif isinstance(val, bool):
                    val = "true" if val else "false"
                elif isinstance(val, float):
                    val = repr(val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = [str(x) for x in v] if isinstance(v, tuple) else v
        return out


def _line_of(text: str, pattern: str) -> int:
    rx = re.compile(pattern)
    for i, line in enumerate(text.splitlines(), start=1):
        if rx.search(line):
            return i
    return 0


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True,
        empty_lines_in_values=False,
    )
    parser.optionxform = str  # keys are case sensitive (N, H)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any [section]", exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).split(": ", 1)[-1], exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else 0
        raise ParseError("expected 'key = value'", lineno) from None

    cfg = RunConfig()
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ParseError(f"unknown section [{sec}]", _line_of(text, rf"^\s*\[\s*{re.escape(sec)}\s*\]"))
        for key, raw in parser.items(sec):
            line = _line_of(text, rf"^\s*{re.escape(key)}\s*[=:]")
            if key not in SCHEMA[sec]:
                raise ParseError(f"unknown key {key!r} in [{sec}]", line)
            attr, conv, _ = SCHEMA[sec][key]
            try:
                setattr(cfg, attr, conv(raw.strip()))
            except (ValueError, ZeroDivisionError) as exc:
                raise ValidationError(f"{sec}.{key}: cannot read {raw.strip()!r} ({exc})") from None
    return cfg.validate()


# Fig.-1-style run: a nearly homogeneous condensate with small thermal
# fluctuations, starting when the comoving box is 40 units long.
DEMO_CONFIG = """\
[potential]
name = Vminus

[grid]
N = 256

[time]
s = 184.4
t = 384.4
dt = 0.02

[physics]
H = 0.02

[init]
kind = thermal
seed = 1
amplitude = 1.0
k0 = 10
mean_fraction = 0.9
v_fraction = 0.0

[output]
directory = out/oscillon
snapshot_stride = 50
"""
