"""Simulation configuration: a flat ``key = value`` file plus keyword overrides.

Example file::

    # C_1 at desk scale
    code = c1
    L = 20
    Z = 100
    d_r = 4
    n_users = 8
    gammas = 1.8, 2.0, 2.2
    channel = awgn
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..code_construction import CODES, Protograph, couple, named_code_parts
from ..receiver import FREEZE_MODES


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    code: str = "c1"
    parts_file: str | None = None  # custom component matrices, blank-line separated
    L: int = 20
    Z: int = 100
    d_r: int = 4
    n_users: int = 8
    channel: str = "awgn"
    gammas: list[float] = field(default_factory=list)
    W_d: int = 10  # 0 selects full-span BP
    I_max: int = 40
    interleaver: str = "subblock"
    allow_full_windowed: bool = False
    max_frames: int = 2000
    max_errors: int = 200
    seed: int = 1
    lift_seed: int = 0
    lift_style: str = "random"
    all_zero: bool = True
    count_on: str = "info"  # info | code
    freeze: str = "hard"  # hard | keep, for positions leaving the window

    # -- derived quantities -------------------------------------------------

    def parts(self) -> list[Protograph]:
        if self.parts_file:
            return read_parts(self.parts_file)
        if self.code.lower() in CODES:
            return named_code_parts(self.code)
        raise ConfigError(f"unknown code {self.code!r}; use one of {sorted(CODES)} or parts_file")

    @property
    def W(self) -> int:
        return len(self.parts())

    @property
    def n_positions(self) -> int:
        return self.L + self.W - 1

    @property
    def windowed(self) -> bool:
        return 0 < self.W_d < self.n_positions

    @property
    def code_rate(self) -> float:
        """Design rate without termination loss."""
        return couple(self.parts(), max(self.L, self.W)).asymptotic_rate

    @property
    def r_sum(self) -> float:
        return self.n_users * self.code_rate / self.d_r

    @property
    def n_cw(self) -> int:
        """Transmitted symbols per user and frame."""
        return self.L * self.parts()[0].n_vars * self.Z * self.d_r

    def validate(self) -> "SimConfig":
        try:
            parts = self.parts()
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        W = len(parts)
        if self.L < W:
            raise ConfigError(f"L={self.L} must be >= W={W}")
        for name in ("Z", "d_r", "n_users", "I_max", "max_frames", "max_errors"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.W_d < 0 or (self.W_d and self.W_d < W):
            raise ConfigError(f"W_d={self.W_d} must be 0 (full span) or >= W={W}")
        if self.W_d > self.L + W - 1:
            raise ConfigError(f"W_d={self.W_d} exceeds the {self.L + W - 1} check positions")
        if self.channel.lower() not in ("awgn", "rayleigh"):
            raise ConfigError(f"unknown channel {self.channel!r}")
        if self.interleaver.lower() not in ("full", "subblock"):
            raise ConfigError(f"unknown interleaver {self.interleaver!r}")
        if self.windowed and self.interleaver.lower() == "full" and not self.allow_full_windowed:
            raise ConfigError("windowed decoding needs sub-block interleavers "
                              "(set allow_full_windowed to force full interleavers)")
        if self.count_on not in ("info", "code"):
            raise ConfigError("count_on must be 'info' or 'code'")
        if self.lift_style not in ("random", "circulant"):
            raise ConfigError(f"unknown lift_style {self.lift_style!r}")
        if self.freeze not in FREEZE_MODES:
            raise ConfigError(f"freeze must be one of {FREEZE_MODES}")
        return self

    def with_overrides(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **{k: _coerce(self, k, v) for k, v in kw.items() if v is not None})

    def items(self) -> list[tuple[str, str]]:
        return [(f.name, _render(getattr(self, f.name))) for f in dataclasses.fields(self)]


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _render(v) -> str:
    if isinstance(v, list):
        return ", ".join(repr(x) for x in v)
    return str(v)


def _parse_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _coerce(cfg_or_cls, key: str, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = str(_FIELDS[key].type)
    if not isinstance(value, str):
        if kind.startswith("list") and not isinstance(value, (list, tuple)):
            value = [value]
        return list(value) if kind.startswith("list") else value
    try:
        if kind.startswith("list"):
            return [float(x) for x in value.replace(",", " ").split()]
        if kind == "bool":
            return _parse_bool(value)
        if kind == "int":
            return int(value)
        if value.strip().lower() in ("none", "") and "None" in kind:
            return None
        return value.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def load_config(path=None, **overrides) -> SimConfig:
    """Defaults, then the file (if any), then keyword overrides; validated."""
    cfg = SimConfig()
    if path is not None:
        cfg = cfg.with_overrides(**parse_config_text(Path(path).read_text()))
    return cfg.with_overrides(**overrides).validate()


def read_parts(path) -> list[Protograph]:
    """Component matrices from a text file, one matrix per blank-line separated block."""
    blocks, cur = [], []
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            cur.append(line)
        elif cur:
            blocks.append("\n".join(cur))
            cur = []
    if cur:
        blocks.append("\n".join(cur))
    if not blocks:
        raise ConfigError(f"no matrices in {path}")
    return [Protograph.from_text(b) for b in blocks]

