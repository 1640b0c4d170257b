"""Flat ``key = value`` experiment configuration."""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import List, Optional, Tuple

from fractional_control.errors import ConfigError

SOURCE_NAMES = ("example", "zero", "identity")
KERNEL_NAMES = ("example", "zero")
INPUT_NAMES = ("example", "identity", "zero", "modes_from_two")


@dataclass(frozen=True)
class ConfigEntry:
    """One ``key = value`` line"""
    key: str
    raw: str
    line: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Problem, solver and sweep parameters; None means derived from the rest"""
    q: float = 1.5
    a: float = 1.0
    L: float = math.pi
    N: int = 6
    Ny: Optional[int] = None
    z0: Tuple[float, ...] = ()
    z1: Tuple[float, ...] = ()
    z_d: Tuple[float, ...] = (0.1,)
    phi_weights: Tuple[float, ...] = (0.1, 0.2)
    phi_times: Tuple[float, ...] = (0.0, 0.2)
    phi_bound: Optional[float] = None
    psi_weights: Tuple[float, ...] = (0.15, 0.25)
    psi_times: Tuple[float, ...] = (0.0, 0.2)
    psi_bound: Optional[float] = None
    f: str = "example"
    g: str = "example"
    B: str = "example"
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None
    d1: Optional[float] = None
    d2: Optional[float] = None
    m_bound: Optional[float] = None
    n_t: int = 200
    fp_tol: float = 1e-8
    max_iter: int = 100
    relaxation: float = 1.0
    n_quad: int = 400
    betas: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    seed: int = 0
    output: Optional[str] = None
    ml_tol: float = 1e-12

    def padded(self, name: str) -> Tuple[float, ...]:
        """Coefficient list zero-padded to N entries"""
        values = getattr(self, name)
        return tuple(values) + (0.0,) * (self.N - len(values))

    def validate(self) -> "ExperimentConfig":
        for f in fields(self):
            value = getattr(self, f.name)
            values = value if isinstance(value, tuple) else (value,)
            _require(all(not isinstance(v, float) or math.isfinite(v) for v in values), f.name,
                     f"must be finite, got {value}")
        _require(1.0 < self.q <= 2.0, "q", f"must lie in (1, 2], got {self.q}")
        _require(self.a > 0.0, "a", f"must be positive, got {self.a}")
        _require(self.L > 0.0, "L", f"must be positive, got {self.L}")
        _require(self.N >= 1, "N", f"must be at least 1, got {self.N}")
        if self.B in ("example", "modes_from_two"):
            _require(self.N >= 2, "N", f"B = {self.B} needs at least 2 modes, got {self.N}")
        if self.Ny is not None:
            _require(self.Ny >= 2 * self.N + 1, "Ny", f"must be at least 2N+1 = {2 * self.N + 1}")
        for name in ("z0", "z1", "z_d"):
            _require(len(getattr(self, name)) <= self.N, name,
                     f"has more than N = {self.N} coefficients")
        for prefix in ("phi", "psi"):
            weights = getattr(self, f"{prefix}_weights")
            times = getattr(self, f"{prefix}_times")
            bound = getattr(self, f"{prefix}_bound")
            _require(len(weights) == len(times), f"{prefix}_times",
                     f"has {len(times)} entries for {len(weights)} weights")
            _require(all(0.0 <= t <= self.a for t in times), f"{prefix}_times",
                     f"must lie in [0, {self.a}]")
            if bound is not None:
                _require(sum(abs(w) for w in weights) < bound, f"{prefix}_weights",
                         f"sum of |weights| must stay below {prefix}_bound = {bound}")
        _require(self.f in SOURCE_NAMES, "f", f"must be one of {SOURCE_NAMES}, got '{self.f}'")
        _require(self.g in KERNEL_NAMES, "g", f"must be one of {KERNEL_NAMES}, got '{self.g}'")
        _require(self.B in INPUT_NAMES, "B", f"must be one of {INPUT_NAMES}, got '{self.B}'")
        for name in ("C1", "C2", "C3", "d1", "d2", "m_bound"):
            value = getattr(self, name)
            _require(value is None or value >= 0.0, name, f"must be non-negative, got {value}")
        _require(self.n_t >= 16, "n_t", f"must be at least 16, got {self.n_t}")
        _require(self.fp_tol > 0.0, "fp_tol", f"must be positive, got {self.fp_tol}")
        _require(self.max_iter >= 1, "max_iter", f"must be at least 1, got {self.max_iter}")
        _require(0.0 < self.relaxation <= 1.0, "relaxation", f"must lie in (0, 1], got {self.relaxation}")
        _require(self.n_quad >= 16, "n_quad", f"must be at least 16, got {self.n_quad}")
        _require(len(self.betas) > 0, "betas", "must not be empty")
        _require(all(b > 0.0 for b in self.betas), "betas", "must be positive")
        _require(all(later < earlier for earlier, later in zip(self.betas, self.betas[1:])),
                 "betas", "must be strictly decreasing")
        _require(self.seed >= 0, "seed", f"must be non-negative, got {self.seed}")
        _require(self.ml_tol > 0.0, "ml_tol", f"must be positive, got {self.ml_tol}")
        return self


def _require(condition: bool, field_name: str, message: str):
    if not condition:
        raise ConfigError(message, field=field_name)


class ValueParser(ABC):
    """Abstract base class for value parsing strategies"""
    @abstractmethod
    def can_parse(self, key: str) -> bool:
        pass

    @abstractmethod
    def parse(self, entry: ConfigEntry):
        pass


class FloatValueParser(ValueParser):
    KEYS = {"q", "a", "L", "phi_bound", "psi_bound", "C1", "C2", "C3", "d1", "d2",
            "m_bound", "fp_tol", "relaxation", "ml_tol"}

    def can_parse(self, key: str) -> bool:
        return key in self.KEYS

    def parse(self, entry: ConfigEntry) -> float:
        return _to_float(entry.raw, entry)


class IntValueParser(ValueParser):
    KEYS = {"N", "Ny", "n_t", "max_iter", "n_quad", "seed"}

    def can_parse(self, key: str) -> bool:
        return key in self.KEYS

    def parse(self, entry: ConfigEntry) -> int:
        try:
            return int(entry.raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got '{entry.raw}'",
                              line=entry.line, field=entry.key) from None


class FloatListParser(ValueParser):
    """Comma-separated floats; an empty value is the empty list"""
    KEYS = {"z0", "z1", "z_d", "phi_weights", "phi_times", "psi_weights", "psi_times", "betas"}

    def can_parse(self, key: str) -> bool:
        return key in self.KEYS

    def parse(self, entry: ConfigEntry) -> Tuple[float, ...]:
        if not entry.raw:
            return ()
        return tuple(_to_float(item.strip(), entry) for item in entry.raw.split(","))


class NameValueParser(ValueParser):
    KEYS = {"f", "g", "B", "output"}

    def can_parse(self, key: str) -> bool:
        return key in self.KEYS

    def parse(self, entry: ConfigEntry) -> str:
        if not entry.raw:
            raise ConfigError("value must not be empty", line=entry.line, field=entry.key)
        return entry.raw


def _to_float(raw: str, entry: ConfigEntry) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got '{raw}'", line=entry.line, field=entry.key) from None
    if not math.isfinite(value):
        raise ConfigError(f"value must be finite, got '{raw}'", line=entry.line, field=entry.key)
    return value


class ConfigParser:
    """Parses experiment configuration text"""
    def __init__(self):
        self.parsers: List[ValueParser] = [
            FloatValueParser(),
            IntValueParser(),
            FloatListParser(),
            NameValueParser(),
        ]

    def _strip_comments(self, content: str) -> List[Tuple[int, str]]:
        """Non-blank lines with '#' comments removed, numbered from 1"""
        lines = []
        for number, line in enumerate(content.splitlines(), start=1):
            text = line.split("#", 1)[0].strip()
            if text:
                lines.append((number, text))
        return lines

    def _entries(self, content: str) -> List[ConfigEntry]:
        entries = []
        seen = set()
        for number, text in self._strip_comments(content):
            key, sep, raw = text.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"expected 'key = value', got '{text}'", line=number)
            if key in seen:
                raise ConfigError("duplicate key", line=number, field=key)
            seen.add(key)
            entries.append(ConfigEntry(key, raw.strip(), number))
        return entries

    def parse(self, content: str) -> ExperimentConfig:
        values = {}
        for entry in self._entries(content):
            parser = next((p for p in self.parsers if p.can_parse(entry.key)), None)
            if parser is None:
                raise ConfigError("unknown key", line=entry.line, field=entry.key)
            values[entry.key] = parser.parse(entry)
        return ExperimentConfig(**values).validate()


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc.strerror}") from exc
    try:
        content = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"invalid UTF-8 byte 0x{data[exc.start]:02x}",
                          line=data.count(b"\n", 0, exc.start) + 1) from None
    return ConfigParser().parse(content)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_config(cfg: ExperimentConfig) -> str:
    """Config text that parses back to cfg; floats keep 17 significant digits"""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_format(value)}")
    return "\n".join(lines) + "\n"
