"""Flat, typed, sectioned configuration files.

Grammar (``configparser`` INI dialect)::

    [PhysParams]
    gamma = 1.4
    tau = 0.1
    G = none            # optional values accept "none"

    [GridSpec]
    L = pi              # the token "pi" is accepted for floats
    N = 512

    [Experiment]
    taus = 0.1, 0.05, 0.025     # lists are comma separated

Every key must belong to :data:`SCHEMA`; unknown sections or keys, type
mismatches and invariant violations raise :class:`ValidationError` naming the
``Section.key`` path.  :func:`serialize_config` writes every effective value so
that ``parse_config(serialize_config(cfg)) == cfg``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ValidationError
from .experiments import PREPARATIONS, InitialDataSpec
from .grid import GridSpec, StepControl
from .model import PhysParams

FLOAT, INT, STR, OPT_FLOAT, FLOATS, INTS = "float", "int", "str", "float or none", "float list", "int list"


@dataclass(frozen=True)
class OutputSpec:
    cadence: float = 20.0
    output_dir: str = "out"
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not self.cadence > 0:
            raise ValidationError(f"cadence must be > 0, got {self.cadence!r}", key="Output.cadence")


@dataclass(frozen=True)
class ExperimentSpec:
    taus: tuple = (0.1, 0.05, 0.025, 0.0125, 0.00625)
    layer_taus: tuple = (0.025, 0.0125, 0.00625)
    samples_per_tau: int = 20
    Gs: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    mubar: float = 1.0
    grids: tuple = ()
    dt_rule: str = "cfl"
    solver: str = "relaxed"
    ladder: tuple = (0.0, 0.001, 0.01, 0.1, 0.3, 1.0, 3.0, 10.0)
    t_probe: float = 2.0
    probe_preparation: str = "ill-prepared"
    n_bisect: int = 4
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValidationError("workers must be >= 1", key="Experiment.workers")
        if self.n_bisect < 0:
            raise ValidationError("n_bisect must be >= 0", key="Experiment.n_bisect")
        if self.samples_per_tau < 2:
            raise ValidationError("samples_per_tau must be >= 2", key="Experiment.samples_per_tau")
        if self.dt_rule not in ("cfl", "diffusive"):
            raise ValidationError(f"dt_rule must be 'cfl' or 'diffusive', got {self.dt_rule!r}",
                                  key="Experiment.dt_rule")
        if self.solver not in ("relaxed", "ns"):
            raise ValidationError(f"solver must be 'relaxed' or 'ns', got {self.solver!r}",
                                  key="Experiment.solver")
        if not self.mubar > 0:
            raise ValidationError("mubar must be > 0", key="Experiment.mubar")
        if self.probe_preparation not in PREPARATIONS:
            raise ValidationError(f"probe_preparation must be one of {PREPARATIONS}, got {self.probe_preparation!r}",
                                  key="Experiment.probe_preparation")
        if not self.t_probe > 0:
            raise ValidationError("t_probe must be > 0", key="Experiment.t_probe")


SECTIONS = {
    "PhysParams": PhysParams,
    "GridSpec": GridSpec,
    "StepControl": StepControl,
    "InitialDataSpec": InitialDataSpec,
    "Output": OutputSpec,
    "Experiment": ExperimentSpec,
}

SCHEMA = {
    "PhysParams": {"gamma": FLOAT, "B": FLOAT, "mu": FLOAT, "a": FLOAT, "tau": FLOAT, "G": OPT_FLOAT},
    "GridSpec": {"L": FLOAT, "N": INT},
    "StepControl": {"cfl": FLOAT, "t_end": FLOAT, "dt_max": FLOAT, "hyperviscosity": FLOAT, "stretch_in": STR},
    "InitialDataSpec": {
        "family": STR, "amplitude": FLOAT, "width": FLOAT, "preparation": STR, "mode": INT,
        "center": FLOAT, "v_weight": FLOAT, "u_weight": FLOAT, "table": STR, "noise": FLOAT, "seed": INT,
    },
    "Output": {"cadence": FLOAT, "output_dir": STR, "snapshot_times": FLOATS},
    "Experiment": {
        "taus": FLOATS, "layer_taus": FLOATS, "samples_per_tau": INT, "Gs": FLOATS, "mubar": FLOAT,
        "grids": INTS, "dt_rule": STR, "solver": STR, "ladder": FLOATS, "t_probe": FLOAT,
        "probe_preparation": STR,
        "n_bisect": INT, "workers": INT,
    },
}


@dataclass(frozen=True)
class RunConfig:
    phys: PhysParams = field(default_factory=PhysParams)
    grid: GridSpec = field(default_factory=GridSpec)
    control: StepControl = field(default_factory=StepControl)
    initial: InitialDataSpec = field(default_factory=InitialDataSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)

    def __post_init__(self):
        n_samples = math.floor(self.output.cadence * self.control.t_end + 1e-9) + 1
        if self.control.t_end > 0 and n_samples < 2:
            raise ValidationError(
                f"cadence {self.output.cadence!r} gives fewer than 2 samples over [0, {self.control.t_end!r}]",
                key="Output.cadence",
            )

    @property
    def sample_dt(self) -> float:
        return 1.0 / self.output.cadence

    def warnings(self) -> list:
        msg = self.phys.regime_warning()
        return [msg] if msg else []

    def echo(self) -> dict:
        """Every effective parameter, defaults included."""
        return {name: asdict(getattr(self, attr)) for name, attr in _ATTRS.items()}


_ATTRS = {
    "PhysParams": "phys",
    "GridSpec": "grid",
    "StepControl": "control",
    "InitialDataSpec": "initial",
    "Output": "output",
    "Experiment": "experiment",
}


def _parse_float(raw: str, key: str) -> float:
    s = raw.strip()
    if s.lower() in ("pi", "+pi"):
        return math.pi
    if s.lower() == "-pi":
        return -math.pi
    try:
        return float(s)
    except ValueError:
        raise ValidationError(f"expected float, got {raw!r}", key=key) from None


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise ValidationError(f"expected int, got {raw!r}", key=key) from None


def _split(raw: str):
    return [x for x in (s.strip() for s in raw.split(",")) if x]


def parse_value(kind: str, raw: str, key: str):
    if kind == FLOAT:
        return _parse_float(raw, key)
    if kind == INT:
        return _parse_int(raw, key)
    if kind == STR:
        return raw.strip()
    if kind == OPT_FLOAT:
        return None if raw.strip().lower() in ("none", "") else _parse_float(raw, key)
    if kind == FLOATS:
        return tuple(_parse_float(x, key) for x in _split(raw))
    if kind == INTS:
        return tuple(_parse_int(x, key) for x in _split(raw))
    raise AssertionError(kind)


def format_value(kind: str, value) -> str:
    if value is None:
        return "none"
    if kind in (FLOAT, OPT_FLOAT):
        return repr(float(value))
    if kind == INT:
        return str(int(value))
    if kind == FLOATS:
        return ", ".join(repr(float(x)) for x in value)
    if kind == INTS:
        return ", ".join(str(int(x)) for x in value)
    return str(value)


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (B, G, L, N)
    return cp


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse config text; ``overrides`` are ``"Section.key=value"`` strings applied last."""
    cp = _new_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValidationError(f"override must look like Section.key=value, got {item!r}")
        path, raw = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        if not cp.has_section(section):
            if section not in SCHEMA:
                raise ValidationError("unknown section", key=section)
            cp.add_section(section)
        cp.set(section, key, raw)

    kwargs = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ValidationError("unknown section", key=section)
        values = {}
        for key, raw in cp.items(section):
            path = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ValidationError("unknown key", key=path)
            values[key] = parse_value(SCHEMA[section][key], raw, path)
        try:
            kwargs[_ATTRS[section]] = SECTIONS[section](**values)
        except ValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc), key=section) from None
    return RunConfig(**kwargs)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for section, attr in _ATTRS.items():
        obj = getattr(cfg, attr)
        lines.append(f"[{section}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {format_value(SCHEMA[section][f.name], getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path, overrides=()) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)
