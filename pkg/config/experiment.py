"""
Experiment configuration files.

YAML documents whose sections mirror the library types. Numbers are taken
as given (SI or κ units); strings may carry a unit suffix which is resolved
here, so a parsed config only ever holds floats in rad/s, 1/s and s.
"""

import math
import re
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Tuple, Union

import numpy as np
import structlog
import yaml
from pydantic import (
    AliasChoices,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from core.backaction import WeightMode
from core.exceptions import ConfigError, ParameterError
from core.model import PulseSequence, SequenceKind, SpinEnvParams, SystemParams
from core.noise import SpectralDensity
from core.oracle import LineMode, OracleSettings
from core.spinmodel import EtaAverage, spin_spectral_density

logger = structlog.get_logger(__name__)

TWO_PI = 2.0 * math.pi
FREQUENCY_UNITS = {
    "rad/s": 1.0,
    "1/s": 1.0,
    "Hz": TWO_PI,
    "kHz": TWO_PI * 1e3,
    "MHz": TWO_PI * 1e6,
    "GHz": TWO_PI * 1e9,
}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)?\s*$")


def _quantity(value: Any, units: Dict[str, float], kind: str, other: Dict[str, float]) -> Any:
    if not isinstance(value, str):
        return value
    match = _QUANTITY.match(value)
    if match is None:
        raise ValueError(f"cannot read {value!r} as a {kind}")
    number, unit = float(match.group(1)), match.group(2)
    if unit is None:
        return number
    if unit in units:
        return number * units[unit]
    if unit in other:
        raise ValueError(f"unit {unit!r} is not a {kind} unit")
    raise ValueError(f"unknown unit {unit!r} (expected one of {', '.join(units)})")


def _frequency(value: Any) -> Any:
    return _quantity(value, FREQUENCY_UNITS, "frequency", TIME_UNITS)


def _time(value: Any) -> Any:
    return _quantity(value, TIME_UNITS, "time", FREQUENCY_UNITS)


Frequency = Annotated[float, BeforeValidator(_frequency)]
Duration = Annotated[float, BeforeValidator(_time)]


class Experiment(Enum):
    FID = "fid"
    CPMG = "cpmg"
    ESEEM = "eseem"
    TRANSMISSION = "transmission"
    SIGNAL = "signal"
    ORACLE_COMPARE = "oracle-compare"
    RECONSTRUCT = "reconstruct"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ParamsSection(_Section):
    qubit_splitting: Frequency = 0.0
    detuning: Frequency = 0.0
    coupling: Frequency = 0.0
    kappa_total: Frequency = Field(1.0, validation_alias=AliasChoices("kappa_total", "kappa"))
    kappa_in: Frequency = Field(0.0, validation_alias=AliasChoices("kappa_in", "kappa_1"))
    kappa_out: Optional[Frequency] = Field(
        None, validation_alias=AliasChoices("kappa_out", "kappa_2")
    )
    kappa_ext: Frequency = 0.0
    dephasing: Frequency = 0.0
    t2star: Duration

    def to_system_params(self) -> SystemParams:
        try:
            return SystemParams(**self.model_dump())
        except ValidationError as exc:
            raise ParameterError(
                "; ".join(err["msg"] for err in exc.errors()),
            ) from exc


class SequenceSection(_Section):
    kind: SequenceKind = SequenceKind.CPMG
    n_pulses: int = Field(1, ge=0)
    tau: Optional[Duration] = None
    total_time: Optional[Duration] = None
    pulse_times: Optional[List[Duration]] = None

    @model_validator(mode="after")
    def _complete(self) -> "SequenceSection":
        if self.kind in (SequenceKind.CPMG, SequenceKind.HAHN) and self.tau is None:
            raise ValueError(f"{self.kind.value} sequence needs tau")
        if self.kind is SequenceKind.FID and self.total_time is None:
            raise ValueError("fid sequence needs total_time")
        if self.kind is SequenceKind.CUSTOM and (self.pulse_times is None or self.total_time is None):
            raise ValueError("custom sequence needs pulse_times and total_time")
        return self

    def to_sequence(self) -> PulseSequence:
        if self.kind is SequenceKind.FID:
            return PulseSequence.fid(float(self.total_time))  # type: ignore[arg-type]
        if self.kind is SequenceKind.HAHN:
            return PulseSequence.hahn(float(self.tau))  # type: ignore[arg-type]
        if self.kind is SequenceKind.CPMG:
            return PulseSequence.cpmg(self.n_pulses, float(self.tau))  # type: ignore[arg-type]
        return PulseSequence.custom(self.pulse_times or [], float(self.total_time))  # type: ignore[arg-type]


class EnvironmentSection(_Section):
    hyperfine: Frequency
    field_x: Optional[Frequency] = None
    field_z: Optional[Frequency] = None
    field_x_tesla: Optional[float] = None
    field_z_tesla: Optional[float] = None
    gyromagnetic: float = -5.319e7
    polarization: float = Field(0.0, ge=-1.0, le=1.0)

    @model_validator(mode="after")
    def _one_field_form(self) -> "EnvironmentSection":
        angular = self.field_x is not None or self.field_z is not None
        tesla = self.field_x_tesla is not None or self.field_z_tesla is not None
        if angular and tesla:
            raise ValueError("give the field either as field_x/field_z or in tesla, not both")
        return self

    def to_env(self) -> SpinEnvParams:
        if self.field_x_tesla is not None or self.field_z_tesla is not None:
            return SpinEnvParams.from_tesla(
                self.hyperfine,
                self.field_x_tesla or 0.0,
                self.field_z_tesla or 0.0,
                gyromagnetic=self.gyromagnetic,
                polarization=self.polarization,
            )
        return SpinEnvParams(
            hyperfine=self.hyperfine,
            field_x=self.field_x or 0.0,
            field_z=self.field_z or 0.0,
            gyromagnetic=self.gyromagnetic,
            polarization=self.polarization,
        )


class SpectrumKind(Enum):
    ZERO = "zero"
    FILE = "file"
    FLAT = "flat"
    GAUSSIAN = "gaussian"
    LINES = "lines"
    SPIN = "spin"


class SpectrumSection(_Section):
    kind: SpectrumKind = SpectrumKind.ZERO
    file: Optional[str] = None
    level: float = 0.0
    cutoff: Optional[Frequency] = None
    variance: float = 0.0
    width: Optional[Frequency] = None
    lines: List[Tuple[Frequency, float]] = Field(default_factory=list)
    quantum_lines: List[Tuple[Frequency, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _complete(self) -> "SpectrumSection":
        if self.kind is SpectrumKind.FILE and not self.file:
            raise ValueError("file spectrum needs a file path")
        if self.kind is SpectrumKind.FLAT and self.cutoff is None:
            raise ValueError("flat spectrum needs a cutoff")
        if self.kind is SpectrumKind.GAUSSIAN and self.width is None:
            raise ValueError("gaussian spectrum needs a width")
        return self

    def to_spectrum(self, base_dir: Optional[Path] = None, env: Optional[SpinEnvParams] = None) -> SpectralDensity:
        if self.kind is SpectrumKind.FILE:
            path = Path(self.file or "")
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return SpectralDensity.from_file(path)
        if self.kind is SpectrumKind.FLAT:
            return SpectralDensity.flat(self.level, float(self.cutoff))  # type: ignore[arg-type]
        if self.kind is SpectrumKind.GAUSSIAN:
            return SpectralDensity.gaussian(self.variance, float(self.width))  # type: ignore[arg-type]
        if self.kind is SpectrumKind.LINES:
            return SpectralDensity.from_lines(lines=self.lines, quantum_lines=self.quantum_lines)
        if self.kind is SpectrumKind.SPIN:
            if env is None:
                raise ParameterError("spin spectrum needs an environment section")
            return spin_spectral_density(env)
        return SpectralDensity.zero()


class TimeGrid(_Section):
    start: Duration = 0.0
    stop: Duration
    points: int = Field(101, ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class FrequencyGrid(_Section):
    """Offsets from ω_c (or from Δ for qubit sweeps)"""

    start: Frequency
    stop: Frequency
    points: int = Field(2001, ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class GridsSection(_Section):
    time: Optional[TimeGrid] = None
    tau: Optional[TimeGrid] = None
    frequency: Optional[FrequencyGrid] = None
    t2star_values: List[Duration] = Field(default_factory=list)


class QuadratureSection(_Section):
    order: int = Field(200, ge=2)
    rtol: float = Field(1e-9, gt=0.0)
    eta_average: EtaAverage = EtaAverage.RESOLVENT


class OracleSection(_Section):
    order: int = Field(8, ge=2)
    line_mode: LineMode = LineMode.MARKOVIAN
    n_modes: int = Field(512, ge=2)
    band_half_width: float = Field(20.0, gt=0.0)
    chunk_size: Optional[int] = Field(None, ge=1)
    revival_n: Optional[int] = Field(None, ge=1)
    noise_realizations: int = Field(0, ge=0)
    noise_step: Optional[Duration] = None

    def to_settings(self, n_jobs: int = 1) -> OracleSettings:
        return OracleSettings(
            order=self.order,
            line_mode=self.line_mode,
            n_modes=self.n_modes,
            band_half_width=self.band_half_width,
            chunk_size=self.chunk_size,
            n_jobs=n_jobs,
        )


class SignalSection(_Section):
    t_on: Optional[Duration] = None
    sigma_x0: float = 1.0
    cross_terms: bool = False
    n_echoes: Optional[int] = Field(None, ge=0)
    weights: WeightMode = WeightMode.EMISSION


class ReconstructSection(_Section):
    weights: WeightMode = WeightMode.WINDOWED
    start: Frequency = 0.0
    threshold: float = Field(1e-6, gt=0.0)
    sigma_x0: float = 1.0


_REQUIRED = {
    Experiment.FID: ("sequence",),
    Experiment.CPMG: ("sequence",),
    Experiment.ESEEM: ("environment", "grids.tau"),
    Experiment.TRANSMISSION: ("environment",),
    Experiment.SIGNAL: ("sequence",),
    Experiment.ORACLE_COMPARE: ("sequence",),
    Experiment.RECONSTRUCT: ("sequence",),
}


class ExperimentConfig(_Section):
    experiment: Experiment
    seed: int = 0
    output_dir: str = "runs"
    params: ParamsSection
    sequence: Optional[SequenceSection] = None
    environment: Optional[EnvironmentSection] = None
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    grids: GridsSection = Field(default_factory=GridsSection)
    quadrature: QuadratureSection = Field(default_factory=QuadratureSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    signal: SignalSection = Field(default_factory=SignalSection)
    reconstruct: ReconstructSection = Field(default_factory=ReconstructSection)

    @model_validator(mode="after")
    def _sections_for_experiment(self) -> "ExperimentConfig":
        missing = []
        for path in _REQUIRED[self.experiment]:
            node: Any = self
            for part in path.split("."):
                node = getattr(node, part, None)
            if node is None:
                missing.append(path)
        if missing:
            raise ValueError(f"{self.experiment.value} needs: {', '.join(missing)}")
        if self.experiment is Experiment.RECONSTRUCT and self.sequence is not None:
            if self.sequence.kind is not SequenceKind.CPMG:
                raise ValueError("reconstruct needs a cpmg sequence")
        return self

    def system_params(self) -> SystemParams:
        return self.params.to_system_params()

    def pulse_sequence(self) -> PulseSequence:
        if self.sequence is None:
            raise ParameterError("config has no sequence section")
        return self.sequence.to_sequence()

    def spin_env(self) -> SpinEnvParams:
        if self.environment is None:
            raise ParameterError("config has no environment section")
        return self.environment.to_env()

    def noise_spectrum(self, base_dir: Optional[Path] = None) -> SpectralDensity:
        env = self.environment.to_env() if self.environment is not None else None
        return self.spectrum.to_spectrum(base_dir, env)


LinePath = Tuple[Union[str, int], ...]


def _node_lines(node: yaml.Node, path: LinePath, out: Dict[LinePath, int]) -> None:
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = (path + (str(key_node.value),))
            out[key] = key_node.start_mark.line + 1
            _node_lines(value_node, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _node_lines(item, path + (i,), out)


def _line_for(loc: LinePath, lines: Dict[LinePath, int]) -> Optional[int]:
    for cut in range(len(loc), -1, -1):
        found = lines.get(tuple(loc[:cut]))
        if found is not None:
            return found
    return None


def _format_loc(loc: LinePath) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(text: str, base_dir: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    Validate a YAML experiment config

    Raises:
        ConfigError: with one (line, message) entry per problem
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("config is not valid YAML", issues=[(line, str(exc))]) from exc
    if not isinstance(data, dict) or root is None:
        raise ConfigError("config must be a mapping of sections", issues=[(1, "expected key: value pairs")])
    lines: Dict[LinePath, int] = {}
    _node_lines(root, (), lines)

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        issues: List[Tuple[Optional[int], str]] = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            if err["type"] == "extra_forbidden":
                message = f"{_format_loc(loc)}: unknown key"
            elif err["type"] == "missing":
                message = f"{_format_loc(loc)}: missing required key"
            else:
                message = f"{_format_loc(loc)}: {err['msg']}"
            issues.append((_line_for(loc, lines), message))
        raise ConfigError("invalid experiment config", issues=issues) from exc

    issues = []
    try:
        config.system_params()
    except ParameterError as exc:
        issues.append((_line_for(("params",), lines), f"params: {exc.message}"))
    if config.spectrum.kind is SpectrumKind.FILE:
        path = Path(config.spectrum.file or "")
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            issues.append((_line_for(("spectrum", "file"), lines), f"spectrum.file: {path} does not exist"))
    if issues:
        raise ConfigError("invalid experiment config", issues=issues)
    logger.debug("config_parsed", experiment=config.experiment.value)
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("cannot read config", issues=[(None, f"{source}: {exc.strerror}")]) from exc
    return parse_config(text, base_dir=source.parent)


def serialize_config(config: ExperimentConfig) -> str:
    """YAML with every quantity resolved to a plain float"""
    data = config.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)
