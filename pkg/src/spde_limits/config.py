"""
Declarative run configuration.

A run is described by one flat JSON document: the command-independent keys
(grid size, horizon, step, seed, output directory) plus one block per
subcommand. Every block parses into a frozen dataclass, rejects unknown keys
and validates physical parameters before anything is computed, and
serializes back with ``to_dict`` so a manifest fully determines a rerun.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, TypeVar, Union

import numpy as np

from .errors import ConfigurationError
from .models import Model, ModelSpec, Mollifier, SigmaKind, SigmaSchedule, check_eps
from .solver import Scheme
from .spectral import FourierGrid, SpectralField, forward, from_function
from .trajectory import STEP_TOLERANCE, uniform_steps

logger = logging.getLogger(__name__)

AUTO = "auto"
STUDY_MODES = ("convergence", "theorem", "regimes", "wick")
FIELD_NAMES = ("u_eps", "z", "v", "limit", "error")
DEFAULT_AMPLITUDES = (0.2, 0.1)

CZero = Union[float, str]
E = TypeVar("E", bound=Enum)


def _reject_unknown(
    data: Mapping[str, Any], allowed: Sequence[str], where: str
) -> None:
    if not isinstance(data, Mapping):
        raise ConfigurationError(
            f"{where} must be an object, got {type(data).__name__}"
        )
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {', '.join(unknown)}")


def _require(data: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise ConfigurationError(f"missing required key {key!r} in {where}")
    return data[key]


def _enum(cls: type[E], value: Any, key: str) -> E:
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(str(member.value) for member in cls)
        raise ConfigurationError(f"{key} must be one of {choices}, got {value!r}")


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigurationError(f"{key} must be finite, got {value!r}")
    return float(value)


def _integer(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{key} must be an integer, got {value!r}")
    return value


def _numbers(value: Any, key: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigurationError(f"{key} must be a non-empty list")
    return tuple(_number(item, key) for item in value)


def parse_c_zero(value: Any, key: str = "c_zero") -> CZero:
    if value == AUTO:
        return AUTO
    c_zero = _number(value, key)
    if c_zero < 0:
        raise ConfigurationError(f"{key} must be >= 0 or {AUTO!r}, got {value}")
    return c_zero


def parse_schedule(
    data: Mapping[str, Any], where: str = "sigma_schedule"
) -> SigmaSchedule:
    _reject_unknown(data, ("kind", "amplitude", "exponent"), where)
    kind = _enum(SigmaKind, _require(data, "kind", where), f"{where}.kind")
    return SigmaSchedule(
        kind,
        _number(_require(data, "amplitude", where), f"{where}.amplitude"),
        _number(data.get("exponent", 0.0), f"{where}.exponent"),
    )


@dataclass(frozen=True)
class InitialData:
    """
    Descriptor of the shared initial condition u(0) = u_ε(0).

    ``cosines`` builds Σ_i a_i cos((i+1)·x_{i mod 2 + 1}), so the default
    amplitudes give 0.2cos(x₁) + 0.1cos(2x₂); ``constant`` is the flat field
    and ``file`` reads a stored field dump.
    """

    kind: str = "cosines"
    amplitudes: tuple[float, ...] = DEFAULT_AMPLITUDES
    value: float = 0.0
    path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("cosines", "constant", "file"):
            raise ConfigurationError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigurationError("initial data of kind 'file' needs a path")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> InitialData:
        _reject_unknown(data, ("kind", "amplitudes", "value", "path"), "initial")
        kind = data.get("kind", "cosines")
        amplitudes = (
            _numbers(data["amplitudes"], "initial.amplitudes")
            if "amplitudes" in data
            else DEFAULT_AMPLITUDES
        )
        value = _number(data.get("value", 0.0), "initial.value")
        path = data.get("path")
        return cls(kind, amplitudes, value, None if path is None else str(path))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "cosines":
            return {"kind": self.kind, "amplitudes": list(self.amplitudes)}
        if self.kind == "constant":
            return {"kind": self.kind, "value": self.value}
        return {"kind": self.kind, "path": self.path}

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def build(self, grid: FourierGrid) -> SpectralField:
        """Spectral coefficients of the initial field on ``grid``."""
        if self.kind == "constant":
            return SpectralField.constant(grid, self.value)
        if self.kind == "file":
            from .io import read_field

            return forward(read_field(Path(str(self.path)), grid))

        def cosines(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
            total = np.zeros_like(x1)
            for i, amplitude in enumerate(self.amplitudes):
                axis = x1 if i % 2 == 0 else x2
                total = total + amplitude * np.cos((i + 1) * axis)
            return total

        return from_function(grid, cosines)


def check_auto_c_zero(schedule: SigmaSchedule, c_zero: CZero, where: str) -> None:
    """Reject c_zero 'auto' for schedules whose C₀ diverges."""
    if c_zero == AUTO and schedule.regime == "divergent":
        raise ConfigurationError(
            f"{where}: c_zero 'auto' is undefined for {schedule.kind.value} "
            "noise, whose C0 diverges; give c_zero explicitly"
        )


def _check_eps_values(model: Model, values: Sequence[float], key: str) -> None:
    for eps in values:
        try:
            check_eps(model, eps)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{key}: {exc}") from exc


@dataclass(frozen=True)
class StudyConfig:
    """Everything a Monte Carlo study needs, resolved from a run config."""

    model: Model
    n: int
    T: float
    dt: float
    eps_grid: tuple[float, ...]
    schedule: SigmaSchedule
    samples: int
    master_seed: int
    gamma: float = 1.0
    big_k: Optional[float] = None
    p: float = 4.0
    initial: InitialData = field(default_factory=InitialData)
    mollifier: Mollifier = Mollifier.NONE
    c_zero: CZero = AUTO
    include_zero_mode: bool = True
    scheme: Scheme = Scheme.IMEX
    save_every: int = 1
    schedules: tuple[SigmaSchedule, ...] = ()

    def __post_init__(self) -> None:
        FourierGrid(self.n)
        uniform_steps(self.T, self.dt)
        if not self.eps_grid:
            raise ConfigurationError("eps_grid is empty")
        _check_eps_values(self.model, self.eps_grid, "eps_grid")
        if self.samples < 1:
            raise ConfigurationError(f"samples must be >= 1, got {self.samples}")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.big_k is not None and not self.big_k > 0:
            raise ConfigurationError(f"big_k must be positive, got {self.big_k}")
        if self.p < 1:
            raise ConfigurationError(f"time exponent p must be >= 1, got {self.p}")
        if self.steps % self.save_every:
            raise ConfigurationError(
                f"save_every={self.save_every} does not divide {self.steps} steps"
            )

    @property
    def steps(self) -> int:
        return uniform_steps(self.T, self.dt)

    def spec(
        self,
        eps: float,
        c_zero: Optional[float] = None,
        schedule: Optional[SigmaSchedule] = None,
    ) -> ModelSpec:
        return ModelSpec.from_schedule(
            self.model,
            eps,
            schedule or self.schedule,
            mollifier=self.mollifier,
            c_zero=c_zero,
            include_zero_mode=self.include_zero_mode,
        )


@dataclass(frozen=True)
class SimulateBlock:
    """The ``simulate`` block: one coupled solve."""

    model: Model
    eps: float
    sigma_schedule: SigmaSchedule
    mollifier: Mollifier = Mollifier.NONE
    c_zero: CZero = AUTO
    include_zero_mode: bool = True
    initial: InitialData = field(default_factory=InitialData)
    sample: int = 0
    save_every: int = 1
    snapshots: tuple[float, ...] = ()
    dump_fields: tuple[str, ...] = ("u_eps",)

    KEYS = (
        "model",
        "eps",
        "sigma_schedule",
        "mollifier",
        "c_zero",
        "include_zero_mode",
        "initial",
        "sample",
        "save_every",
        "snapshots",
        "dump_fields",
    )

    def __post_init__(self) -> None:
        _check_eps_values(self.model, (self.eps,), "simulate.eps")
        check_auto_c_zero(self.sigma_schedule, self.c_zero, "simulate")
        unknown = sorted(set(self.dump_fields) - set(FIELD_NAMES))
        if unknown:
            raise ConfigurationError(f"unknown dump_fields: {', '.join(unknown)}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimulateBlock:
        where = "simulate"
        _reject_unknown(data, cls.KEYS, where)
        return cls(
            model=_enum(Model, _require(data, "model", where), "simulate.model"),
            eps=_number(_require(data, "eps", where), "simulate.eps"),
            sigma_schedule=parse_schedule(
                _require(data, "sigma_schedule", where), "simulate.sigma_schedule"
            ),
            mollifier=_enum(Mollifier, data.get("mollifier", "none"), "mollifier"),
            c_zero=parse_c_zero(data.get("c_zero", AUTO)),
            include_zero_mode=bool(data.get("include_zero_mode", True)),
            initial=InitialData.from_dict(data.get("initial", {})),
            sample=_integer(data.get("sample", 0), "simulate.sample"),
            save_every=_integer(data.get("save_every", 1), "simulate.save_every"),
            snapshots=tuple(
                _number(t, "simulate.snapshots") for t in data.get("snapshots", [])
            ),
            dump_fields=tuple(str(f) for f in data.get("dump_fields", ["u_eps"])),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value,
            "eps": self.eps,
            "sigma_schedule": self.sigma_schedule.to_dict(),
            "mollifier": self.mollifier.value,
            "c_zero": self.c_zero,
            "include_zero_mode": self.include_zero_mode,
            "initial": self.initial.to_dict(),
            "sample": self.sample,
            "save_every": self.save_every,
            "snapshots": list(self.snapshots),
            "dump_fields": list(self.dump_fields),
        }


@dataclass(frozen=True)
class StudyBlock:
    """The ``study`` block: a Monte Carlo study selected by ``mode``."""

    mode: str
    model: Model
    eps_grid: tuple[float, ...]
    samples: int
    sigma_schedule: Optional[SigmaSchedule] = None
    schedules: tuple[SigmaSchedule, ...] = ()
    mollifier: Mollifier = Mollifier.NONE
    c_zero: CZero = AUTO
    include_zero_mode: bool = True
    gamma: float = 1.0
    big_k: Optional[float] = None
    p: float = 4.0
    initial: InitialData = field(default_factory=InitialData)
    save_every: int = 1

    KEYS = (
        "mode",
        "model",
        "eps_grid",
        "samples",
        "sigma_schedule",
        "schedules",
        "mollifier",
        "c_zero",
        "include_zero_mode",
        "gamma",
        "big_k",
        "p",
        "initial",
        "save_every",
    )

    def __post_init__(self) -> None:
        if self.mode not in STUDY_MODES:
            raise ConfigurationError(
                f"study.mode must be one of {', '.join(STUDY_MODES)}, "
                f"got {self.mode!r}"
            )
        if self.mode == "regimes":
            if not self.schedules:
                raise ConfigurationError("study mode 'regimes' needs 'schedules'")
        elif self.sigma_schedule is None:
            raise ConfigurationError(
                f"study mode {self.mode!r} needs 'sigma_schedule'"
            )
        else:
            check_auto_c_zero(self.sigma_schedule, self.c_zero, "study")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> StudyBlock:
        where = "study"
        _reject_unknown(data, cls.KEYS, where)
        schedule = data.get("sigma_schedule")
        big_k = data.get("big_k")
        return cls(
            mode=str(data.get("mode", "convergence")),
            model=_enum(Model, _require(data, "model", where), "study.model"),
            eps_grid=_numbers(_require(data, "eps_grid", where), "study.eps_grid"),
            samples=_integer(_require(data, "samples", where), "study.samples"),
            sigma_schedule=None if schedule is None else parse_schedule(schedule),
            schedules=tuple(
                parse_schedule(item, "study.schedules")
                for item in data.get("schedules", [])
            ),
            mollifier=_enum(Mollifier, data.get("mollifier", "none"), "mollifier"),
            c_zero=parse_c_zero(data.get("c_zero", AUTO)),
            include_zero_mode=bool(data.get("include_zero_mode", True)),
            gamma=_number(data.get("gamma", 1.0), "study.gamma"),
            big_k=None if big_k is None else _number(big_k, "study.big_k"),
            p=_number(data.get("p", 4.0), "study.p"),
            initial=InitialData.from_dict(data.get("initial", {})),
            save_every=_integer(data.get("save_every", 1), "study.save_every"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "model": self.model.value,
            "eps_grid": list(self.eps_grid),
            "samples": self.samples,
            "sigma_schedule": (
                None if self.sigma_schedule is None else self.sigma_schedule.to_dict()
            ),
            "schedules": [s.to_dict() for s in self.schedules],
            "mollifier": self.mollifier.value,
            "c_zero": self.c_zero,
            "include_zero_mode": self.include_zero_mode,
            "gamma": self.gamma,
            "big_k": self.big_k,
            "p": self.p,
            "initial": self.initial.to_dict(),
            "save_every": self.save_every,
        }


@dataclass(frozen=True)
class RenormBlock:
    """The ``renorm`` block: C_ε tables, the C₀ estimate and series laws."""

    model: Model
    eps_grid: tuple[float, ...]
    sigma_schedule: SigmaSchedule
    mollifier: Mollifier = Mollifier.NONE
    cutoffs: tuple[int, ...] = (1, 2, 4, 8)
    delta: tuple[float, ...] = (0.0,)
    rel_tol: float = 1e-4
    wick_cutoff: int = 0

    KEYS = (
        "model",
        "eps_grid",
        "sigma_schedule",
        "mollifier",
        "cutoffs",
        "delta",
        "rel_tol",
        "wick_cutoff",
    )

    def __post_init__(self) -> None:
        _check_eps_values(self.model, self.eps_grid, "renorm.eps_grid")
        if any(k < 1 for k in self.cutoffs):
            raise ConfigurationError(f"cutoffs must be >= 1, got {self.cutoffs}")
        if any(d < 0 for d in self.delta):
            raise ConfigurationError(f"delta must be >= 0, got {self.delta}")
        if not 0 < self.rel_tol < 1:
            raise ConfigurationError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if self.wick_cutoff < 0:
            raise ConfigurationError("wick_cutoff must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RenormBlock:
        where = "renorm"
        _reject_unknown(data, cls.KEYS, where)
        return cls(
            model=_enum(Model, _require(data, "model", where), "renorm.model"),
            eps_grid=_numbers(_require(data, "eps_grid", where), "renorm.eps_grid"),
            sigma_schedule=parse_schedule(
                _require(data, "sigma_schedule", where), "renorm.sigma_schedule"
            ),
            mollifier=_enum(Mollifier, data.get("mollifier", "none"), "mollifier"),
            cutoffs=tuple(
                _integer(k, "renorm.cutoffs") for k in data.get("cutoffs", [1, 2, 4, 8])
            ),
            delta=tuple(_number(d, "renorm.delta") for d in data.get("delta", [0.0])),
            rel_tol=_number(data.get("rel_tol", 1e-4), "renorm.rel_tol"),
            wick_cutoff=_integer(data.get("wick_cutoff", 0), "renorm.wick_cutoff"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value,
            "eps_grid": list(self.eps_grid),
            "sigma_schedule": self.sigma_schedule.to_dict(),
            "mollifier": self.mollifier.value,
            "cutoffs": list(self.cutoffs),
            "delta": list(self.delta),
            "rel_tol": self.rel_tol,
            "wick_cutoff": self.wick_cutoff,
        }


@dataclass(frozen=True)
class RunConfig:
    """A whole run configuration file."""

    n: int = 64
    T: float = 0.5
    dt: float = 1e-3
    master_seed: int = 0
    output_dir: Optional[str] = None
    scheme: Scheme = Scheme.IMEX
    workers: Optional[int] = None
    simulate: Optional[SimulateBlock] = None
    study: Optional[StudyBlock] = None
    renorm: Optional[RenormBlock] = None

    KEYS = (
        "n",
        "T",
        "dt",
        "master_seed",
        "output_dir",
        "scheme",
        "workers",
        "simulate",
        "study",
        "renorm",
    )

    def __post_init__(self) -> None:
        FourierGrid(self.n)
        steps = uniform_steps(self.T, self.dt)
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.simulate is not None:
            self._check_snapshots(self.simulate, steps)
        if self.study is not None and steps % self.study.save_every:
            raise ConfigurationError(
                f"study.save_every={self.study.save_every} does not divide "
                f"{steps} steps"
            )

    def _check_snapshots(self, block: SimulateBlock, steps: int) -> None:
        if block.save_every < 1 or steps % block.save_every:
            raise ConfigurationError(
                f"simulate.save_every={block.save_every} does not divide "
                f"{steps} steps"
            )
        stride = self.dt * block.save_every
        for t in block.snapshots:
            if t < -STEP_TOLERANCE * self.T or t > self.T * (1 + STEP_TOLERANCE):
                raise ConfigurationError(
                    f"snapshot time {t} is outside [0, T={self.T}]"
                )
            if abs(round(t / stride) * stride - t) > STEP_TOLERANCE * self.T:
                raise ConfigurationError(
                    f"snapshot time {t} is not a stored time (stride {stride:g})"
                )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunConfig:
        _reject_unknown(data, cls.KEYS, "config")
        workers = data.get("workers")
        output_dir = data.get("output_dir")
        blocks = {
            "simulate": SimulateBlock,
            "study": StudyBlock,
            "renorm": RenormBlock,
        }
        parsed = {
            name: block.from_dict(data[name])  # type: ignore[attr-defined]
            for name, block in blocks.items()
            if data.get(name) is not None
        }
        return cls(
            n=_integer(data.get("n", 64), "n"),
            T=_number(data.get("T", 0.5), "T"),
            dt=_number(data.get("dt", 1e-3), "dt"),
            master_seed=_integer(data.get("master_seed", 0), "master_seed"),
            output_dir=None if output_dir is None else str(output_dir),
            scheme=_enum(Scheme, data.get("scheme", "imex"), "scheme"),
            workers=None if workers is None else _integer(workers, "workers"),
            **parsed,
        )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "n": self.n,
            "T": self.T,
            "dt": self.dt,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "scheme": self.scheme.value,
            "workers": self.workers,
        }
        for name in ("simulate", "study", "renorm"):
            block = getattr(self, name)
            if block is not None:
                data[name] = block.to_dict()
        return data

    def block(self, name: str) -> Any:
        """The named command block, which must be present."""
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(f"config has no {name!r} block")
        return value

    def study_config(self) -> StudyConfig:
        block: StudyBlock = self.block("study")
        schedule = block.sigma_schedule or block.schedules[0]
        return StudyConfig(
            model=block.model,
            n=self.n,
            T=self.T,
            dt=self.dt,
            eps_grid=block.eps_grid,
            schedule=schedule,
            samples=block.samples,
            master_seed=self.master_seed,
            gamma=block.gamma,
            big_k=block.big_k,
            p=block.p,
            initial=block.initial,
            mollifier=block.mollifier,
            c_zero=block.c_zero,
            include_zero_mode=block.include_zero_mode,
            scheme=self.scheme,
            save_every=block.save_every,
            schedules=block.schedules,
        )


def load_config(path: Path) -> RunConfig:
    """
    Read and validate a run configuration file.

    Raises:
        ConfigurationError: If the file is missing, not JSON, or invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    config = RunConfig.from_dict(data)
    logger.debug(f"Loaded config from {path}")
    return config


__all__ = [
    "AUTO",
    "InitialData",
    "RenormBlock",
    "RunConfig",
    "SimulateBlock",
    "StudyBlock",
    "StudyConfig",
    "load_config",
    "parse_c_zero",
    "parse_schedule",
]
