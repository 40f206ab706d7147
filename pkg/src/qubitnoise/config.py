"""Pipeline configuration: nested dataclasses loaded from JSON.

Unknown keys are rejected at every level. ``PipelineConfig.to_dict`` is
the resolved config written next to every result, and
``config_hash`` is the SHA-256 of its canonical JSON form without the
operational keys (output directory, worker count), which cannot change
any number.
"""

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from typing import Optional

from .errors import SchemaError
from .io import load_json

OPERATIONAL_KEYS = ("out", "jobs")


@dataclass
class InputsConfig:
    traces_dir: Optional[str] = None
    psd_csv: Optional[str] = None
    participations_csv: Optional[str] = None
    t1_csv: Optional[str] = None


@dataclass
class TransductionConfig:
    #: "transmon" (parametric) or "curve" (tuning-curve CSV with flux_phi0, freq_hz)
    kind: str = "transmon"
    ej_sum_hz: float = 25e9
    ec_hz: float = 0.25e9
    asymmetry: float = 0.3
    flux_offset_phi0: float = 0.0
    curve_csv: Optional[str] = None
    flux_phi0: float = 0.25


@dataclass
class FitConfig:
    noise_floor_sigma: float = 3.0
    n_restarts: int = 5
    fit_tau0: bool = False
    freq_range_hz: Optional[list] = None
    pivot_hz: float = 1.0


@dataclass
class PSDConfig:
    amplitude: float = 5e-13
    pivot_freq_hz: float = 1.0
    alpha: float = 0.8
    white_floor: float = 0.0


@dataclass
class SynthesisConfig:
    psd: PSDConfig = field(default_factory=PSDConfig)
    n_pulses: list = field(default_factory=lambda: [1, 2, 5, 14, 48])
    tau_min_s: float = 1e-6
    tau_max_s: float = 1e-4
    n_tau: int = 30
    t1_s: float = 50e-6
    a0: float = 0.2
    a: float = 0.6
    noise_rms: float = 0.006
    tau0_s: float = 0.0
    acquisition_time_s: float = 1.0
    qubit_id: str = "synthetic"


@dataclass
class LossConfig:
    free: list = field(default_factory=lambda: ["ms", "bulk"])
    fit_other_rate: bool = False
    t1_rel_sigma: Optional[float] = None
    tan_ms_reference: float = 6e-3
    guide_f_q_hz: float = 5e9
    guide_p_bulk: float = 0.9
    guide_p_ms_min: float = 1e-5
    guide_p_ms_max: float = 3e-3
    guide_points: int = 61


@dataclass
class FilterConfig:
    n_pulses: int = 14
    tau_s: float = 1e-5
    omega_max_rad_s: Optional[float] = None
    n_points: int = 2001


@dataclass
class MonteCarloConfig:
    n_pulses: int = 14
    tau_s: float = 1e-5
    n_traj: int = 1000
    n_bootstrap: int = 400
    #: trajectory length; defaults to 20 tau
    acquisition_time_s: Optional[float] = None


@dataclass
class PipelineConfig:
    seed: int = 0
    out: str = "out"
    jobs: int = 1
    inputs: InputsConfig = field(default_factory=InputsConfig)
    transduction: TransductionConfig = field(default_factory=TransductionConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)

    @classmethod
    def from_dict(cls, data, source=None):
        return _build(cls, data, "", source)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(load_json(path), source=path)

    def to_dict(self):
        return dataclasses.asdict(self)

    def canonical_json(self):
        data = {k: v for k, v in self.to_dict().items() if k not in OPERATIONAL_KEYS}
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _check_type(value, hint, where, source):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return value
        hint = next(a for a in args if a is not type(None))
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where}: expected a number, got {value!r}", source)
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{where}: expected an integer, got {value!r}", source)
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise SchemaError(f"{where}: expected true/false, got {value!r}", source)
        return value
    if hint is str:
        if not isinstance(value, str):
            raise SchemaError(f"{where}: expected a string, got {value!r}", source)
        return value
    if hint is list:
        if not isinstance(value, list):
            raise SchemaError(f"{where}: expected a list, got {value!r}", source)
        return list(value)
    return value


def _build(cls, data, prefix, source):
    if not isinstance(data, dict):
        raise SchemaError(f"{prefix or 'config'}: expected an object", source)
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise SchemaError(f"unknown config key(s) {[prefix + k for k in unknown]}", source)
    kwargs = {}
    for key, value in data.items():
        hint = hints[key]
        where = prefix + key
        if dataclasses.is_dataclass(hint):
            kwargs[key] = _build(hint, value, where + ".", source)
        else:
            kwargs[key] = _check_type(value, hint, where, source)
    return cls(**kwargs)
