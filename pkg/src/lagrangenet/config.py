"""Run configuration: one JSON document per run, unknown keys rejected."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .core import ActivationKind, UsageError, build_mlp
from .data import GENERATORS, Dataset, load_csv
from .lagrangian import LossKind
from .optimizer import SaddleConfig, config_dict


class ConfigError(UsageError):
    pass


@dataclass
class NetworkSpec:
    layers: list = field(default_factory=lambda: [2, 4, 1])
    activation: str = "tanh"
    output_activation: str = "identity"


@dataclass
class DataSpec:
    generator: str | None = "xor"
    params: dict = field(default_factory=dict)
    csv: str | None = None


@dataclass
class VerifySpec:
    n_nets: int = 100
    seed: int = 0
    rtol: float = 1e-10


@dataclass
class GradCheckSpec:
    n_states: int = 50
    seed: int = 0
    h: float = 1e-5
    rtol: float = 1e-6


@dataclass
class RunConfig:
    network: NetworkSpec = field(default_factory=NetworkSpec)
    loss: str = "squared_error"
    saddle: SaddleConfig = field(default_factory=SaddleConfig)
    data: DataSpec = field(default_factory=DataSpec)
    eps: float = 0.0
    tau: float = 1e-3
    out_dir: str = "runs"
    verify: VerifySpec = field(default_factory=VerifySpec)
    grad_check: GradCheckSpec = field(default_factory=GradCheckSpec)

    def build_network(self):
        return build_mlp(self.network.layers, self.network.activation, self.network.output_activation)

    def build_dataset(self) -> Dataset:
        if self.data.csv is not None:
            return load_csv(self.data.csv)
        return GENERATORS[self.data.generator](**self.data.params)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["saddle"] = config_dict(self.saddle)
        del d["saddle"]["eps"]
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (not the output location)."""
        d = self.to_dict()
        del d["out_dir"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def run_dir(self) -> Path:
        return Path(self.out_dir) / f"{self.digest()}-seed{self.saddle.seed}"


def _section(cls, raw, path: str, skip=()):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be an object")
    names = {f.name for f in fields(cls)} - set(skip)
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key {path}.{unknown[0]}")
    return raw


def _positive_int(v, path):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{path} must be a positive integer, got {v!r}")


def _nonneg(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= 0:
        raise ConfigError(f"{path} must be a nonnegative real, got {v!r}")


def parse_config(raw: dict) -> RunConfig:
    _section(RunConfig, raw, "config")
    net = NetworkSpec(**_section(NetworkSpec, raw.get("network", {}), "network"))
    if not isinstance(net.layers, list) or len(net.layers) < 2:
        raise ConfigError("network.layers must list at least two layer sizes")
    for k, s in enumerate(net.layers):
        _positive_int(s, f"network.layers[{k}]")
    for name in ("activation", "output_activation"):
        try:
            ActivationKind(getattr(net, name))
        except ValueError:
            raise ConfigError(f"network.{name}: unknown activation {getattr(net, name)!r}") from None

    loss = raw.get("loss", "squared_error")
    try:
        LossKind(loss)
    except ValueError:
        raise ConfigError(f"loss: unknown loss kind {loss!r}") from None

    eps = raw.get("eps", 0.0)
    _nonneg(eps, "eps")
    saddle_raw = _section(SaddleConfig, raw.get("saddle", {}), "saddle", skip=("eps",))
    try:
        saddle = SaddleConfig(**saddle_raw, eps=float(eps))
    except UsageError as err:
        raise ConfigError(f"saddle.{err}") from None
    except ValueError as err:
        raise ConfigError(f"saddle.method: {err}") from None

    data = DataSpec(**_section(DataSpec, raw.get("data", {}), "data"))
    if data.csv is not None:
        data.generator = None
    elif data.generator not in GENERATORS:
        raise ConfigError(f"data.generator: unknown generator {data.generator!r}")

    tau = raw.get("tau", 1e-3)
    _nonneg(tau, "tau")

    verify = VerifySpec(**_section(VerifySpec, raw.get("verify", {}), "verify"))
    _positive_int(verify.n_nets, "verify.n_nets")
    _nonneg(verify.rtol, "verify.rtol")
    grad = GradCheckSpec(**_section(GradCheckSpec, raw.get("grad_check", {}), "grad_check"))
    _positive_int(grad.n_states, "grad_check.n_states")
    _nonneg(grad.rtol, "grad_check.rtol")
    if not (isinstance(grad.h, (int, float)) and grad.h > 0):
        raise ConfigError(f"grad_check.h must be a positive real, got {grad.h!r}")

    out_dir = raw.get("out_dir", "runs")
    if not isinstance(out_dir, str):
        raise ConfigError("out_dir must be a string")
    return RunConfig(net, loss, saddle, data, float(eps), float(tau), out_dir, verify, grad)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
    return parse_config(raw)
