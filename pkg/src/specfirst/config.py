"""Runtime configuration: TOML file, environment overrides, flag overrides.

Precedence is flags > environment > file > defaults. The API key is never
stored in the file; it is read from the environment variable named by
``gateway.api_key_env``.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .clock import Clock, WallClock
from .engine import DEFAULT_BUDGET_SECONDS, SessionEngine
from .errors import ConfigurationError
from .gateway import Gateway, GenerationParams, LiveBackend, PromptLibrary, ReplayBackend
from .harness import DEFAULT_PROFILE, ExecutionLimits
from .telemetry import DEFAULT_DEBOUNCE_SECONDS, ArtifactStore


@dataclass(frozen=True)
class BankConfig:
    paths: tuple[str, ...] = ()
    exclude_ids: tuple[str, ...] = ()
    after: str | None = None
    warmup_size: int = 3
    evaluation_size: int = 3
    assignment_seed: int = 1234


@dataclass(frozen=True)
class SessionConfig:
    budget_seconds: float = DEFAULT_BUDGET_SECONDS
    debounce_seconds: float = DEFAULT_DEBOUNCE_SECONDS


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "replay"
    endpoint: str = "http://127.0.0.1:8000/v1"
    api_key_env: str = "SPECFIRST_API_KEY"
    model_id: str = "local-model"
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 2048
    fixtures_dir: str = "fixtures"
    prompts_dir: str | None = None


@dataclass(frozen=True)
class RunnerConfig:
    wall_timeout_seconds: float = 30.0
    memory_cap_mb: int = 512


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8756
    ui_dir: str | None = None


@dataclass(frozen=True)
class AppConfig:
    bank: BankConfig = field(default_factory=BankConfig)
    session: SessionConfig = field(default_factory=SessionConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    runner: RunnerConfig = field(default_factory=RunnerConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    data_dir: str = "data"
    export_dir: str = "bundles"
    base_dir: str = "."

    def resolve(self, path: str | None) -> str | None:
        if path is None:
            return None
        p = Path(path)
        return str(p if p.is_absolute() else Path(self.base_dir) / p)


def _section(data: dict, name: str) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigurationError(f"config section [{name}] must be a table")
    return section


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load the TOML config file; missing file or keys fall back to defaults."""
    data: dict = {}
    base_dir = "."
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        data = tomllib.loads(path.read_text(encoding="utf-8"))
        base_dir = str(path.parent)

    bank = _section(data, "bank")
    session = _section(data, "session")
    gateway = _section(data, "gateway")
    runner = _section(data, "runner")
    service = _section(data, "service")

    config = AppConfig(
        bank=BankConfig(
            paths=tuple(bank.get("paths", ())),
            exclude_ids=tuple(bank.get("exclude_ids", ())),
            after=bank.get("after"),
            warmup_size=int(bank.get("warmup_size", 3)),
            evaluation_size=int(bank.get("evaluation_size", 3)),
            assignment_seed=int(bank.get("assignment_seed", 1234)),
        ),
        session=SessionConfig(
            budget_seconds=float(session.get("budget_seconds", DEFAULT_BUDGET_SECONDS)),
            debounce_seconds=float(session.get("debounce_seconds", DEFAULT_DEBOUNCE_SECONDS)),
        ),
        gateway=GatewayConfig(
            backend=gateway.get("backend", "replay"),
            endpoint=gateway.get("endpoint", "http://127.0.0.1:8000/v1"),
            api_key_env=gateway.get("api_key_env", "SPECFIRST_API_KEY"),
            model_id=gateway.get("model_id", "local-model"),
            temperature=float(gateway.get("temperature", 0.0)),
            seed=int(gateway.get("seed", 0)),
            max_tokens=int(gateway.get("max_tokens", 2048)),
            fixtures_dir=gateway.get("fixtures_dir", "fixtures"),
            prompts_dir=gateway.get("prompts_dir"),
        ),
        runner=RunnerConfig(
            wall_timeout_seconds=float(runner.get("wall_timeout_seconds", 30.0)),
            memory_cap_mb=int(runner.get("memory_cap_mb", 512)),
        ),
        service=ServiceConfig(
            host=service.get("host", "127.0.0.1"),
            port=int(service.get("port", 8756)),
            ui_dir=service.get("ui_dir"),
        ),
        data_dir=data.get("data_dir", "data"),
        export_dir=data.get("export_dir", "bundles"),
        base_dir=base_dir,
    )
    if config.gateway.backend not in ("live", "replay"):
        raise ConfigurationError(f"gateway.backend must be 'live' or 'replay', got {config.gateway.backend!r}")
    return config


def apply_env_overrides(config: AppConfig, environ: dict[str, str] | None = None) -> AppConfig:
    env = environ if environ is not None else os.environ
    gateway = config.gateway
    if "SPECFIRST_BACKEND" in env:
        gateway = replace(gateway, backend=env["SPECFIRST_BACKEND"])
    if "SPECFIRST_ENDPOINT" in env:
        gateway = replace(gateway, endpoint=env["SPECFIRST_ENDPOINT"])
    if "SPECFIRST_MODEL" in env:
        gateway = replace(gateway, model_id=env["SPECFIRST_MODEL"])
    return replace(config, gateway=gateway)


def generation_params(config: AppConfig) -> GenerationParams:
    return GenerationParams(
        model_id=config.gateway.model_id,
        temperature=config.gateway.temperature,
        seed=config.gateway.seed,
        max_tokens=config.gateway.max_tokens,
    )


def build_gateway(config: AppConfig) -> Gateway:
    if config.gateway.backend == "replay":
        fixtures = config.resolve(config.gateway.fixtures_dir)
        return Gateway(ReplayBackend(fixtures))
    api_key = os.environ.get(config.gateway.api_key_env, "")
    return Gateway(LiveBackend(config.gateway.endpoint, api_key=api_key))


def build_engine(config: AppConfig, clock: Clock | None = None, gateway: Gateway | None = None) -> SessionEngine:
    store = ArtifactStore(Path(config.resolve(config.data_dir)) / "artifacts")
    prompts = PromptLibrary(config.resolve(config.gateway.prompts_dir))
    limits = ExecutionLimits(
        wall_timeout_seconds=config.runner.wall_timeout_seconds,
        memory_cap_bytes=config.runner.memory_cap_mb * 1024 * 1024,
    )
    return SessionEngine(
        gateway=gateway or build_gateway(config),
        prompts=prompts,
        params=generation_params(config),
        clock=clock or WallClock(),
        store=store,
        runner_profile=DEFAULT_PROFILE,
        limits=limits,
    )
