"""Scenario and run configuration, unit conversions, and flat TOML parsing."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields

try:  # pragma: no cover - exercised on 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration."""


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def rate_to_sinr(rate_bps_hz):
    """SINR threshold giving ``log2(1 + gamma) = rate``."""
    return 2.0 ** rate_bps_hz - 1.0


@dataclass
class ScenarioConfig:
    """Physical and algorithmic parameters of one simulated deployment.

    Angles are radians, distances meters, powers dBm. ``p_block`` overrides the
    distance law ``max(0, 1 - exp(-a_out d + b_out))`` when set.
    """

    n_tx: int = 8
    n_ris: int = 1
    elems_per_ris: int = 64
    n_users: int = 1
    p_max_dbm: float = 30.0
    noise_dbm: float = -94.0
    fc_ghz: float = 28.0
    target_rate_bps_hz: float = 0.5
    p_block: float | None = None
    a_out: float = 0.0
    b_out: float = 0.0
    n_clusters: int = 5
    n_subpaths: int = 20
    angular_spread: float = math.radians(5.0)
    kappa_direct: float = 0.0
    kappa_ris: float = math.inf
    alpha_nlos: float = 3.5
    shadow_nlos_db: float = 8.2
    alpha_los: float = 2.0
    shadow_los_db: float = 4.0
    ris_radius: list = field(default_factory=lambda: [50.0, 50.0])
    ris_angle: list = field(default_factory=lambda: [0.0, math.pi / 6])
    user_radius: list = field(default_factory=lambda: [50.0, 80.0])
    user_angle: list = field(default_factory=lambda: [0.0, math.pi / 6])
    bs_rows: int | None = None
    ris_rows: int | None = None
    theta: float | None = None
    mu: float | None = None
    tau: float = 1.0
    csi_angle_error: float = 0.01

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n_tx", "elems_per_ris", "n_users", "n_clusters", "n_subpaths"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.n_ris < 0:
            raise ConfigError("n_ris must be >= 0")
        if self.n_ris > len(self.ris_radius) or len(self.ris_radius) != len(self.ris_angle):
            raise ConfigError("ris_radius/ris_angle must list one position per RIS")
        for name in ("p_max_dbm", "noise_dbm", "fc_ghz", "target_rate_bps_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.fc_ghz <= 0:
            raise ConfigError("fc_ghz must be positive")
        if self.target_rate_bps_hz <= 0:
            raise ConfigError("target_rate_bps_hz must be positive (gamma > 0)")
        if self.p_block is not None and not 0.0 <= self.p_block <= 1.0:
            raise ConfigError("p_block must lie in [0, 1]")
        if self.a_out < 0:
            raise ConfigError("a_out must be >= 0")
        if self.kappa_direct < 0 or self.kappa_ris < 0:
            raise ConfigError("Rician factors must be >= 0")
        if self.angular_spread < 0:
            raise ConfigError("angular_spread must be >= 0")
        for name in ("theta", "mu"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if len(self.user_radius) != 2 or len(self.user_angle) != 2:
            raise ConfigError("user_radius/user_angle are [low, high] ranges")
        if min(self.user_radius) <= 0:
            raise ConfigError("user_radius must be positive")
        for name in ("bs_rows", "ris_rows"):
            rows = getattr(self, name)
            if rows is None:
                continue
            total = self.n_tx if name == "bs_rows" else self.elems_per_ris
            if rows < 1 or total % rows:
                raise ConfigError(f"{name}={rows} does not divide {total}")

    @property
    def gamma(self):
        return rate_to_sinr(self.target_rate_bps_hz)

    @property
    def p_max(self):
        return dbm_to_watts(self.p_max_dbm)

    @property
    def noise_power(self):
        return dbm_to_watts(self.noise_dbm)

    @property
    def n_reflect(self):
        """Number of tunable reflection coefficients ``U * M``."""
        return self.n_ris * self.elems_per_ris

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


SCHEMES = ("smm", "ssca", "smrt", "noris", "nonrobust", "imperfect_csi", "saa")


@dataclass
class RunConfig:
    """Scenario plus the knobs of one CLI run."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    scheme: str = "smm"
    max_iter: int = 1000
    mc_samples: int = 1000
    seed: int = 0
    output_dir: str = "out"
    tol: float = 1e-4
    patience: int = 50
    saa_samples: int = 300
    init_trials: int = 64

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        for name in ("max_iter", "mc_samples", "patience", "saa_samples", "init_trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


_SCENARIO_KEYS = {f.name: f for f in fields(ScenarioConfig)}
_RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name != "scenario"}
_ALIASES = {
    "target_rate": "target_rate_bps_hz",
    "N": "n_tx",
    "U": "n_ris",
    "M": "elems_per_ris",
    "K": "n_users",
    "L": "n_clusters",
    "I": "n_subpaths",
}


def _locate(text, key):
    pattern = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.MULTILINE)
    match = pattern.search(text)
    if match is None:
        return "?"
    return str(text.count("\n", 0, match.start()) + 1)


def _coerce(key, value, annotation):
    kind = str(annotation)
    if value is None:
        return None
    if "list" in kind:
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        return [float(v) for v in value]
    if kind.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if kind.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if kind.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    return value


def parse_config(text):
    """Parse flat ``key = value`` TOML text into a validated :class:`RunConfig`.

    Sections are allowed but only flatten the namespace; ``[scenario]`` and
    ``[run]`` are conventional. Unknown keys and bad values raise
    :class:`ConfigError` naming the key and line.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for sub_key, sub_value in value.items():
                if isinstance(sub_value, dict):
                    raise ConfigError(f"line {_locate(text, sub_key)}: nested section {key}.{sub_key}")
                flat[sub_key] = sub_value
        else:
            flat[key] = value

    scenario_kwargs, run_kwargs = {}, {}
    for key, value in flat.items():
        name = _ALIASES.get(key, key)
        try:
            if name in _SCENARIO_KEYS:
                scenario_kwargs[name] = _coerce(key, value, _SCENARIO_KEYS[name].type)
            elif name in _RUN_KEYS:
                run_kwargs[name] = _coerce(key, value, _RUN_KEYS[name].type)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"line {_locate(text, key)}: {exc}") from None

    try:
        scenario = ScenarioConfig(**scenario_kwargs)
        return RunConfig(scenario=scenario, **run_kwargs)
    except ConfigError as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(float(v)) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def render_config(config):
    """Render a :class:`RunConfig` so that ``parse_config(render_config(c)) == c``."""
    lines = ["[scenario]"]
    for name in _SCENARIO_KEYS:
        value = getattr(config.scenario, name)
        if value is not None:
            lines.append(f"{name} = {_toml_value(value)}")
    lines.append("")
    lines.append("[run]")
    for name in _RUN_KEYS:
        lines.append(f"{name} = {_toml_value(getattr(config, name))}")
    return "\n".join(lines) + "\n"
