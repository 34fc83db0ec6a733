"""Scenario configuration: presets, unit conversion, config file round-trip.

Config files are flat INI sections (user / shell / constellation / fading /
policy / link / mc) holding the same human units as the CLI: degrees, km,
seconds, dB.  Internally everything is radians, metres, linear SNR.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .channel import FadingParams
from .constellation import ConstellationParams
from .geometry import GroundUser, OrbitShell, VisibilityCap
from .serving import ServingPolicy


class ConfigError(ValueError):
    """Scenario file or field failed to parse or validate."""


@dataclass(frozen=True)
class Scenario:
    """Human-unit scenario description, round-trippable through a config file."""

    name: str = "custom"
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    psi_min_deg: float = 30.0
    h_km: float = 550.0
    b_deg: float = 53.0
    n_sat: int = 3168
    n_planes: int = 144
    n_orb: int = 22
    b0: float = 0.126
    m: float = 10.1
    omega: float = 0.835
    t_min_s: float = 0.0
    t_max_s: float = math.inf  # "inf" in config files
    dt_s: float = 1.0
    gamma_db: float = 120.0
    seed: int = 1
    n_renewals: int = 1000

    def build(self) -> "ScenarioModel":
        try:
            user = GroundUser(
                r=6_371_000.0,
                theta_u=math.radians(self.lon_deg) % (2.0 * math.pi),
                phi_u=math.pi / 2 - math.radians(self.lat_deg),
                psi_min=math.radians(self.psi_min_deg),
            )
            shell = OrbitShell(h=self.h_km * 1000.0, b=math.radians(self.b_deg))
            cap = VisibilityCap.for_user(user, shell)
            params = ConstellationParams(
                n_sat=self.n_sat,
                shell=shell,
                s_orb=2.0 * math.pi / self.n_planes,
                n_orb=self.n_orb,
            )
            policy = ServingPolicy(self.t_min_s, self.t_max_s, self.dt_s)
            fading = FadingParams(self.b0, self.m, self.omega)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return ScenarioModel(
            scenario=self,
            user=user,
            shell=shell,
            cap=cap,
            params=params,
            policy=policy,
            fading=fading,
            gamma=10.0 ** (self.gamma_db / 10.0),
        )


@dataclass(frozen=True)
class ScenarioModel:
    """The built physical objects for one scenario (SI units, radians)."""

    scenario: Scenario
    user: GroundUser
    shell: OrbitShell
    cap: VisibilityCap
    params: ConstellationParams
    policy: ServingPolicy
    fading: FadingParams
    gamma: float

    def with_gamma_db(self, gamma_db: float) -> "ScenarioModel":
        return replace(
            self,
            scenario=replace(self.scenario, gamma_db=gamma_db),
            gamma=10.0 ** (gamma_db / 10.0),
        )

    def with_policy(self, policy: ServingPolicy) -> "ScenarioModel":
        return replace(self, policy=policy)


# The constellation presets keep every Starlink shell caught by the
# b = 53 +/- 1 deg, h = 550 +/- 50 km filter (two shells of 72 x 22).
PRESETS: dict[str, Scenario] = {
    "melbourne": Scenario(name="melbourne", lat_deg=-37.81, lon_deg=144.96, psi_min_deg=30.0),
    "helsinki": Scenario(name="helsinki", lat_deg=60.17, lon_deg=24.94, psi_min_deg=10.0),
}


_SECTIONS = {
    "user": [("lat_deg", float), ("lon_deg", float), ("psi_min_deg", float)],
    "shell": [("h_km", float), ("b_deg", float)],
    "constellation": [("n_sat", int), ("n_planes", int), ("n_orb", int)],
    "fading": [("b0", float), ("m", float), ("omega", float)],
    "policy": [("t_min_s", float), ("t_max_s", float), ("dt_s", float)],
    "link": [("gamma_db", float)],
    "mc": [("seed", int), ("n_renewals", int)],
}


def parse_scenario(path: str) -> Scenario:
    """Read a scenario config file; unknown keys and bad values are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read scenario file {path!r}")
    kwargs: dict = {}
    if parser.has_option("scenario", "name"):
        kwargs["name"] = parser.get("scenario", "name")
    for section, fields in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        known = {name for name, _ in fields}
        for key in parser.options(section):
            if key not in known:
                raise ConfigError(f"unknown key [{section}] {key} in {path!r}")
        for name, cast in fields:
            if not parser.has_option(section, name):
                continue
            raw = parser.get(section, name)
            try:
                if cast is float and raw.strip().lower() == "inf":
                    kwargs[name] = math.inf
                else:
                    kwargs[name] = cast(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for [{section}] {name} = {raw!r} in {path!r}"
                ) from exc
    scenario = Scenario(**kwargs)
    scenario.build()  # validate eagerly so the CLI can exit with a config error
    return scenario


def emit_scenario(scenario: Scenario, path: str) -> None:
    """Write a scenario config file that parse_scenario reads back identically."""
    parser = configparser.ConfigParser()
    parser["scenario"] = {"name": scenario.name}
    for section, fields in _SECTIONS.items():
        parser[section] = {}
        for name, cast in fields:
            value = getattr(scenario, name)
            if cast is float:
                parser[section][name] = "inf" if math.isinf(value) else repr(value)
            else:
                parser[section][name] = str(value)
    with open(path, "w") as fh:
        parser.write(fh)
