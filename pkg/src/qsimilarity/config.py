"""Run configuration: one INI-style file, one section per module.

Unknown sections or keys are rejected so that typos in sweep files fail
loudly instead of silently falling back to defaults.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .evolution import EvolutionConfig, FitnessConfig
from .genome import VariationConfig
from .qsim import NoiseConfig
from .triplet import NEGATIVE_FIRST, PAIR_ORIENTATIONS, PerturbationConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ImageConfig:
    bins_per_channel: int = 16
    distance_mode: str = "hist"

    def __post_init__(self):
        if self.bins_per_channel < 1:
            raise ValueError("bins_per_channel must be >= 1")
        if self.distance_mode not in ("hist", "pixels"):
            raise ValueError("distance_mode must be 'hist' or 'pixels'")


@dataclass(frozen=True)
class TripletConfig:
    sigma: float = 5.0
    pair_orientation: str = NEGATIVE_FIRST

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if self.pair_orientation not in PAIR_ORIENTATIONS:
            raise ValueError(f"pair_orientation must be one of {PAIR_ORIENTATIONS}")


@dataclass(frozen=True)
class QsimConfig:
    qubits: int = 14
    p_bitflip: float = 0.0
    p_phaseflip: float = 0.0
    p_depolarizing: float = 0.0
    shots: int = 0
    trajectories: int = 1

    def __post_init__(self):
        if self.qubits < 4:
            raise ValueError("qubits must be >= 4")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        NoiseConfig(self.p_bitflip, self.p_phaseflip, self.p_depolarizing)


@dataclass(frozen=True)
class FitnessSection:
    alpha: float = 1.0
    beta: float = 1.0
    batch_size: int = 16
    validation_size: int = 32
    epsilon_guard: float = 1e-6
    f_cap: float = 1e6


@dataclass(frozen=True)
class EvolutionSection:
    population: int = 20
    generations: int = 20
    tournament_size: int = 3
    redundancy_threshold: float = 0.15
    elitism: int = 2
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


@dataclass(frozen=True)
class EvalConfig:
    n_pairs: int = 1000
    ssim_matching: str = "role"
    seed: int = 0
    baseline_layers: int = 4

    def __post_init__(self):
        if self.n_pairs < 2:
            raise ValueError("n_pairs must be >= 2")
        if self.ssim_matching not in ("role", "identity"):
            raise ValueError("ssim_matching must be 'role' or 'identity'")
        if self.baseline_layers < 1:
            raise ValueError("baseline_layers must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    image: ImageConfig = field(default_factory=ImageConfig)
    triplet: TripletConfig = field(default_factory=TripletConfig)
    qsim: QsimConfig = field(default_factory=QsimConfig)
    genome: VariationConfig = field(default_factory=VariationConfig)
    fitness: FitnessSection = field(default_factory=FitnessSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        # cross-module checks surface here so a bad file never starts a run
        self.evolution_config()
        self.fitness_config()

    # views consumed by the library modules
    def noise(self) -> NoiseConfig | None:
        n = NoiseConfig(self.qsim.p_bitflip, self.qsim.p_phaseflip, self.qsim.p_depolarizing)
        return None if n.is_zero else n

    def perturbation(self) -> PerturbationConfig:
        return PerturbationConfig(self.triplet.sigma, self.evolution.seed)

    def fitness_config(self) -> FitnessConfig:
        f = self.fitness
        return FitnessConfig(f.alpha, f.beta, f.batch_size, f.validation_size,
                             f.epsilon_guard, f.f_cap, self.triplet.pair_orientation,
                             self.qsim.shots, self.qsim.trajectories)

    def evolution_config(self) -> EvolutionConfig:
        e = self.evolution
        return EvolutionConfig(e.population, e.generations, e.tournament_size,
                               e.redundancy_threshold, e.elitism, e.seed, self.qsim.qubits)

    def with_overrides(self, **sections) -> "RunConfig":
        """``cfg.with_overrides(evolution={"seed": 3})`` returns an updated copy."""
        updated = {name: dataclasses.replace(getattr(self, name), **vals)
                   for name, vals in sections.items()}
        return dataclasses.replace(self, **updated)

    def to_ini(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            lines.append(f"[{f.name}]")
            for sf in dataclasses.fields(section):
                v = getattr(section, sf.name)
                lines.append(f"{sf.name} = {v!r}" if isinstance(v, float) else f"{sf.name} = {v}")
            lines.append("")
        return "\n".join(lines)


def _convert(value: str, like, where: str):
    try:
        if isinstance(like, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {value!r} as {type(like).__name__}") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    defaults = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    sections = {}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")
        base = getattr(defaults, name)
        fields = {f.name for f in dataclasses.fields(base)}
        vals = {}
        for key, raw in cp.items(name):
            if key not in fields:
                raise ConfigError(f"unknown key {name}.{key}")
            vals[key] = _convert(raw.strip(), getattr(base, key), f"{name}.{key}")
        try:
            sections[name] = dataclasses.replace(base, **vals)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
    try:
        return RunConfig(**sections)
    except ValueError as exc:
        raise ConfigError(f"inconsistent config: {exc}") from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
