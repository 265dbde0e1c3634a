"""
RunConfig - every stage's configuration, loaded from one YAML file.

Sections map onto the stage dataclasses:

    run        seed, output_dir, log_dir, log_level, log_to_file, progress
    generator  GenConfig
    split      ratio
    resample   ResampleConfig
    coteach    CoteachConfig
    lof        LofParams
    mil        MilConfig
    fusion     FusionConfig
    model      hidden_dims
    stages     resample / coteach / lof toggles

Per-stage seeds are not configurable: they are derived from run.seed and
the stage name. Unknown sections and keys are rejected with the line number
of the offending key; values can be overridden from the environment as
DPMIL_<SECTION>_<KEY>.
"""

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from src.data.resampler import ResampleConfig
from src.data.synthetic_generator import GenConfig
from src.features.lof_denoiser import LofParams
from src.fusion.weighted_fusion import FusionConfig
from src.training.coteaching import CoteachConfig
from src.training.dpmil_pipeline import DpmilConfig
from src.training.mil_trainer import MilConfig
from src.utils.config_loader import ConfigLoader
from src.utils.constants import DEFAULT_HIDDEN_DIMS
from src.utils.helpers import derive_seed
from src.utils.validators import ConfigError, ValidationError

_NOT_CONFIGURABLE = {"seed", "model_seeds", "hidden_dims"}


@dataclass
class RunSection:
    seed: int = 0
    output_dir: str = "runs/default"
    log_dir: str = "logs"
    log_level: str = "INFO"
    log_to_file: bool = False
    progress: bool = False


@dataclass
class SplitSection:
    ratio: float = 0.8


@dataclass
class ModelSection:
    hidden_dims: Tuple[int, ...] = DEFAULT_HIDDEN_DIMS


@dataclass
class StageToggles:
    resample: bool = True
    coteach: bool = True
    lof: bool = True


SECTIONS: Dict[str, type] = {
    "run": RunSection,
    "generator": GenConfig,
    "split": SplitSection,
    "resample": ResampleConfig,
    "coteach": CoteachConfig,
    "lof": LofParams,
    "mil": MilConfig,
    "fusion": FusionConfig,
    "model": ModelSection,
    "stages": StageToggles,
}


def _configurable_fields(section: str, cls: type) -> Dict[str, Any]:
    out = {}
    for f in fields(cls):
        if section != "run" and f.name in _NOT_CONFIGURABLE and not (section == "model" and f.name == "hidden_dims"):
            continue
        out[f.name] = f
    return out


def _coerce(value: Any, default: Any, dotted: str, line: Optional[int]) -> Any:
    def fail(expected: str):
        raise ConfigError(f"{dotted}: expected {expected}, got {value!r}", line=line)

    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            fail("a string")
        return value
    if isinstance(default, tuple) or isinstance(value, (list, tuple)):
        if value is None:
            return None
        if not isinstance(value, (list, tuple)):
            fail("a list")
        return tuple(value)
    return value


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    generator: GenConfig = field(default_factory=GenConfig)
    split: SplitSection = field(default_factory=SplitSection)
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    coteach: CoteachConfig = field(default_factory=CoteachConfig)
    lof: LofParams = field(default_factory=LofParams)
    mil: MilConfig = field(default_factory=MilConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    model: ModelSection = field(default_factory=ModelSection)
    stages: StageToggles = field(default_factory=StageToggles)
    source: Optional[ConfigLoader] = field(default=None, repr=False, compare=False)

    @classmethod
    def load(cls, config_path: Optional[Union[str, Path]] = None, env_file: Union[str, Path] = ".env") -> "RunConfig":
        """
        Build a RunConfig from a YAML file (None means all defaults).

        Raises:
            ConfigError: Parse failure, unknown section / key, bad value; the
                message carries the line number where one is known
        """
        loader = ConfigLoader(config_path, env_file)
        for section, body in loader.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown section '{section}'", line=loader.line_of(section))
            if body is None:
                continue
            if not isinstance(body, dict):
                raise ConfigError(f"section '{section}' must be a mapping", line=loader.line_of(section))
            allowed = _configurable_fields(section, SECTIONS[section])
            for key in body:
                if key not in allowed:
                    raise ConfigError(f"unknown key '{section}.{key}'", line=loader.line_of(f"{section}.{key}"))

        built = {}
        for section, cls_ in SECTIONS.items():
            defaults = cls_()
            kwargs = {}
            for name in _configurable_fields(section, cls_):
                dotted = f"{section}.{name}"
                default = getattr(defaults, name)
                raw = loader.get(dotted, default)
                kwargs[name] = _coerce(raw, default, dotted, loader.line_of(dotted))
            built[section] = cls_(**kwargs)

        config = cls(**built, source=loader)
        return config.validate()

    def validate(self) -> "RunConfig":
        try:
            self.generator.validate()
            self.stage_config().validate()
            self.fusion.validate()
            if not 0.0 < self.split.ratio < 1.0:
                raise ValidationError(f"split.ratio must lie in (0, 1), got {self.split.ratio}")
            if not self.model.hidden_dims or any(int(h) < 1 for h in self.model.hidden_dims):
                raise ValidationError(f"model.hidden_dims must be positive sizes, got {self.model.hidden_dims}")
        except ConfigError as e:
            line = self._line_for(str(e))
            if e.line is not None or line is None:
                raise
            raise ConfigError(str(e), line=line) from e
        return self

    def _line_for(self, message: str) -> Optional[int]:
        if self.source is None:
            return None
        for dotted in re.findall(r"\b([a-z_]+\.[a-z_0-9]+)\b", message):
            line = self.source.line_of(dotted)
            if line is not None:
                return line
        return None

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[Union[str, Path]] = None) -> "RunConfig":
        run = self.run
        if seed is not None:
            run = replace(run, seed=int(seed))
        if output_dir is not None:
            run = replace(run, output_dir=str(output_dir))
        return replace(self, run=run)

    @property
    def n_classes(self) -> int:
        return self.generator.n_classes

    @property
    def forget_rate(self) -> float:
        """coteach.forget_rate, falling back to the generator's noise fraction."""
        if self.coteach.forget_rate is not None:
            return self.coteach.forget_rate
        return self.generator.noise_fraction

    def generator_config(self) -> GenConfig:
        return replace(self.generator, seed=derive_seed(self.run.seed, "generator"))

    def split_seed(self) -> int:
        return derive_seed(self.run.seed, "split")

    def stage_config(self) -> DpmilConfig:
        """
        Resample / co-teaching / LOF / MIL configs with derived seeds and toggles applied.

        An unset resample.augment_sigma is scaled to generator.cluster_spread and an
        unset coteach.forget_rate falls back to generator.noise_fraction.
        """
        base = DpmilConfig(
            resample=self.resample.for_spread(self.generator.cluster_spread),
            coteach=replace(self.coteach, forget_rate=self.forget_rate, hidden_dims=tuple(self.model.hidden_dims)),
            lof=self.lof,
            mil=self.mil,
            use_resample=self.stages.resample,
            use_coteach=self.stages.coteach,
            use_lof=self.stages.lof,
        )
        return base.reseeded(self.run.seed)

    def tag(self, stage: str) -> str:
        """Report stage tag, prefixed with the resolution."""
        return f"{self.generator.resolution_tag}-{stage}"
