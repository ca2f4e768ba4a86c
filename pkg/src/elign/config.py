"""Toolkit configuration: one JSON file mirroring every stage's tunables,
with strict key checking so typos fail loudly instead of silently using a
default."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .align import AlignConfig
from .audio import CANONICAL_RATE
from .dsp import FrameSpec


@dataclass
class VadSettings:
    frame_seconds: float = 0.025
    hop_seconds: float = 0.010
    threshold_db: float = -40.0
    hangover_frames: int = 5


@dataclass
class SilenceSettings:
    max_silence_ms: float = 200.0
    crossfade_ms: float = 5.0
    filter_el: bool = True
    filter_he: bool = True


@dataclass
class PitchSettings:
    f0_min: float = 50.0
    f0_max: float = 500.0
    hop_seconds: float = 0.010
    harmonicity_threshold: float = 0.15


@dataclass
class MelSettings:
    n_mels: int = 80
    frame_seconds: float = 0.025
    hop_seconds: float = 0.010
    floor: float = 1e-10


@dataclass
class DtwSettings:
    metric: str = "cosine"
    band_fraction: float | None = None


@dataclass
class PsolaSettings:
    clamp_min: float = 0.25
    clamp_max: float = 4.0
    smooth_frames: int = 5


@dataclass
class AugmentSettings:
    probability: float = 0.3
    snr_min_db: float = 3.0
    snr_max_db: float = 30.0


@dataclass
class MetricsSettings:
    bootstrap_resamples: int = 1000
    level: float = 0.95
    macro: bool = False


@dataclass
class Config:
    sample_rate: int = CANONICAL_RATE
    keep_rate: bool = False
    vad: VadSettings = field(default_factory=VadSettings)
    silence: SilenceSettings = field(default_factory=SilenceSettings)
    pitch: PitchSettings = field(default_factory=PitchSettings)
    mel: MelSettings = field(default_factory=MelSettings)
    dtw: DtwSettings = field(default_factory=DtwSettings)
    psola: PsolaSettings = field(default_factory=PsolaSettings)
    augment: AugmentSettings = field(default_factory=AugmentSettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)

    def align_config(self) -> AlignConfig:
        return AlignConfig(
            frame=FrameSpec(self.mel.frame_seconds, self.mel.hop_seconds),
            vad_threshold_db=self.vad.threshold_db,
            vad_hangover_frames=self.vad.hangover_frames,
            max_silence_ms=self.silence.max_silence_ms,
            crossfade_ms=self.silence.crossfade_ms,
            f0_min=self.pitch.f0_min,
            f0_max=self.pitch.f0_max,
            n_mels=self.mel.n_mels,
            metric=self.dtw.metric,
            band_fraction=self.dtw.band_fraction,
            clamp=(self.psola.clamp_min, self.psola.clamp_max),
            smooth_frames=self.psola.smooth_frames,
            silence_filter_el=self.silence.filter_el,
            silence_filter_he=self.silence.filter_he,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config key(s) {sorted(unknown)} under {path!r}")
    return cls(**data)


_SECTIONS = {
    "vad": VadSettings,
    "silence": SilenceSettings,
    "pitch": PitchSettings,
    "mel": MelSettings,
    "dtw": DtwSettings,
    "psola": PsolaSettings,
    "augment": AugmentSettings,
    "metrics": MetricsSettings,
}


def config_from_dict(data: dict) -> Config:
    top_known = {f.name for f in fields(Config)}
    unknown = set(data) - top_known
    if unknown:
        raise ValueError(f"unknown config key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _SECTIONS:
            if not isinstance(value, dict):
                raise ValueError(f"config section {name!r} must be an object")
            kwargs[name] = _build(_SECTIONS[name], value, name)
        else:
            kwargs[name] = value
    return Config(**kwargs)


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return config_from_dict(data)
