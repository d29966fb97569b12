"""Synthetic two-class VM trace generator.

Stands in for a production monitoring dataset: each VM emits 16 metric
streams built from a baseline, a periodic(daily-style) component, Gaussian
noise, and occasional bursts. Web-server VMs are dominated by network and
syscall activity, SQL-server VMs by I/O-buffer, cache-miss and memory
pressure.

Two knobs control difficulty:

* ``separability`` in [0, 1] scales the between-class difference of
  baselines and amplitudes; at 0 both class archetypes coincide and the
  labels carry no signal, at 1 the full configured contrast applies.
* ``noise_scale`` multiplies every noise std and burst probability, so 0
  produces exactly deterministic class archetypes.

The periodic phase of each metric is shared by all VMs. Per-VM phases
would make individual VMs identifiable from relative phase offsets, which
would let a classifier recognize VM identity instead of class behavior and
defeat the separability-0 chance-level construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources as importlib_resources

import numpy as np

from .data import CANONICAL_METRICS, CLASS_NAMES, VmTrace
from .errors import ConfigError


@dataclass(frozen=True)
class ClassProfile:
    baseline: float
    amplitude: float


@dataclass(frozen=True)
class MetricArchetype:
    name: str
    period: int
    noise_std: float
    burst_prob: float
    burst_scale: float
    web: ClassProfile
    sql: ClassProfile

    def profile(self, label: int) -> ClassProfile:
        return self.web if label == 0 else self.sql


@dataclass(frozen=True)
class SynthConfig:
    archetypes: tuple[MetricArchetype, ...]
    timesteps: int = 2016
    vms_per_class: int = 4
    separability: float = 0.75
    noise_scale: float = 1.0

    def validate(self) -> None:
        if self.timesteps < 1:
            raise ConfigError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.vms_per_class < 1:
            raise ConfigError(f"vms_per_class must be >= 1, got {self.vms_per_class}")
        if not 0.0 <= self.separability <= 1.0:
            raise ConfigError(f"separability must lie in [0, 1], got {self.separability}")
        if self.noise_scale < 0.0:
            raise ConfigError(f"noise_scale must be >= 0, got {self.noise_scale}")
        names = tuple(a.name for a in self.archetypes)
        if names != CANONICAL_METRICS:
            raise ConfigError(
                "archetypes must cover the canonical metrics in order; "
                f"got {names}"
            )
        for a in self.archetypes:
            if a.period < 2:
                raise ConfigError(f"{a.name}: period must be >= 2")
            if a.noise_std < 0 or a.burst_scale < 0:
                raise ConfigError(f"{a.name}: noise_std and burst_scale must be >= 0")
            if not 0.0 <= a.burst_prob <= 1.0:
                raise ConfigError(f"{a.name}: burst_prob must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "timesteps": self.timesteps,
            "vms_per_class": self.vms_per_class,
            "separability": self.separability,
            "noise_scale": self.noise_scale,
            "metrics": [
                {
                    "name": a.name,
                    "period": a.period,
                    "noise_std": a.noise_std,
                    "burst_prob": a.burst_prob,
                    "burst_scale": a.burst_scale,
                    "web": {"baseline": a.web.baseline, "amplitude": a.web.amplitude},
                    "sql": {"baseline": a.sql.baseline, "amplitude": a.sql.amplitude},
                }
                for a in self.archetypes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        try:
            archetypes = tuple(
                MetricArchetype(
                    name=str(m["name"]),
                    period=int(m["period"]),
                    noise_std=float(m["noise_std"]),
                    burst_prob=float(m["burst_prob"]),
                    burst_scale=float(m["burst_scale"]),
                    web=ClassProfile(float(m["web"]["baseline"]), float(m["web"]["amplitude"])),
                    sql=ClassProfile(float(m["sql"]["baseline"]), float(m["sql"]["amplitude"])),
                )
                for m in d["metrics"]
            )
            config = cls(
                archetypes=archetypes,
                timesteps=int(d.get("timesteps", 2016)),
                vms_per_class=int(d.get("vms_per_class", 4)),
                separability=float(d.get("separability", 0.75)),
                noise_scale=float(d.get("noise_scale", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed synthetic config: {exc}") from exc
        config.validate()
        return config

    def with_overrides(self, **kwargs) -> "SynthConfig":
        config = replace(self, **kwargs)
        config.validate()
        return config


def default_config() -> SynthConfig:
    """The documented default archetype table shipped with the package."""
    raw = importlib_resources.files("vmclassify.resources").joinpath(
        "synth_defaults.json"
    ).read_text(encoding="utf-8")
    return SynthConfig.from_dict(json.loads(raw))


def effective_profile(archetype: MetricArchetype, label: int, separability: float) -> ClassProfile:
    """Interpolate a class profile toward the between-class midpoint.

    At separability 0 both classes collapse onto the midpoint, at 1 the
    configured contrast is fully applied.
    """
    mid_base = 0.5 * (archetype.web.baseline + archetype.sql.baseline)
    mid_amp = 0.5 * (archetype.web.amplitude + archetype.sql.amplitude)
    profile = archetype.profile(label)
    return ClassProfile(
        baseline=mid_base + separability * (profile.baseline - mid_base),
        amplitude=mid_amp + separability * (profile.amplitude - mid_amp),
    )


def synthesize(config: SynthConfig, seed: int) -> list[VmTrace]:
    """Generate ``vms_per_class`` traces per class, deterministic by seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    t = np.arange(config.timesteps, dtype=np.float64)

    # One phase per metric, shared across VMs (see the module docstring).
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(config.archetypes))

    traces: list[VmTrace] = []
    for label, class_name in enumerate(CLASS_NAMES):
        short = class_name.split("-")[0]
        for v in range(config.vms_per_class):
            columns = np.empty((config.timesteps, len(config.archetypes)))
            for m, archetype in enumerate(config.archetypes):
                profile = effective_profile(archetype, label, config.separability)
                series = profile.baseline + profile.amplitude * np.sin(
                    2.0 * np.pi * t / archetype.period + phases[m]
                )
                noise_std = config.noise_scale * archetype.noise_std
                if noise_std > 0.0:
                    series = series + rng.normal(0.0, noise_std, size=config.timesteps)
                burst_prob = min(config.noise_scale * archetype.burst_prob, 1.0)
                if burst_prob > 0.0 and archetype.burst_scale > 0.0:
                    mask = rng.random(config.timesteps) < burst_prob
                    count = int(mask.sum())
                    if count:
                        series = series.copy()
                        series[mask] += archetype.burst_scale * (0.5 + rng.random(count))
                columns[:, m] = series
            traces.append(
                VmTrace(vm_id=f"{short}-{v:02d}", class_label=label, samples=columns)
            )
    return traces
