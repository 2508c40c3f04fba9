"""Synthetic CFR power traces from a parametric multipath model.

The complex channel at carrier ``f`` is the sum of a constant static part
``H_s`` and moving reflections whose path length grows linearly in time.
Only the power ``|H|^2`` is produced, so the STO/SFO/CFO phase offsets that
multiply the whole channel never appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 3e8
DEFAULT_CARRIER_HZ = 5.805e9
DEFAULT_SAMPLE_RATE_HZ = 600.0


class InvalidSceneError(ValueError):
    pass


class EmptySceneError(InvalidSceneError):
    pass


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathComponent:
    amplitude: float
    initial_distance_m: float = 0.0
    velocity_mps: float = 0.0
    initial_phase_rad: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise InvalidSceneError(f"path amplitude must be >= 0, got {self.amplitude}")

    @property
    def is_static(self) -> bool:
        return self.velocity_mps == 0.0


@dataclass(frozen=True)
class SceneSpec:
    static_paths: tuple = ()
    dynamic_paths: tuple = ()
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    duration_s: float = 1.0
    noise_std: float = 0.0
    rng_seed: int = 0
    n_subcarriers: int = 1
    subcarrier_spacing_hz: float = 312.5e3

    def __post_init__(self):
        object.__setattr__(self, "static_paths", tuple(self.static_paths))
        object.__setattr__(self, "dynamic_paths", tuple(self.dynamic_paths))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    def subcarrier_freqs(self) -> np.ndarray:
        offsets = np.arange(self.n_subcarriers) - (self.n_subcarriers - 1) / 2.0
        return self.carrier_freq_hz + offsets * self.subcarrier_spacing_hz

    def max_doppler_hz(self) -> float:
        if not self.dynamic_paths:
            return 0.0
        fmax = float(np.max(np.abs(self.subcarrier_freqs())))
        return max(fmax * abs(p.velocity_mps) / SPEED_OF_LIGHT for p in self.dynamic_paths)

    def validate(self) -> None:
        if not self.static_paths and not self.dynamic_paths:
            raise EmptySceneError("scene has no propagation paths")
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise InvalidSceneError("sample rate and duration must be positive")
        if self.duration_s * self.sample_rate_hz < 2:
            raise InvalidSceneError("trace must contain at least 2 samples")
        if self.n_subcarriers < 1:
            raise InvalidSceneError("n_subcarriers must be >= 1")
        if any(not p.is_static for p in self.static_paths):
            raise InvalidSceneError("static paths must have zero velocity")
        doppler = self.max_doppler_hz()
        if not self.sample_rate_hz > 2 * doppler:
            raise InvalidSceneError(
                f"sample rate {self.sample_rate_hz} Hz violates Nyquist for "
                f"Doppler {doppler:.3f} Hz"
            )


@dataclass
class CfrPowerTrace:
    """Sampled CFR power; ``samples`` is (I,) or (I, n_subcarriers)."""

    samples: np.ndarray
    sample_rate_hz: float
    n_subcarriers: int = 1
    label: Optional[str] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 2 and s.shape[1] == 1:
            s = s[:, 0]
        self.samples = s
        self.n_subcarriers = 1 if s.ndim == 1 else s.shape[1]
        if s.size == 0:
            raise ValueError("empty trace")
        if not np.all(np.isfinite(s)):
            raise ValueError("trace samples must be finite")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.samples.reshape(len(self), -1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "CfrPowerTrace":
        return replace(self, samples=samples)


def _path_phasors(paths: Sequence[PathComponent], freq: float, t: np.ndarray) -> np.ndarray:
    """Per-path complex gain over time, shape (len(paths), len(t))."""
    if not paths:
        return np.zeros((0, t.size), dtype=complex)
    amp = np.array([p.amplitude for p in paths])[:, None]
    phi = np.array([p.initial_phase_rad for p in paths])[:, None]
    d0 = np.array([p.initial_distance_m for p in paths])[:, None]
    v = np.array([p.velocity_mps for p in paths])[:, None]
    return amp * np.exp(1j * phi) * np.exp(-2j * np.pi * freq * (d0 + v * t[None, :]) / SPEED_OF_LIGHT)


def _static_sum(scene: SceneSpec, freq: float) -> complex:
    return complex(_path_phasors(scene.static_paths, freq, np.zeros(1)).sum())


def synthesize_power(scene: SceneSpec) -> CfrPowerTrace:
    scene.validate()
    t = np.arange(scene.n_samples) / scene.sample_rate_hz
    rng = np.random.default_rng(scene.rng_seed)
    cols = []
    for freq in scene.subcarrier_freqs():
        h = _static_sum(scene, freq) + _path_phasors(scene.dynamic_paths, freq, t).sum(axis=0)
        power = np.abs(h) ** 2
        if scene.noise_std > 0:
            power = power + rng.normal(0.0, scene.noise_std, size=power.shape)
        cols.append(power)
    samples = np.stack(cols, axis=1)
    return CfrPowerTrace(samples, scene.sample_rate_hz, scene.n_subcarriers)


def decompose_power(scene: SceneSpec, subcarrier: int = 0):
    """Split noiseless power into (dc, cross-term trace, self-term trace).

    dc is sum |a_d|^2 + |H_s|^2; the cross term collects static x dynamic
    products and the self term the dynamic x dynamic pairs.
    """
    scene.validate()
    if scene.noise_std != 0:
        raise InvalidSceneError("decompose_power requires noise_std = 0")
    freq = scene.subcarrier_freqs()[subcarrier]
    t = np.arange(scene.n_samples) / scene.sample_rate_hz
    hs = _static_sum(scene, freq)
    hd = _path_phasors(scene.dynamic_paths, freq, t)

    dc = float(abs(hs) ** 2 + sum(p.amplitude ** 2 for p in scene.dynamic_paths))
    cross = 2.0 * np.real(np.conj(hs) * hd).sum(axis=0) if len(hd) else np.zeros(t.size)
    self_ = np.zeros(t.size)
    for i in range(len(hd)):
        for k in range(i + 1, len(hd)):
            self_ += 2.0 * np.real(hd[i] * np.conj(hd[k]))
    return (
        dc,
        CfrPowerTrace(cross, scene.sample_rate_hz),
        CfrPowerTrace(self_, scene.sample_rate_hz),
    )


def cross_term_freqs(scene: SceneSpec) -> np.ndarray:
    return np.array([scene.carrier_freq_hz * abs(p.velocity_mps) / SPEED_OF_LIGHT for p in scene.dynamic_paths])


def self_term_freqs(scene: SceneSpec) -> np.ndarray:
    v = [p.velocity_mps for p in scene.dynamic_paths]
    out = [scene.carrier_freq_hz * abs(v[i] - v[k]) / SPEED_OF_LIGHT
           for i in range(len(v)) for k in range(i + 1, len(v))]
    return np.array(out)


# ---------------------------------------------------------------------------
# Activity datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActivityPreset:
    """Distribution over scenes for one activity class.

    Velocities are drawn stratified over ``velocity_range`` so that the
    Doppler lines of one trace stay a few FFT bins apart.
    """

    n_dynamic: tuple = (6, 6)
    velocity_range: tuple = (0.1, 0.6)
    amplitude_range: tuple = (0.004, 0.010)
    static_amplitude: float = 1.0
    noise_std: float = 0.001

    def sample_scene(self, rng: np.random.Generator, *, duration_s: float, sample_rate_hz: float,
                     carrier_freq_hz: float, n_subcarriers: int, noise_seed: int) -> SceneSpec:
        lo, hi = self.n_dynamic
        k = int(rng.integers(lo, hi + 1))
        vlo, vhi = self.velocity_range
        edges = np.linspace(vlo, vhi, k + 1)
        width = edges[1] - edges[0]
        # jitter within the middle half of each stratum
        v = edges[:-1] + width * (0.25 + 0.5 * rng.random(k))
        amps = rng.uniform(*self.amplitude_range, size=k)
        d0 = rng.uniform(1.0, 5.0, size=k)
        ph = rng.uniform(0, 2 * np.pi, size=k)
        dynamic = tuple(PathComponent(float(a), float(d), float(vel), float(p))
                        for a, d, vel, p in zip(amps, d0, v, ph))
        static = (PathComponent(self.static_amplitude, float(rng.uniform(2.0, 8.0)), 0.0,
                                float(rng.uniform(0, 2 * np.pi))),)
        return SceneSpec(static, dynamic, carrier_freq_hz=carrier_freq_hz, sample_rate_hz=sample_rate_hz,
                         duration_s=duration_s, noise_std=self.noise_std, rng_seed=noise_seed,
                         n_subcarriers=n_subcarriers)


PRESETS = {
    "walking": ActivityPreset(n_dynamic=(8, 8), velocity_range=(0.4, 1.6), amplitude_range=(0.004, 0.010)),
    "sitting": ActivityPreset(n_dynamic=(6, 6), velocity_range=(0.1, 0.6), amplitude_range=(0.004, 0.010)),
    "falling": ActivityPreset(n_dynamic=(4, 4), velocity_range=(1.0, 3.0), amplitude_range=(0.008, 0.016)),
    "standing": ActivityPreset(n_dynamic=(5, 5), velocity_range=(0.2, 1.0), amplitude_range=(0.006, 0.014)),
}


@dataclass
class DatasetConfig:
    classes: Sequence[str] = ("falling", "walking", "sitting")
    traces_per_class: int = 10
    duration_s: float = 2.0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    carrier_freq_hz: float = DEFAULT_CARRIER_HZ
    n_subcarriers: int = 1
    rng_seed: int = 0
    presets: dict = field(default_factory=dict)

    def preset(self, name: str) -> ActivityPreset:
        if name in self.presets:
            p = self.presets[name]
            return p if isinstance(p, ActivityPreset) else ActivityPreset(**p)
        if name in PRESETS:
            return PRESETS[name]
        raise InvalidConfigError(f"unknown activity class {name!r}")


def trace_seed(seed: int, class_index: int, trace_index: int, link: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, class_index, trace_index, link])


def make_activity_scene(config: DatasetConfig, class_index: int, trace_index: int, link: int = 0) -> SceneSpec:
    name = config.classes[class_index]
    ss = trace_seed(config.rng_seed, class_index, trace_index, link)
    rng = np.random.default_rng(ss)
    noise_seed = int(ss.generate_state(1, dtype=np.uint64)[0])
    return config.preset(name).sample_scene(
        rng, duration_s=config.duration_s, sample_rate_hz=config.sample_rate_hz,
        carrier_freq_hz=config.carrier_freq_hz, n_subcarriers=config.n_subcarriers,
        noise_seed=noise_seed)


def make_activity_dataset(config: DatasetConfig, link: int = 0) -> list:
    """Labeled traces, ``traces_per_class`` per class, in class order.

    ``link`` selects an independent draw of the same dataset layout, used to
    emulate several receivers observing the same activities.
    """
    if not config.classes:
        raise InvalidConfigError("dataset needs at least one activity class")
    if config.traces_per_class < 1:
        raise InvalidConfigError("traces_per_class must be >= 1")
    out = []
    for ci, name in enumerate(config.classes):
        config.preset(name)
        for ti in range(config.traces_per_class):
            trace = synthesize_power(make_activity_scene(config, ci, ti, link))
            trace.label = name
            out.append(trace)
    return out
