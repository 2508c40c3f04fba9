"""Semantic encoding of CFR power as a sum of fitted sinusoids.

Pipeline: PCA denoising -> DC removal -> FFT order estimation ->
Levenberg-Marquardt fit, grown one basis at a time until the normalized
fit error drops below a threshold.  The resulting ``SemanticCode`` is the
payload a transmitter uploads instead of raw CSI.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .signal_model import CfrPowerTrace

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# header layout: order (uint8), mean_power (float), trace_len (uint16), sample_rate (float)
ORDER_BITS = 8
TRACE_LEN_BITS = 16
_FLOAT_CODES = {16: "e", 32: "f", 64: "d"}


class DegenerateFitError(RuntimeError):
    pass


class InvalidIndexError(ValueError):
    pass


class PayloadError(ValueError):
    pass


@dataclass(frozen=True)
class CodecConfig:
    fit_error_threshold: float = 0.10
    max_outer_iterations: int = 20
    max_order: int = 16
    pca_component_index: int = 1
    lm_max_inner_iterations: int = 200
    lm_initial_damping: float = 1e-3
    lm_damping_factor: float = 10.0
    feature_bits_per_value: int = 32
    peak_mad_factor: float = 4.0

    def __post_init__(self):
        if not 0 < self.fit_error_threshold < 1:
            raise ValueError("fit_error_threshold must lie in (0, 1)")
        if not 1 <= self.max_order < 2 ** ORDER_BITS:
            raise ValueError("max_order must be in [1, 255]")
        if self.pca_component_index < 1:
            raise ValueError("pca_component_index is 1-based")
        if self.feature_bits_per_value not in _FLOAT_CODES:
            raise ValueError(f"feature_bits_per_value must be one of {sorted(_FLOAT_CODES)}")
        if self.lm_damping_factor <= 1:
            raise ValueError("lm_damping_factor must exceed 1")


def _wrap_phase(theta):
    out = np.mod(theta, TWO_PI)
    # np.mod can round tiny negatives up to exactly 2*pi
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True)
class SemanticBasis:
    amplitude: float
    frequency_hz: float
    phase_rad: float

    def __post_init__(self):
        if not (self.amplitude >= 0 and self.frequency_hz >= 0 and 0 <= self.phase_rad < TWO_PI):
            raise ValueError(f"non-canonical basis {self}")

    @classmethod
    def canonical(cls, amplitude: float, frequency_hz: float, phase_rad: float) -> "SemanticBasis":
        """Fold sign flips of amplitude/frequency into the phase."""
        a, f, th = float(amplitude), float(frequency_hz), float(phase_rad)
        if f < 0:
            f, th = -f, np.pi - th
        if a < 0:
            a, th = -a, th + np.pi
        return cls(a, f, float(_wrap_phase(th)))


@dataclass(frozen=True)
class SemanticCode:
    bases: tuple
    mean_power: float
    fit_nrmse: float
    sample_rate_hz: float
    trace_len: int
    history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        if len(self.bases) < 1:
            raise ValueError("a semantic code needs at least one basis")

    @property
    def order(self) -> int:
        return len(self.bases)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([b.amplitude for b in self.bases])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([b.frequency_hz for b in self.bases])

    @property
    def phases(self) -> np.ndarray:
        return np.array([b.phase_rad for b in self.bases])

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "mean_power": self.mean_power,
            "sample_rate_hz": self.sample_rate_hz,
            "trace_len": self.trace_len,
            "fit_nrmse": self.fit_nrmse,
            "bases": [{"a": b.amplitude, "f": b.frequency_hz, "theta": b.phase_rad} for b in self.bases],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SemanticCode":
        bases = [SemanticBasis(float(b["a"]), float(b["f"]), float(b["theta"])) for b in d["bases"]]
        if len(bases) != int(d["order"]):
            raise PayloadError("order does not match number of bases")
        return cls(tuple(bases), float(d["mean_power"]), float(d["fit_nrmse"]),
                   float(d["sample_rate_hz"]), int(d["trace_len"]))


# ---------------------------------------------------------------------------
# Model evaluation
# ---------------------------------------------------------------------------

def _pack(bases: Sequence[SemanticBasis]) -> np.ndarray:
    return np.array([[b.amplitude, b.frequency_hz, b.phase_rad] for b in bases], dtype=float).ravel()


def sum_of_sines(params: np.ndarray, t: np.ndarray) -> np.ndarray:
    """sum_r A_r sin(2 pi F_r t + theta_r) for params laid out [A, F, theta, ...]."""
    p = np.asarray(params, dtype=float).reshape(-1, 3)
    arg = TWO_PI * np.outer(t, p[:, 1]) + p[:, 2]
    return np.sin(arg) @ p[:, 0]


def _model_and_jacobian(params: np.ndarray, t: np.ndarray):
    p = params.reshape(-1, 3)
    amp = p[:, 0]
    arg = TWO_PI * np.outer(t, p[:, 1]) + p[:, 2]
    s = np.sin(arg)
    c_amp = np.cos(arg) * amp
    jac = np.empty((t.size, params.size))
    jac[:, 0::3] = s
    jac[:, 1::3] = TWO_PI * t[:, None] * c_amp
    jac[:, 2::3] = c_amp
    return s @ amp, jac


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def nrmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """RMS(estimate - reference) / RMS(reference - mean(reference))."""
    reference = np.asarray(reference, dtype=float)
    denom = _rms(reference - reference.mean())
    err = _rms(np.asarray(estimate) - reference)
    if denom == 0:
        return 0.0 if err == 0 else float("inf")
    return err / denom


# ---------------------------------------------------------------------------
# Algorithm stages
# ---------------------------------------------------------------------------

def pca_denoise(trace: CfrPowerTrace, config: CodecConfig = CodecConfig()) -> CfrPowerTrace:
    """Project a (time x subcarrier) trace onto one principal component.

    Single-subcarrier traces are returned unchanged.  The sign of the
    component is fixed so that its loadings sum to a non-negative value.
    """
    if trace.n_subcarriers == 1:
        return trace
    k = config.pca_component_index
    if k > trace.n_subcarriers:
        raise InvalidIndexError(f"component {k} requested from {trace.n_subcarriers} subcarriers")
    x = trace.matrix - trace.matrix.mean(axis=0)
    _, _, vt = np.linalg.svd(x, full_matrices=False)
    loading = vt[k - 1]
    if loading.sum() < 0:
        loading = -loading
    return CfrPowerTrace(x @ loading, trace.sample_rate_hz, 1, trace.label)


def explained_variance_ratio(trace: CfrPowerTrace) -> np.ndarray:
    x = trace.matrix - trace.matrix.mean(axis=0)
    sv = np.linalg.svd(x, compute_uv=False)
    var = sv ** 2
    total = var.sum()
    return var / total if total > 0 else var


def remove_dc(trace: CfrPowerTrace):
    mean = trace.samples.mean(axis=0)
    centered = trace.with_samples(trace.samples - mean)
    return centered, (float(mean) if np.ndim(mean) == 0 else mean)


def _spectrum(x: np.ndarray, fs: float):
    """Hann-windowed one-sided spectrum scaled so a tone's peak ~ its amplitude."""
    n = x.size
    w = np.hanning(n)
    spec = np.fft.rfft(x * w)
    mag = 2.0 * np.abs(spec) / w.sum()
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    return freqs, mag, spec


def _peak_bins(mag: np.ndarray, factor: float, halfwidth: int = 2) -> np.ndarray:
    """Bins that dominate a +-halfwidth neighbourhood and clear median + factor*MAD.

    The robust statistics are taken on log-magnitude: on linear magnitude the
    Rayleigh tail of pure noise crosses the threshold about once per spectrum.
    """
    floor = np.finfo(float).tiny
    logmag = np.log(mag + floor)
    body = logmag[1:]
    med = np.median(body)
    mad = 1.4826 * np.median(np.abs(body - med))
    thresh = np.exp(med + factor * mad) if factor > 0 else 0.0
    padded = np.pad(mag, halfwidth, constant_values=-np.inf)
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * halfwidth + 1)
    is_max = mag >= windows.max(axis=1)
    is_max[0] = False
    cand = np.flatnonzero(is_max & (mag > thresh))
    return cand[np.argsort(-mag[cand], kind="stable")]


def _seed_from_bin(k: int, freqs, mag, spec) -> SemanticBasis:
    # FFT phase is that of a cosine; shift by pi/2 for the sine model
    return SemanticBasis.canonical(mag[k], freqs[k], np.angle(spec[k]) + np.pi / 2)


def estimate_order(centered: CfrPowerTrace, config: CodecConfig = CodecConfig()):
    x = centered.samples
    freqs, mag, spec = _spectrum(x, centered.sample_rate_hz)
    peaks = _peak_bins(mag, config.peak_mad_factor)
    if peaks.size == 0:
        peaks = np.array([1 + int(np.argmax(mag[1:]))]) if mag.size > 1 else np.array([0])
    peaks = peaks[: config.max_order]
    seeds = [_seed_from_bin(int(k), freqs, mag, spec) for k in peaks]
    return len(seeds), seeds


def _linear_amplitudes(y: np.ndarray, t: np.ndarray, freqs: np.ndarray):
    """Least-squares amplitudes/phases for fixed frequencies."""
    arg = TWO_PI * np.outer(t, freqs)
    design = np.hstack([np.sin(arg), np.cos(arg)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    k = freqs.size
    s, c = coef[:k], coef[k:]
    # a sin(x) + b cos(x) = A sin(x + theta)
    return np.hypot(s, c), np.arctan2(c, s)


def lm_fit(centered: CfrPowerTrace, seeds: Sequence[SemanticBasis], config: CodecConfig = CodecConfig(),
           refine_seeds: bool = True):
    """Levenberg-Marquardt fit of a sum of sinusoids to a DC-free trace.

    Returns canonical bases (descending amplitude) and the achieved NRMSE.
    ``refine_seeds`` first re-solves amplitudes and phases linearly at the
    seed frequencies, which keeps LM inside the right basin.
    """
    y = np.asarray(centered.samples, dtype=float)
    if y.ndim != 1:
        raise ValueError("lm_fit expects a single-subcarrier trace")
    if len(seeds) < 1:
        raise ValueError("lm_fit needs at least one seed")
    if y.size <= 3 * len(seeds):
        raise ValueError("trace too short for the number of seeds")
    seed_f = np.array([s.frequency_hz for s in seeds])
    if np.unique(seed_f).size != seed_f.size:
        raise DegenerateFitError("duplicate seed frequencies")

    t = np.arange(y.size) / centered.sample_rate_hz
    params = _pack(seeds)
    if refine_seeds:
        amp, ph = _linear_amplitudes(y, t, seed_f)
        params[0::3], params[2::3] = amp, ph

    model, jac = _model_and_jacobian(params, t)
    resid = y - model
    cost = float(resid @ resid)
    scale = float(y @ y)
    lam = config.lm_initial_damping
    factor = config.lm_damping_factor

    for _ in range(config.lm_max_inner_iterations):
        if cost <= 1e-30 * max(scale, 1e-300):
            break
        jtj = jac.T @ jac
        grad = jac.T @ resid
        diag = np.diag(jtj)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                lam *= factor
                continue
            trial = params + step
            trial_model, trial_jac = _model_and_jacobian(trial, t)
            trial_resid = y - trial_model
            trial_cost = float(trial_resid @ trial_resid)
            if trial_cost < cost:
                accepted = True
                break
            lam *= factor
        if not accepted:
            if not np.all(diag > 0):
                raise DegenerateFitError("normal equations singular beyond damping recovery")
            break
        rel_change = (cost - trial_cost) / cost
        params, jac, resid, cost = trial, trial_jac, trial_resid, trial_cost
        lam = max(lam / factor, 1e-15)
        if rel_change < 1e-10:
            break

    bases = [SemanticBasis.canonical(*row) for row in params.reshape(-1, 3)]
    bases.sort(key=lambda b: -b.amplitude)
    err = nrmse(sum_of_sines(_pack(bases), t), y)
    return bases, err


def _collisions(bases: Sequence[SemanticBasis], bin_hz: float) -> list:
    """Indices (into bases) of weaker members of pairs closer than one FFT bin."""
    drop = set()
    for i in range(len(bases)):
        for j in range(i + 1, len(bases)):
            if j in drop or i in drop:
                continue
            if abs(bases[i].frequency_hz - bases[j].frequency_hz) < bin_hz:
                drop.add(j if bases[j].amplitude <= bases[i].amplitude else i)
    return sorted(drop)


def _residual_seed(resid: np.ndarray, fs: float, bases, bin_hz: float, config: CodecConfig):
    freqs, mag, spec = _spectrum(resid, fs)
    taken = np.array([b.frequency_hz for b in bases])
    for k in _peak_bins(mag, 0.0):
        if np.all(np.abs(taken - freqs[k]) > bin_hz):
            return _seed_from_bin(int(k), freqs, mag, spec)
    return None


def _fit_distinct(centered: CfrPowerTrace, seeds, config: CodecConfig, bin_hz: float):
    bases, err = lm_fit(centered, seeds, config)
    while True:
        drop = _collisions(bases, bin_hz)
        if not drop:
            return bases, err
        keep = [b for i, b in enumerate(bases) if i not in drop]
        bases, err = lm_fit(centered, keep, config)


def encode(trace: CfrPowerTrace, config: CodecConfig = CodecConfig()) -> SemanticCode:
    """Encode a CFR power trace into semantic bases.

    Non-convergence is not an error: after ``max_outer_iterations`` growth
    steps (or at ``max_order``) the best code found is returned with its
    achieved error.
    """
    denoised = pca_denoise(trace, config)
    centered, mean_power = remove_dc(denoised)
    fs = centered.sample_rate_hz
    n = len(centered)
    bin_hz = fs / n
    if _rms(centered.samples) == 0:
        return SemanticCode((SemanticBasis(0.0, 0.0, 0.0),), mean_power, 0.0, fs, n, (0.0,))

    _, seeds = estimate_order(centered, config)
    seeds = seeds[: max(1, (n - 1) // 3)]
    bases, err = _fit_distinct(centered, seeds, config, bin_hz)
    history = [err]
    t = np.arange(n) / fs

    iteration = 0
    while err > config.fit_error_threshold and len(bases) < config.max_order:
        iteration += 1
        if iteration > config.max_outer_iterations or 3 * (len(bases) + 1) >= n:
            break
        resid = centered.samples - sum_of_sines(_pack(bases), t)
        seed = _residual_seed(resid, fs, bases, bin_hz, config)
        if seed is None:
            break
        try:
            cand, cand_err = lm_fit(centered, list(bases) + [seed], config)
        except DegenerateFitError:
            break
        if _collisions(cand, bin_hz) or cand_err > err:
            logger.debug("order growth rejected at order %d", len(cand))
            break
        bases, err = cand, cand_err
        history.append(err)

    return SemanticCode(tuple(bases), mean_power, err, fs, n, tuple(history))


def reconstruct(code: SemanticCode) -> CfrPowerTrace:
    t = np.arange(code.trace_len) / code.sample_rate_hz
    samples = code.mean_power + sum_of_sines(_pack(code.bases), t)
    return CfrPowerTrace(samples, code.sample_rate_hz)


# ---------------------------------------------------------------------------
# Payload
# ---------------------------------------------------------------------------

def header_bits(config: CodecConfig = CodecConfig()) -> int:
    return ORDER_BITS + TRACE_LEN_BITS + 2 * config.feature_bits_per_value


def payload_bits(code: SemanticCode, config: CodecConfig = CodecConfig()) -> int:
    return code.order * 3 * config.feature_bits_per_value + header_bits(config)


def to_bytes(code: SemanticCode, config: CodecConfig = CodecConfig()) -> bytes:
    fc = _FLOAT_CODES[config.feature_bits_per_value]
    if code.trace_len >= 2 ** TRACE_LEN_BITS:
        raise PayloadError(f"trace_len {code.trace_len} does not fit in {TRACE_LEN_BITS} bits")
    if code.order >= 2 ** ORDER_BITS:
        raise PayloadError(f"order {code.order} does not fit in {ORDER_BITS} bits")
    fmt = "<B" + fc + "H" + fc + fc * (3 * code.order)
    values = [code.order, code.mean_power, code.trace_len, code.sample_rate_hz]
    values += list(_pack(code.bases))
    return struct.pack(fmt, *values)


def to_bits(code: SemanticCode, config: CodecConfig = CodecConfig()) -> np.ndarray:
    return np.unpackbits(np.frombuffer(to_bytes(code, config), dtype=np.uint8), bitorder="little")


def from_bits(bits: np.ndarray, config: CodecConfig = CodecConfig(), *,
              sample_rate_hint: Optional[float] = None, repair: bool = True) -> Optional[SemanticCode]:
    """Decode a packed payload, optionally repairing channel corruption.

    The number of bases is taken from the payload length, not the (possibly
    corrupted) order byte.  With ``repair``, bases with non-finite values,
    amplitude outside (0, 1e6] or frequency outside [0, fs/2] are dropped;
    if none survive, None is returned (an abstaining link).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    b = config.feature_bits_per_value
    n_bases, rem = divmod(bits.size - header_bits(config), 3 * b)
    if rem or n_bases < 0:
        raise PayloadError(f"payload of {bits.size} bits does not match the code layout")
    raw = np.packbits(bits, bitorder="little").tobytes()
    fc = _FLOAT_CODES[b]
    fmt = "<B" + fc + "H" + fc + fc * (3 * n_bases)
    order, mean_power, trace_len, fs, *rest = struct.unpack(fmt, raw)
    params = np.array(rest, dtype=float).reshape(-1, 3)

    if not repair:
        if order != n_bases:
            raise PayloadError("order byte disagrees with payload length")
        bases = [SemanticBasis.canonical(*row) for row in params]
        return SemanticCode(tuple(bases), mean_power, float("nan"), fs, trace_len)

    if not (np.isfinite(fs) and 0 < fs <= 1e6):
        if sample_rate_hint is None:
            return None
        fs = float(sample_rate_hint)
    if not np.isfinite(mean_power):
        mean_power = 0.0
    with np.errstate(invalid="ignore"):
        ok = (np.all(np.isfinite(params), axis=1)
              & (params[:, 0] > 0) & (params[:, 0] <= 1e6)
              & (params[:, 1] >= 0) & (params[:, 1] <= fs / 2))
    bases = [SemanticBasis(float(a), float(f), float(_wrap_phase(th))) for a, f, th in params[ok]]
    if not bases:
        return None
    bases.sort(key=lambda x: -x.amplitude)
    return SemanticCode(tuple(bases), float(mean_power), float("nan"), float(fs), int(trace_len))
