"""Sensing-data market: capability, rival beliefs, awards and equilibrium effort.

Each transmitter's capability is the inverse of one sense/encode/send/recognize
cycle.  Rivals' data rates are believed uniform on (0, delta), which induces a
closed-form CDF over rival capability.  Equilibrium effort follows from the
first-order condition f'(a) = a R'(a), integrated by parts to
f*(a) = a R(a) - int_0^a R(y) dy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np
from scipy import integrate


class InvalidMarketError(ValueError):
    pass


class DegenerateCoefficientsError(ValueError):
    pass


class ContestQuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransmitterProfile:
    data_rate_bps: float
    semantic_encode_time_s: float = 9.797e-3
    recog_time_semantic_s: float = 5e-3
    recog_time_raw_s: Optional[float] = None
    raw_bits: float = 96000
    semantic_bits: float = 7200

    def __post_init__(self):
        vals = (self.data_rate_bps, self.semantic_encode_time_s, self.recog_time_semantic_s,
                self.raw_bits, self.semantic_bits)
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise InvalidMarketError(f"profile fields must be positive: {self}")
        if self.recog_time_raw_s is not None and not self.recog_time_raw_s > 0:
            raise InvalidMarketError("recog_time_raw_s must be positive")

    @property
    def raw_recog_time(self) -> float:
        return self.recog_time_semantic_s if self.recog_time_raw_s is None else self.recog_time_raw_s


@dataclass(frozen=True)
class MarketConfig:
    n_transmitters: int = 3
    n_awards: int = 2
    total_award: float = 10.0
    delta: float = 8e6
    risk: str = "neutral"
    use_semantic: bool = True

    def __post_init__(self):
        if not 1 <= self.n_awards <= self.n_transmitters:
            raise InvalidMarketError(f"need 1 <= n_awards <= n_transmitters, got {self.n_awards}/{self.n_transmitters}")
        if not self.total_award > 0:
            raise InvalidMarketError("total_award must be positive")
        if not self.delta > 0:
            raise InvalidMarketError("delta must be positive")
        if self.risk not in ("neutral", "averse"):
            raise InvalidMarketError(f"risk must be 'neutral' or 'averse', got {self.risk!r}")

    def utility(self, prizes) -> np.ndarray:
        """u(r); a zero prize contributes nothing under log utility."""
        r = np.asarray(prizes, dtype=float)
        if self.risk == "neutral":
            return r
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.log(r[pos])
        return out


@dataclass(frozen=True)
class AwardScheme:
    prizes: tuple

    def __post_init__(self):
        p = np.asarray(self.prizes, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidMarketError("prizes must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidMarketError("prizes must be finite and non-negative")
        if np.any(np.diff(p) > 1e-12):
            raise InvalidMarketError(f"prizes must be non-increasing: {tuple(p)}")
        object.__setattr__(self, "prizes", tuple(float(x) for x in p))

    @classmethod
    def winner_take_all(cls, total: float, n_awards: int) -> "AwardScheme":
        return cls((total,) + (0.0,) * (n_awards - 1))

    @classmethod
    def uniform(cls, total: float, n_awards: int) -> "AwardScheme":
        return cls((total / n_awards,) * n_awards)

    @classmethod
    def first_prize_share(cls, total: float, share: float, n_awards: int = 2) -> "AwardScheme":
        """First prize gets ``share``; the rest is split evenly over the other ranks."""
        if n_awards == 1:
            return cls((total,))
        rest = total * (1 - share) / (n_awards - 1)
        return cls((total * share,) + (rest,) * (n_awards - 1))

    def check_budget(self, total: float) -> None:
        if sum(self.prizes) > total + 1e-12:
            raise InvalidMarketError(f"prizes sum {sum(self.prizes)} exceeds budget {total}")


@dataclass
class EffortResult:
    per_transmitter_effort: np.ndarray
    capabilities: np.ndarray
    total_effort: float
    expected_awards: np.ndarray
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def to_json(self, scheme: AwardScheme) -> dict:
        return {
            "scheme": list(scheme.prizes),
            "per_transmitter": [
                {"capability": float(a), "effort": float(f), "expected_award": float(r), "clamped": bool(c)}
                for a, f, r, c in zip(self.capabilities, self.per_transmitter_effort,
                                      self.expected_awards, self.clamped)
            ],
            "total_effort": float(self.total_effort),
        }


@dataclass(frozen=True)
class RivalBelief:
    """Parameters of the rival-capability CDF: payload bits, fixed cycle time and delta."""
    bits: float
    fixed_time_s: float
    delta: float

    @classmethod
    def from_profile(cls, profile: TransmitterProfile, cfg: MarketConfig) -> "RivalBelief":
        if cfg.use_semantic:
            return cls(profile.semantic_bits,
                       profile.semantic_encode_time_s + profile.recog_time_semantic_s, cfg.delta)
        return cls(profile.raw_bits, profile.raw_recog_time, cfg.delta)

    @property
    def a_max(self) -> float:
        return 1.0 / (self.bits / self.delta + self.fixed_time_s)

    def cdf(self, a):
        return capability_cdf(a, self.bits, self.fixed_time_s, self.delta)


def capability(profile: TransmitterProfile, cfg: MarketConfig) -> float:
    if profile.data_rate_bps > cfg.delta:
        raise InvalidMarketError(f"data rate {profile.data_rate_bps} exceeds delta {cfg.delta}")
    if cfg.use_semantic:
        cycle = (profile.semantic_bits / profile.data_rate_bps + profile.semantic_encode_time_s
                 + profile.recog_time_semantic_s)
    else:
        cycle = profile.raw_bits / profile.data_rate_bps + profile.raw_recog_time
    return 1.0 / cycle


def capability_cdf(a, bits: float, fixed_time_s: float, delta: float):
    """G(a) = a*bits / (delta * (1 - a*T)) on its support, clipped to [0, 1].

    ``fixed_time_s`` is T_S + T_P for the semantic pipeline (T_P alone for raw).
    """
    a = np.asarray(a, dtype=float)
    a_max = 1.0 / (bits / delta + fixed_time_s)
    inside = (a > 0) & (a < a_max)
    safe = np.where(inside, a, 0.0)
    g = np.where(inside, safe * bits / (delta * (1.0 - safe * fixed_time_s)), np.where(a >= a_max, 1.0, 0.0))
    g = np.clip(g, 0.0, 1.0)
    return float(g) if g.ndim == 0 else g


def rank_weights(g, n_transmitters: int, n_awards: int) -> np.ndarray:
    """B_m(G) = C(N-1, m-1) G^(N-m) (1-G)^(m-1) for m = 1..n_awards; shape (..., n_awards)."""
    g = np.asarray(g, dtype=float)[..., None]
    m = np.arange(1, n_awards + 1)
    coef = np.array([comb(n_transmitters - 1, k - 1) for k in m], dtype=float)
    return coef * g ** (n_transmitters - m) * (1.0 - g) ** (m - 1)


def expected_award(a, scheme: AwardScheme, cfg: MarketConfig, belief: RivalBelief):
    u = cfg.utility(scheme.prizes)
    if len(u) > cfg.n_awards:
        raise InvalidMarketError(f"scheme has {len(u)} prizes but n_awards = {cfg.n_awards}")
    b = rank_weights(belief.cdf(a), cfg.n_transmitters, len(u))
    r = b @ u
    return float(r) if np.ndim(r) == 0 else r


def _integral(fn, a: float, belief: RivalBelief, scale: float) -> float:
    """int_0^a fn(y) dy; the tolerance is 1e-9 relative to ``scale``."""
    if a <= 0:
        return 0.0
    tol = 1e-9 * max(abs(scale), 1e-300)
    val, err, info, *_ = integrate.quad(fn, 0.0, a, epsabs=tol, epsrel=0.0, limit=500, full_output=1)
    if not np.isfinite(val) or err > 10 * tol:
        raise ContestQuadratureError(f"integral did not converge (err={err:.3g}, tol={tol:.3g})")
    return float(val)


def _effort_raw(a: float, scheme: AwardScheme, cfg: MarketConfig, belief: RivalBelief) -> float:
    ra = expected_award(a, scheme, cfg, belief)
    area = _integral(lambda y: expected_award(y, scheme, cfg, belief), a, belief, a * ra)
    return a * ra - area


def optimal_effort(profile: TransmitterProfile, scheme: AwardScheme, cfg: MarketConfig) -> float:
    a = capability(profile, cfg)
    return max(0.0, _effort_raw(a, scheme, cfg, RivalBelief.from_profile(profile, cfg)))


def prize_coefficients(profile: TransmitterProfile, cfg: MarketConfig) -> np.ndarray:
    """F_m = a B_m(a) - int_0^a B_m(y) dy for m = 1..n_awards."""
    belief = RivalBelief.from_profile(profile, cfg)
    a = capability(profile, cfg)
    ba = rank_weights(belief.cdf(a), cfg.n_transmitters, cfg.n_awards)
    out = np.empty(cfg.n_awards)
    for m in range(cfg.n_awards):
        area = _integral(lambda y: rank_weights(belief.cdf(y), cfg.n_transmitters, cfg.n_awards)[m],
                         a, belief, max(a * ba[m], a * ba.max()))
        out[m] = a * ba[m] - area
    return out


def optimal_awards(profiles: Sequence[TransmitterProfile], cfg: MarketConfig) -> AwardScheme:
    """Winner-take-all for risk-neutral agents; prizes proportional to the
    aggregate coefficients for log-utility agents.

    Ranks whose aggregate coefficient is not positive get no prize: with
    u(0) = 0 any positive prize there would lower total effort.
    """
    if cfg.risk == "neutral":
        return AwardScheme.winner_take_all(cfg.total_award, cfg.n_awards)
    s = np.sum([prize_coefficients(p, cfg) for p in profiles], axis=0)
    pos = s > 0
    if not np.any(pos):
        raise DegenerateCoefficientsError(f"no positive aggregate prize coefficient: {s}")
    prizes = np.where(pos, s, 0.0) / s[pos].sum() * cfg.total_award
    try:
        return AwardScheme(tuple(prizes))
    except InvalidMarketError as exc:
        raise DegenerateCoefficientsError(f"coefficient-proportional prizes not ordered: {prizes}") from exc


def market_summary(profiles: Sequence[TransmitterProfile], cfg: MarketConfig, scheme: AwardScheme) -> EffortResult:
    scheme.check_budget(cfg.total_award)
    caps, efforts, awards, clamped = [], [], [], []
    for p in profiles:
        belief = RivalBelief.from_profile(p, cfg)
        a = capability(p, cfg)
        raw = _effort_raw(a, scheme, cfg, belief)
        caps.append(a)
        efforts.append(max(0.0, raw))
        clamped.append(raw < 0)
        awards.append(expected_award(a, scheme, cfg, belief))
    efforts = np.array(efforts)
    return EffortResult(efforts, np.array(caps), float(efforts.sum()), np.array(awards), np.array(clamped))


def reference_profiles(rates_bps=(7e6, 6e6, 5e6), **kw) -> list:
    return [TransmitterProfile(data_rate_bps=float(c), **kw) for c in rates_bps]


def share_sweep(profiles, cfg: MarketConfig, shares=(0.5, 0.6, 0.7, 0.8, 0.9, 1.0)) -> list:
    rows = []
    for s in shares:
        scheme = AwardScheme.first_prize_share(cfg.total_award, s, cfg.n_awards)
        rows.append({"first_prize_share": float(s),
                     "total_effort": market_summary(profiles, cfg, scheme).total_effort})
    return rows


def n_awards_sweep(profiles, cfg: MarketConfig) -> list:
    """Optimal scheme and total effort for every N_A = 1..N_T."""
    rows = []
    for n_a in range(1, cfg.n_transmitters + 1):
        sub = MarketConfig(cfg.n_transmitters, n_a, cfg.total_award, cfg.delta, cfg.risk, cfg.use_semantic)
        scheme = optimal_awards(profiles, sub)
        res = market_summary(profiles, sub, scheme)
        rows.append({"n_awards": n_a, "scheme": list(scheme.prizes), "total_effort": res.total_effort,
                     "total_expected_award": float(res.expected_awards.sum())})
    return rows


def write_share_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=("first_prize_share", "total_effort"))
        w.writeheader()
        for row in rows:
            w.writerow(row)


def write_market_json(path, result: EffortResult, scheme: AwardScheme) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_json(scheme), fh, indent=2)
