"""Independent reference computations used by the tests.

None of these call into the package's numerical code paths: closed forms
use mpmath or textbook expressions, and simulation oracles draw their own
samples.
"""

from __future__ import annotations

from math import comb

import mpmath
import numpy as np


# -- codec ------------------------------------------------------------------

def dft_peak_freq(x: np.ndarray, fs: float) -> float:
    """Frequency of the largest non-DC bin via an explicit O(N^2) DFT."""
    n = x.size
    k = np.arange(n // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, np.arange(n)) / n)
    mag = np.abs(basis @ (x - x.mean()))
    mag[0] = 0
    return float(k[np.argmax(mag)] * fs / n)


def payload_size(order: int, b: int = 32) -> int:
    return order * 3 * b + 8 + b + 16 + b


# -- semantic space ---------------------------------------------------------

def knn_full_sort(coords: np.ndarray, labels, scales, q: np.ndarray, k: int):
    """Labels of the k nearest points by a full stable sort of (distance, index)."""
    d = np.sqrt((((coords - q) / scales) ** 2).sum(axis=1))
    order = sorted(range(len(d)), key=lambda i: (d[i], i))
    return [labels[i] for i in order[:k]]


# -- channel ----------------------------------------------------------------

def rayleigh_bpsk_bep(mean_snr: float) -> float:
    return 0.5 * (1.0 - np.sqrt(mean_snr / (1.0 + mean_snr)))


def rayleigh_spectral_efficiency(mean_snr: float) -> float:
    """E[log2(1+Z)], Z ~ Exp(mean): log2(e) e^(1/g) E1(1/g)."""
    g = mpmath.mpf(mean_snr)
    return float(mpmath.exp(1 / g) * mpmath.e1(1 / g) / mpmath.log(2))


def gamma_snr_bep_tau2_one(tau1: float, shape: float, scale: float) -> float:
    """For tau2 = 1 the conditional BEP is exp(-tau1 g)/2; its Gamma average is the MGF."""
    return 0.5 * (1.0 + tau1 * scale) ** (-shape)


# -- contest ----------------------------------------------------------------

def capability_from_rate(rate, bits=7200.0, t_fixed=9.797e-3 + 5e-3):
    return 1.0 / (bits / np.asarray(rate, dtype=float) + t_fixed)


def rank_sim_expected_award(focal_rate: float, prizes, n_transmitters: int, delta: float,
                            n_trials: int, seed: int, util=lambda r: r) -> float:
    """Draw rival rates uniform on (0, delta); rank by capability; average u(prize)."""
    rng = np.random.default_rng(seed)
    rivals = rng.uniform(0, delta, size=(n_trials, n_transmitters - 1))
    better = (capability_from_rate(rivals) > capability_from_rate(focal_rate)).sum(axis=1)
    u = np.array([util(p) if p > 0 else 0.0 for p in prizes] + [0.0] * n_transmitters)
    return float(u[better].mean())


def best_response_effort(focal_rate: float, prizes, n_transmitters: int = 3, delta: float = 8e6,
                         n_rivals: int = 400_000, f_grid_points: int = 200_001) -> tuple:
    """Best response of one transmitter when every rival plays a monotone equilibrium.

    Rival rates form a stratified (midpoint) uniform sample on (0, delta).
    Their capabilities give an empirical capability CDF; the rivals' common
    effort schedule is the integral form of the equilibrium computed from
    that empirical CDF by trapezoids.  The focal transmitter then picks the
    effort on a fine grid maximizing  R_hat(f) - f / a, where R_hat(f) uses
    the exact rank probabilities implied by the empirical share of rivals
    with lower effort.  Returns (best effort, capability).
    """
    u = (np.arange(n_rivals) + 0.5) / n_rivals * delta
    caps = np.sort(capability_from_rate(u))
    m = np.arange(1, len(prizes) + 1)
    coef = np.array([comb(n_transmitters - 1, k - 1) for k in m], dtype=float)
    prizes = np.asarray(prizes, dtype=float)

    def award_given_share(p):
        p = np.asarray(p, dtype=float)[..., None]
        return (coef * p ** (n_transmitters - m) * (1 - p) ** (m - 1)) @ prizes

    # rivals' schedule: f(a) = a R(a) - int_0^a R, with R from the empirical CDF
    grid_a = np.concatenate([[0.0], caps])
    share = np.arange(grid_a.size) / n_rivals
    r_hat = award_given_share(np.clip(share, 0, 1))
    area = np.concatenate([[0.0], np.cumsum(0.5 * (r_hat[1:] + r_hat[:-1]) * np.diff(grid_a))])
    rival_effort = np.sort(grid_a * r_hat - area)[1:]

    a = float(capability_from_rate(focal_rate))
    f_ref = np.interp(a, grid_a, grid_a * r_hat - area)
    f_grid = np.linspace(0.5 * f_ref, 1.5 * f_ref, f_grid_points)
    p = np.searchsorted(rival_effort, f_grid, side="left") / n_rivals
    payoff = award_given_share(p) - f_grid / a
    return float(f_grid[int(np.argmax(payoff))]), a
