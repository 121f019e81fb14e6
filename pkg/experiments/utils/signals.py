"""
Seeded test-signal generation and observation models.

Every generator takes an explicit seed and draws from its own
``numpy.random.Generator``, so trials are reproducible and independent of
execution order.
"""

import math

import numpy as np
import scipy.fft
import scipy.special

from gme.exceptions import InputError, ParameterError

JUMP_FRACTIONS = (0.15, 0.3, 0.5, 0.7, 0.85)
LEVEL_RANGE = (8.0, 38.0)
PEAK_AMPLITUDE = 0.8


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_piecewise_constant(n: int, seed: int = 0) -> np.ndarray:
    """
    Six-segment piecewise-constant signal with jumps at fixed fractions of n.

    Levels are uniform in [8, 38] and adjacent levels always differ, so the
    signal has exactly five jumps and stays inside [5, 40].
    """
    if n < 12:
        raise InputError(f"Piecewise-constant signal needs n >= 12, got {n}")
    rng = _rng(seed)
    levels = [rng.uniform(*LEVEL_RANGE)]
    while len(levels) < len(JUMP_FRACTIONS) + 1:
        level = rng.uniform(*LEVEL_RANGE)
        if abs(level - levels[-1]) > 1.0:
            levels.append(level)

    jumps = [int(math.floor(f * n + 0.5)) for f in JUMP_FRACTIONS]
    x = np.empty(n)
    edges = [0] + jumps + [n]
    for level, start, stop in zip(levels, edges[:-1], edges[1:]):
        x[start:stop] = level
    return x


def sample_poisson(x, seed: int = 0) -> np.ndarray:
    """Independent Poisson counts with means x (as floats)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise InputError("Poisson means must be positive and finite")
    return _rng(seed).poisson(x).astype(float)


def gen_dct_sparse(n: int, k: int = 16, seed: int = 0) -> np.ndarray:
    """Inverse DCT of k random standard-normal coefficients, scaled to max |x| = 0.8."""
    if not 1 <= k <= n:
        raise InputError(f"Sparsity must lie in [1, {n}], got {k}")
    rng = _rng(seed)
    coefficients = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    coefficients[support] = rng.standard_normal(k)
    x = scipy.fft.idct(coefficients, type=2, norm='ortho')
    return x * (PEAK_AMPLITUDE / np.max(np.abs(x)))


def chi_mean(m: int) -> float:
    """E||e|| for e ~ N(0, I_m): sqrt(2) Gamma((m+1)/2) / Gamma(m/2)."""
    return math.sqrt(2.0) * math.exp(scipy.special.gammaln((m + 1) / 2.0) - scipy.special.gammaln(m / 2.0))


def noise_scale_for_snr(x, snr_db: float, m: int = None) -> float:
    """Noise standard deviation s with 20 log10(||x|| / E||noise||) = snr_db."""
    x = np.asarray(x, dtype=float)
    m = x.size if m is None else m
    return float(np.linalg.norm(x)) * 10.0 ** (-snr_db / 20.0) / chi_mean(m)


def clip_observe(x, clip_level: float, noise_scale: float, seed: int = 0) -> np.ndarray:
    """clip(x + noise) with N(0, s^2) noise and saturation at +-clip_level."""
    if not clip_level > 0:
        raise ParameterError(f"Clip level must be positive, got {clip_level}")
    if noise_scale < 0:
        raise ParameterError(f"Noise scale must be nonnegative, got {noise_scale}")
    x = np.asarray(x, dtype=float)
    noisy = x + noise_scale * _rng(seed).standard_normal(x.size) if noise_scale > 0 else x.copy()
    return np.clip(noisy, -clip_level, clip_level)
