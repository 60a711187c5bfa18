"""Independent cross-checks: Monte Carlo demand/surplus and brute-force grids.

These estimators deliberately avoid the quadrature code paths in
:mod:`peeringsim.market`: consumers are sampled and classified one by one
through the same argmax rule as :func:`market.consumer_choice`, so any
disagreement beyond sampling error points at the quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import ConsumerPopulation, PriceVector

_CHUNK = 2_000_000


def classify_choices(b, p, v, prices: PriceVector) -> np.ndarray:
    """Vectorized argmax choice; codes 0=none, 1=basic, 2=premium, 3=video.

    Ties resolve toward the richer bundle, matching consumer_choice.
    """
    b = np.asarray(b, dtype=float)
    s_video = b + p + v - prices.p_basic - prices.p_premium_increment - prices.p_video
    s_prem = b + p - prices.p_basic - prices.p_premium_increment
    s_basic = b - prices.p_basic
    stacked = np.stack([s_video, s_prem, s_basic, np.zeros_like(b)])
    # argmax returns the first of equal maxima = highest-priority option
    return 3 - np.argmax(stacked, axis=0)


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error, per quantity."""

    shares: np.ndarray        # (3,) basic, premium-only, premium+video
    shares_se: np.ndarray
    surplus: np.ndarray       # (3,) per-consumer expected surplus by option
    surplus_se: np.ndarray
    n_samples: int


def mc_market_estimate(pop: ConsumerPopulation, prices: PriceVector,
                       n_samples: int, seed: int) -> McEstimate:
    """Sample utilities, classify, and average shares and surplus."""
    rng = np.random.default_rng(seed)
    counts = np.zeros(4, dtype=np.int64)
    cs_sum = np.zeros(3)
    cs_sqsum = np.zeros(3)
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        b = rng.normal(pop.mu_b, pop.sigma_b, m)
        p = rng.normal(pop.mu_p, pop.sigma_p, m)
        v = rng.normal(pop.mu_v, pop.sigma_v, m)
        codes = classify_choices(b, p, v, prices)
        counts += np.bincount(codes, minlength=4)
        surplus = np.stack([
            b - prices.p_basic,
            b + p - prices.p_basic - prices.p_premium_increment,
            b + p + v - prices.p_bundle_total,
        ])
        for i in range(3):
            contrib = np.where(codes == i + 1, surplus[i], 0.0)
            cs_sum[i] += contrib.sum()
            cs_sqsum[i] += np.square(contrib).sum()
        done += m

    n = float(n_samples)
    shares = counts[1:4] / n
    shares_se = np.sqrt(np.maximum(shares * (1.0 - shares), 0.0) / n)
    cs_mean = cs_sum / n
    cs_var = np.maximum(cs_sqsum / n - cs_mean**2, 0.0)
    cs_se = np.sqrt(cs_var / n)
    return McEstimate(shares, shares_se, cs_mean, cs_se, n_samples)


def grid_maximum(objective, axes) -> tuple[np.ndarray, float]:
    """Evaluate a vectorized objective on a dense grid; return argmax.

    ``axes`` is a sequence of 1-D arrays; ``objective`` receives the
    mesh as separate flat arrays and must return a flat array.
    """
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = [m.ravel() for m in mesh]
    values = objective(*flat)
    idx = int(np.argmax(values))
    return np.array([f[idx] for f in flat]), float(values[idx])
