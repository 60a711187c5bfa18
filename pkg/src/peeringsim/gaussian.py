"""Gaussian probability kernels used by the market model.

Everything here is deterministic: the bivariate normal CDF uses fixed
Gauss-Legendre rules (Drezner-Wesolowsky integrand with Genz's high
correlation expansion), so repeated evaluation is bit-stable.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtr

SQRT_2PI = np.sqrt(2.0 * np.pi)

# Standardized values beyond this underflow to exactly 0/1 in the normal
# CDF and pdf; clipping keeps exp() arguments finite for extreme prices.
Z_CLIP = 40.0

# Gauss-Legendre half-rules used by the bivariate CDF, keyed by |rho| tier.
_GL6_W = np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])
_GL6_X = np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])
_GL12_W = np.array([
    0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
    0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
])
_GL12_X = np.array([
    0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
    0.5873179542866171, 0.3678314989981802, 0.1252334085114692,
])
_GL20_W = np.array([
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
])
_GL20_X = np.array([
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
    0.07652652113349733,
])


def norm_cdf(x):
    return ndtr(x)


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI


def bvn_upper(h, k, rho: float):
    """P[X >= h, Y >= k] for standard bivariate normal with correlation rho.

    ``h`` and ``k`` broadcast; ``rho`` is scalar. Accuracy is ~1e-15 for
    |rho| < 0.925 and better than 5e-11 otherwise.
    """
    h = np.clip(np.asarray(h, dtype=float), -Z_CLIP, Z_CLIP)
    k = np.clip(np.asarray(k, dtype=float), -Z_CLIP, Z_CLIP)
    h, k = np.broadcast_arrays(h, k)
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")

    if rho == 1.0:
        return ndtr(-np.maximum(h, k))
    if rho == -1.0:
        return np.maximum(0.0, ndtr(-h) - ndtr(k))

    ar = abs(rho)
    if ar < 0.3:
        w, x = _GL6_W, _GL6_X
    elif ar < 0.75:
        w, x = _GL12_W, _GL12_X
    else:
        w, x = _GL20_W, _GL20_X

    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = np.arcsin(rho)
        # integrate over both symmetric half-nodes; accumulate per node to
        # keep temporaries small on large price grids
        sn_all = np.concatenate([np.sin(asr * (1.0 - x) / 2.0),
                                 np.sin(asr * (1.0 + x) / 2.0)])
        ws_all = np.concatenate([w, w])
        bvn = np.zeros_like(h)
        for sn, wi in zip(sn_all, ws_all):
            bvn += wi * np.exp((sn * hk - hs) / (1.0 - sn * sn))
        return bvn * asr / (4.0 * np.pi) + ndtr(-h) * ndtr(-k)

    # |rho| >= 0.925: Genz's expansion about rho = +/-1
    if rho < 0.0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    if ar < 1.0:
        asq = (1.0 - rho) * (1.0 + rho)
        a = np.sqrt(asq)
        bs = np.square(h - k)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr0 = -(bs / asq + hk) / 2.0
        mask = asr0 > -100.0
        bvn = np.where(
            mask,
            a * np.exp(asr0) * (1.0 - c * (bs - asq) * (1.0 - d * bs / 5.0) / 3.0
                                + c * d * asq * asq / 5.0),
            0.0,
        )
        mask = -hk < 100.0
        b = np.sqrt(bs)
        sp = SQRT_2PI * ndtr(-b / a)
        bvn = bvn - np.where(
            mask,
            np.exp(np.where(mask, -hk / 2.0, 0.0)) * sp * b
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
            0.0,
        )
        a_half = a / 2.0
        for xi, wi in zip(np.concatenate([x, -x]), np.concatenate([w, w])):
            xs = np.square(a_half * (xi + 1.0))
            rs = np.sqrt(1.0 - xs)
            asr1 = -(bs / xs + hk) / 2.0
            mask = asr1 > -100.0
            sp = 1.0 + c * xs * (1.0 + d * xs)
            ep = np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
            bvn = bvn + np.where(mask, a_half * wi * np.exp(np.where(mask, asr1, 0.0)) * (ep - sp), 0.0)
        bvn = -bvn / (2.0 * np.pi)
    if rho > 0.0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        bvn = -bvn + np.where(k > h, ndtr(k) - ndtr(h), 0.0)
    return np.clip(bvn, 0.0, 1.0)


def bvn_lower(h, k, rho: float):
    """P[X <= h, Y <= k] for standard bivariate normal with correlation rho."""
    return bvn_upper(-np.asarray(h, dtype=float), -np.asarray(k, dtype=float), rho)


def upper_orthant_excess(h, k, rho: float):
    """E[(Y - k) 1{X > h, Y > k}] for standard bivariate normal.

    Closed form from the partial first moment of the truncated bivariate
    normal; used for aggregate-surplus integrands.
    """
    h = np.clip(np.asarray(h, dtype=float), -Z_CLIP, Z_CLIP)
    k = np.clip(np.asarray(k, dtype=float), -Z_CLIP, Z_CLIP)
    rho = float(rho)
    s = np.sqrt(max(1.0 - rho * rho, 1e-300))
    ymom = (norm_pdf(k) * ndtr(-(h - rho * k) / s)
            + rho * norm_pdf(h) * ndtr(-(k - rho * h) / s))
    return ymom - k * bvn_upper(h, k, rho)


@lru_cache(maxsize=32)
def gauss_legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def panel_nodes(lo, hi, panels: int, order: int):
    """Composite Gauss-Legendre nodes/weights on [lo, hi].

    ``lo``/``hi`` may be arrays (per-point integration bounds); returned
    arrays have shape ``lo.shape + (panels * order,)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, w = gauss_legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    starts = edges[:-1]
    width = 1.0 / panels
    # unit-interval nodes, then affine map to [lo, hi]
    u = (starts[:, None] + width * (x[None, :] + 1.0) / 2.0).ravel()
    wu = np.tile(w * width / 2.0, panels)
    span = (hi - lo)[..., None]
    return lo[..., None] + span * u, span * wu
