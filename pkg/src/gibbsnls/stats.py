"""Two-sample tests and small fitting helpers."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st


def ks_two_sample(a, b) -> tuple[float, float]:
    """Classical two-sample KS (exact/asymptotic p-value from scipy)."""
    res = _st.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return float(res.statistic), float(res.pvalue)


def _normalize(w, n):
    if w is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be nonnegative, one per value, not all zero")
    return w / w.sum()


def _ecdf_gap(order, from_a, wa, wb, ends):
    """sup |F_A - F_B| over the pooled sorted values (tie-group ends only)."""
    fa = np.cumsum(np.take(np.where(from_a, wa, 0.0), order, axis=-1), axis=-1)
    fb = np.cumsum(np.take(np.where(from_a, 0.0, wb), order, axis=-1), axis=-1)
    return fa[..., ends], fb[..., ends]


def weighted_ks(a, b, wa=None, wb=None, resamples: int = 1000,
                seed=0) -> tuple[float, float]:
    """Two-sample KS for weighted samples with a bootstrap p-value.

    The statistic is D = sup |F_A - F_B| for self-normalized weighted ECDFs.
    Each resample draws member counts within each batch by multinomial
    resampling, renormalizes the weights, and records the centered statistic
    sup |(F*_A - F_A) - (F*_B - F_B)|.  p = (1 + #{D* >= D}) / (1 + resamples).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    wa = _normalize(wa, na)
    wb = _normalize(wb, nb)
    pooled = np.concatenate([a, b])
    from_a = np.concatenate([np.ones(na, bool), np.zeros(nb, bool)])
    order = np.argsort(pooled, kind="stable")
    sorted_vals = pooled[order]
    ends = np.flatnonzero(np.append(sorted_vals[1:] != sorted_vals[:-1], True))
    wa_full = np.concatenate([wa, np.zeros(nb)])
    wb_full = np.concatenate([np.zeros(na), wb])
    fa, fb = _ecdf_gap(order, from_a, wa_full, wb_full, ends)
    D = float(np.max(np.abs(fa - fb)))
    if resamples <= 0:
        return D, math.nan
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    hits = 0
    block = max(1, min(resamples, 4_000_000 // (na + nb)))
    done = 0
    while done < resamples:
        r = min(block, resamples - done)
        ca = rng.multinomial(na, np.full(na, 1.0 / na), size=r)
        cb = rng.multinomial(nb, np.full(nb, 1.0 / nb), size=r)
        sa = ca * wa
        sb = cb * wb
        sa /= sa.sum(axis=1, keepdims=True)
        sb /= sb.sum(axis=1, keepdims=True)
        wa_r = np.concatenate([sa, np.zeros((r, nb))], axis=1)
        wb_r = np.concatenate([np.zeros((r, na)), sb], axis=1)
        ga, gb = _ecdf_gap(order, from_a, wa_r, wb_r, ends)
        dstar = np.max(np.abs((ga - fa) - (gb - fb)), axis=1)
        hits += int(np.sum(dstar >= D))
        done += r
    return D, (1 + hits) / (1 + resamples)


def bonferroni(pvalues, level: float) -> tuple[float, list[bool]]:
    """Per-test threshold and the rejection flags."""
    thr = level / max(1, len(pvalues))
    return thr, [p < thr for p in pvalues]


def fit_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and its standard error."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2:
        raise ValueError("need at least two points")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    if x.size > 2:
        sigma2 = float(np.sum((y - A @ coef) ** 2)) / (x.size - 2)
        se = math.sqrt(sigma2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = math.nan
    return float(coef[0]), se
