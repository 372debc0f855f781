"""Truncated polynomial series in (ζ, ζ̄) for maps of the unit disc.

A vector series of ``n`` components is an array ``c[j, k, i]`` holding the
coefficient of ``ζ^j ζ̄^k`` in component ``i``; entries with ``j + k`` above
the truncation degree are kept at zero.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def degree_mask(K: int) -> np.ndarray:
    j, k = np.indices((K + 1, K + 1))
    return (j + k) <= K


def mul(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """Product of two scalar series, truncated at total degree ``K``.

    Zero-padded 2-D FFT convolution; the padding excludes wrap-around.
    """
    size = 2 * K + 2
    out = np.fft.ifft2(np.fft.fft2(a, (size, size)) * np.fft.fft2(b, (size, size)))
    out = out[: K + 1, : K + 1]
    out[~degree_mask(K)] = 0
    return out


def conj(a: np.ndarray) -> np.ndarray:
    """Series of the complex conjugate (swap ζ and ζ̄)."""
    return np.conj(np.swapaxes(a, 0, 1))


def d_zeta(a: np.ndarray) -> np.ndarray:
    K = a.shape[0] - 1
    out = np.zeros_like(a)
    j = np.arange(1, K + 1).reshape((-1,) + (1,) * (a.ndim - 1))
    out[:-1] = j * a[1:]
    return out


def d_zetabar(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(d_zeta(np.swapaxes(a, 0, 1)), 0, 1)


def cauchy_green(a: np.ndarray) -> np.ndarray:
    """Exact Cauchy-Green transform of a series, truncated at the same degree.

    ``T(ζ^j ζ̄^k) = (ζ^j ζ̄^{k+1} - [j >= k+1] ζ^{j-k-1}) / (k+1)``.
    """
    K = a.shape[0] - 1
    out = np.zeros_like(a)
    for j in range(K + 1):
        for k in range(K + 1 - j):
            c = a[j, k]
            if not np.any(c):
                continue
            if j + k + 1 <= K:
                out[j, k + 1] += c / (k + 1)
            if j >= k + 1:
                out[j - k - 1, 0] -= c / (k + 1)
    return out


def evaluate(a: np.ndarray, zeta) -> np.ndarray:
    """Evaluate at points ``zeta``; returns shape ``zeta.shape + a.shape[2:]``."""
    zeta = np.asarray(zeta, dtype=complex)
    K = a.shape[0] - 1
    zp = zeta[..., None] ** np.arange(K + 1)
    zbp = np.conj(zeta)[..., None] ** np.arange(K + 1)
    if a.ndim == 2:
        return np.einsum("...j,...k,jk->...", zp, zbp, a)
    return np.einsum("...j,...k,jki->...i", zp, zbp, a)


def l1_norm(a: np.ndarray) -> float:
    """Sum of absolute coefficients: a bound for the sup over the closed disc."""
    return float(np.sum(np.abs(a)))


def compose_field(field, comps, conj_comps, K: int, power_cache: dict) -> np.ndarray:
    """Series of ``field(z(ζ))`` for a PolyField and component series."""
    out = np.zeros((K + 1, K + 1), dtype=complex)
    one = np.zeros((K + 1, K + 1), dtype=complex)
    one[0, 0] = 1.0

    def power(which, i, e):
        key = (which, i, e)
        if key not in power_cache:
            if e == 0:
                power_cache[key] = one
            else:
                base = comps[i] if which == 0 else conj_comps[i]
                power_cache[key] = mul(power(which, i, e - 1), base, K)
        return power_cache[key]

    for (alpha, beta), c in field.terms.items():
        term = one * c
        for i, e in enumerate(alpha):
            if e:
                term = mul(term, power(0, i, e), K)
        for i, e in enumerate(beta):
            if e:
                term = mul(term, power(1, i, e), K)
        out += term
    return out
