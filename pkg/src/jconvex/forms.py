"""Pointwise 1-forms and 2-forms on the chart.

The exterior derivative of a 1-form field is estimated by its circulation
around a small parallelogram centred at the base point (four Gauss-Legendre
nodes per edge) followed by one Richardson step.  No vector-field extension
is needed, and the only inputs are pointwise covector values.

:func:`d_jstar_exact` computes the same 2-form from exact polynomial
derivatives of ``Q`` and of the function; it is an independent route kept
for cross-checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import OutOfChart
from .polyfield import to_complex, to_real
from .structure import j_matrix, j_standard, u_from_q

EPS_PAIR = (1e-3, 5e-4)
ANTISYM_TOL = 1e-12

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_S = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class TangentVector:
    """A (1,0)-vector ``sum v_k d/dz_k`` at ``point``; real form ``X = 2 Re V``."""

    point: np.ndarray
    v: np.ndarray

    @classmethod
    def from_real(cls, point, X):
        return cls(np.asarray(point, dtype=complex), to_complex(X))

    @property
    def real(self) -> np.ndarray:
        return to_real(self.v)


@dataclass(frozen=True)
class OneFormSample:
    point: np.ndarray  # complex n-vector
    coeffs: np.ndarray  # 2n real coefficients on coordinate vectors


@dataclass(frozen=True)
class TwoFormSample:
    point: np.ndarray
    matrix: np.ndarray  # antisymmetric 2n x 2n

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        if np.max(np.abs(m + m.T)) > ANTISYM_TOL * scale:
            raise ValueError("2-form matrix is not antisymmetric")


def _check_chart(point, radius):
    if radius is not None and np.linalg.norm(np.asarray(point)) > radius * (1 + 1e-12):
        raise OutOfChart("point outside chart")


def eval_one_form(form: OneFormSample, X, radius: float | None = None) -> float:
    _check_chart(form.point, radius)
    return float(np.dot(form.coeffs, np.asarray(X, dtype=float)))


def eval_two_form(form: TwoFormSample, X, Y, radius: float | None = None) -> float:
    _check_chart(form.point, radius)
    return float(np.asarray(X, dtype=float) @ form.matrix @ np.asarray(Y, dtype=float))


def j_field(S) -> Callable:
    """Callable ``x -> J(x)`` for any structure exposing ``q(z)``."""
    return lambda x: j_matrix(S.q(to_complex(x)))


def jstar_covector(S, f):
    """Covector field of ``J^* df``: ``x -> J(x)^T grad f(x)``."""
    jf = j_field(S)

    def field(x):
        J = jf(x)
        g = f.gradient(x)
        return np.einsum("...ji,...j->...i", J, g)

    return field


def circulation(one_form: Callable, p, X, Y, eps: float) -> np.ndarray:
    """Circulation of ``one_form`` around the parallelogram centred at ``p``
    with sides ``eps X`` and ``eps Y``, divided by ``eps**2``.

    Arrays ``p, X, Y`` have shape ``(N, 2n)``; returns ``(N,)``.
    """
    p, X, Y = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (p, X, Y))
    c0 = p - 0.5 * eps * (X + Y)
    starts = [c0, c0 + eps * X, c0 + eps * (X + Y), c0 + eps * Y]
    edges = [eps * X, eps * Y, -eps * X, -eps * Y]
    total = np.zeros(p.shape[0])
    # all 16 evaluation points in one batch
    pts = np.stack(
        [st + s * ed for st, ed in zip(starts, edges) for s in _GL_S], axis=0
    )  # (16, N, 2n)
    vals = one_form(pts)
    k = 0
    for ed in edges:
        for w in _GL_W:
            total += w * np.einsum("ni,ni->n", vals[k], ed)
            k += 1
    return total / eps**2


def two_form_value(one_form: Callable, p, X, Y, eps_pair=EPS_PAIR) -> np.ndarray:
    """Richardson-extrapolated ``d(one_form)(X, Y)`` at ``p``."""
    e1, e2 = eps_pair
    c1 = circulation(one_form, p, X, Y, e1)
    c2 = circulation(one_form, p, X, Y, e2)
    ratio = (e1 / e2) ** 2
    return (ratio * c2 - c1) / (ratio - 1.0)


def two_form_matrix(one_form: Callable, p, eps_pair=EPS_PAIR) -> np.ndarray:
    """Matrix of ``d(one_form)`` on coordinate vectors, shape ``(N, 2n, 2n)``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    N, m = p.shape
    eye = np.eye(m)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    P = np.repeat(p, len(pairs), axis=0)
    X = np.tile(np.array([eye[i] for i, _ in pairs]), (N, 1))
    Y = np.tile(np.array([eye[j] for _, j in pairs]), (N, 1))
    if np.ndim(eps_pair[0]) > 0:
        eps_rep = [np.repeat(np.asarray(e), len(pairs)) for e in eps_pair]
        vals = _two_form_value_varying(one_form, P, X, Y, eps_rep)
    else:
        vals = two_form_value(one_form, P, X, Y, eps_pair)
    vals = vals.reshape(N, len(pairs))
    out = np.zeros((N, m, m))
    for k, (i, j) in enumerate(pairs):
        out[:, i, j] = vals[:, k]
        out[:, j, i] = -vals[:, k]
    return out


def _two_form_value_varying(one_form, P, X, Y, eps_pair):
    """Same as :func:`two_form_value` with per-row step sizes."""
    e1, e2 = eps_pair
    c1 = _circulation_rows(one_form, P, X, Y, e1)
    c2 = _circulation_rows(one_form, P, X, Y, e2)
    ratio = (e1 / e2) ** 2
    return (ratio * c2 - c1) / (ratio - 1.0)


def _circulation_rows(one_form, p, X, Y, eps):
    eps = np.asarray(eps, dtype=float)[:, None]
    c0 = p - 0.5 * eps * (X + Y)
    starts = [c0, c0 + eps * X, c0 + eps * (X + Y), c0 + eps * Y]
    edges = [eps * X, eps * Y, -eps * X, -eps * Y]
    pts = np.stack([st + s * ed for st, ed in zip(starts, edges) for s in _GL_S], axis=0)
    vals = one_form(pts)
    total = np.zeros(p.shape[0])
    k = 0
    for ed in edges:
        for w in _GL_W:
            total += w * np.einsum("ni,ni->n", vals[k], ed)
            k += 1
    return total / eps[:, 0] ** 2


def one_form_sample(covector_field: Callable, p) -> OneFormSample:
    p = np.asarray(p, dtype=complex)
    return OneFormSample(p, np.asarray(covector_field(to_real(p)[None, :])[0], dtype=float))


def two_form_sample(covector_field: Callable, p, eps_pair=EPS_PAIR) -> TwoFormSample:
    p = np.asarray(p, dtype=complex)
    M = two_form_matrix(covector_field, to_real(p)[None, :], eps_pair)[0]
    M = 0.5 * (M - M.T)
    return TwoFormSample(p, M)


def d_jstar_exact(S, f, x) -> np.ndarray:
    """``d(J^* df)`` on coordinate vectors from exact derivatives.

    Uses ``dJ = 2 J_st (I-U)^{-1} dU (I-U)^{-1}``; needs a polynomial
    structure (``S.q_real_derivative``) and a field with ``hessian``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = S.n
    m = 2 * n
    z = to_complex(x)
    Qs = S.q(z)
    U = u_from_q(Qs)
    inv = np.linalg.inv(np.eye(m) - U)
    J = j_matrix(Qs)
    g = f.gradient(x)
    H = f.hessian(x)
    Jst = j_standard(n)
    # D[..., k, i] = d a_i / d x_k with a = J^T g
    D = np.zeros(x.shape[:-1] + (m, m))
    for k in range(m):
        dU = u_from_q(S.q_real_derivative(z, k))
        dJ = 2.0 * Jst @ inv @ dU @ inv
        D[..., k, :] = np.einsum("...ji,...j->...i", dJ, g) + np.einsum(
            "...ji,...j->...i", J, H[..., :, k]
        )
    return D - np.swapaxes(D, -1, -2)
