"""Consistent-Gaussian message statistics: the phi function and the J function.

A consistent Gaussian LLR with mean ``mu`` has variance ``2 * mu``.  Both
statistics used by the analysis are expectations over that density:

* ``phi(mu) = E[1 - tanh(u / 2)] = E[2 / (1 + exp(u))]``
* ``1 - J(mu) = E[log2(1 + exp(-u))]``

Both integrands are log-concave, so the expectations are evaluated in the log
domain with a mode-centred composite Gauss-Legendre rule.  That keeps full
relative precision even where ``phi`` underflows double precision, which is
what lets the check-node update stay accurate at large means.  The values are
tabulated once on a grid in ``sqrt(mu)`` and interpolated by a cubic spline;
the spline is the production ``phi`` (fast, vectorised, usable from numba) and
the inverse is an exact inverse of that same spline.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numba
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit, log_expit

MU_MAX = 1.0e4
"""Means are clipped here; phi(MU_MAX) ~ exp(-2500)."""

_S_STEP = 0.005
_S_MAX = math.sqrt(MU_MAX)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_PANELS = 48
_DROP = 75.0


def _softplus(u):
    return np.logaddexp(0.0, u)


def _log_phi_integrand(u):
    # log(2 / (1 + e^u))
    return math.log(2.0) - _softplus(u)


def _log_phi_integrand_slope(u):
    return -expit(u)


def _log_mi_loss_integrand(u):
    # log(log2(1 + e^-u)); softplus(-u) underflows only far beyond the window
    with np.errstate(divide="ignore"):
        return np.log(_softplus(-u)) - math.log(math.log(2.0))


def _log_mi_loss_integrand_slope(u):
    sp = _softplus(-u)
    return -np.exp(log_expit(-u) - np.log(sp))


def log_gaussian_expectation(mu, log_f, log_f_slope) -> np.ndarray:
    """``log E[f(u)]`` for ``u ~ N(mu, 2 mu)`` and log-concave ``f``.

    ``log_f_slope`` must lie in ``(-1, 0)``, which brackets the mode of the
    integrand inside ``(-mu - 1, mu + 1)``.  ``mu`` must be strictly positive.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if np.any(mu <= 0):
        raise ValueError("mu must be > 0")
    var2 = 4.0 * mu

    def g(u, m=mu, v=var2):
        return log_f(u) - (u - m) ** 2 / v

    def g_slope(u):
        return log_f_slope(u) - 2.0 * (u - mu) / var2

    lo = -mu - 1.0
    hi = mu + 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        up = g_slope(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    mode = 0.5 * (lo + hi)
    g_mode = g(mode)

    # strong concavity: g(mode + d) <= g_mode - d^2 / (4 mu)
    reach = np.sqrt(_DROP * var2) + 1e-12
    edges = []
    for sign in (-1.0, 1.0):
        near = np.zeros_like(mu)
        far = reach.copy()
        for _ in range(60):
            mid = 0.5 * (near + far)
            inside = g(mode + sign * mid) > g_mode - _DROP
            near = np.where(inside, mid, near)
            far = np.where(inside, far, mid)
        edges.append(mode + sign * far)
    a, b = edges

    width = (b - a) / _PANELS
    offsets = (np.arange(_PANELS)[:, None] + 0.5 * (_GL_NODES[None, :] + 1.0)).ravel()
    weights = np.tile(_GL_WEIGHTS * 0.5, _PANELS)
    u = a[:, None] + width[:, None] * offsets[None, :]
    vals = np.exp(g(u, mu[:, None], var2[:, None]) - g_mode[:, None]) @ weights
    return g_mode + np.log(vals * width) - 0.5 * np.log(np.pi * var2)


def log_phi_quadrature(mu) -> np.ndarray:
    """Reference ``log phi`` by direct quadrature (slow path, no table)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.zeros_like(mu)
    pos = mu > 0
    if np.any(pos):
        out[pos] = log_gaussian_expectation(mu[pos], _log_phi_integrand, _log_phi_integrand_slope)
    return out


def log_mi_loss_quadrature(mu) -> np.ndarray:
    """Reference ``log(1 - J(mu))`` by direct quadrature."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.zeros_like(mu)
    pos = mu > 0
    if np.any(pos):
        out[pos] = log_gaussian_expectation(mu[pos], _log_mi_loss_integrand, _log_mi_loss_integrand_slope)
    return out


# ---------------------------------------------------------------------------
# spline tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _table(kind: str) -> np.ndarray:
    """Spline coefficients, shape (n_cells, 4), ascending powers in the local offset."""
    s = np.arange(0.0, _S_MAX + _S_STEP / 2, _S_STEP)
    mu = s * s
    if kind == "phi":
        vals = log_phi_quadrature(mu)
    elif kind == "mi":
        vals = log_mi_loss_quadrature(mu)
    else:
        raise KeyError(kind)
    # both statistics are even, analytic functions of s near the origin
    spline = CubicSpline(s, vals, bc_type=((1, 0.0), "not-a-knot"))
    return np.ascontiguousarray(spline.c[::-1].T)


@numba.njit(cache=True)
def _table_eval(coef, mu):
    if mu <= 0.0:
        return 0.0
    s = math.sqrt(mu)
    n = coef.shape[0]
    idx = int(s / _S_STEP)
    if idx >= n:
        idx = n - 1
    t = s - idx * _S_STEP
    c = coef[idx]
    return c[0] + t * (c[1] + t * (c[2] + t * c[3]))


@numba.njit(cache=True)
def _table_inverse(coef, target):
    """Smallest mu with table(mu) == target (table is decreasing in mu)."""
    if target >= 0.0:
        return 0.0
    n = coef.shape[0]
    h = _S_STEP
    c = coef[n - 1]
    last = c[0] + h * (c[1] + h * (c[2] + h * c[3]))
    if target <= last:
        return MU_MAX
    lo_i = 0
    hi_i = n - 1
    # coef[i, 0] is the value at the left edge of cell i
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if coef[mid, 0] >= target:
            lo_i = mid
        else:
            hi_i = mid
    idx = lo_i
    if coef[hi_i, 0] >= target:
        idx = hi_i
    c = coef[idx]
    a = 0.0
    b = h
    t = 0.5 * h
    for _ in range(100):
        f = c[0] + t * (c[1] + t * (c[2] + t * c[3])) - target
        if f > 0.0:
            a = t
        else:
            b = t
        d = c[1] + t * (2.0 * c[2] + 3.0 * t * c[3])
        step_ok = False
        if d < 0.0:
            tn = t - f / d
            if a < tn < b:
                step_ok = True
                if abs(tn - t) < 1e-17:
                    t = tn
                    break
                t = tn
        if not step_ok:
            t = 0.5 * (a + b)
        if b - a < 1e-16:
            break
    s = idx * h + t
    return s * s


@numba.njit(cache=True)
def _vec_eval(coef, mu):
    out = np.empty(mu.size)
    flat = mu.ravel()
    for k in range(flat.size):
        m = flat[k]
        if m > MU_MAX:
            m = MU_MAX
        out[k] = _table_eval(coef, m)
    return out


@numba.njit(cache=True)
def _vec_inverse(coef, log_y):
    out = np.empty(log_y.size)
    flat = log_y.ravel()
    for k in range(flat.size):
        out[k] = _table_inverse(coef, flat[k])
    return out


# ---------------------------------------------------------------------------
# closed-form approximation (Chung, Richardson, Urbanke)
# ---------------------------------------------------------------------------

_CHUNG_A = 0.4527
_CHUNG_B = 0.86
_CHUNG_C = 0.0218
# left limit of the small-mean branch at mu = 10
_CHUNG_LOG_AT_10 = -_CHUNG_A * 10.0**_CHUNG_B + _CHUNG_C

PHI_EXACT = 0
PHI_CHUNG = 1


@numba.njit(cache=True)
def _chung_log_phi(mu):
    if mu <= 0.0:
        return 0.0
    if mu < 10.0:
        v = -_CHUNG_A * mu**_CHUNG_B + _CHUNG_C
        return v if v < 0.0 else 0.0
    return 0.5 * math.log(math.pi / mu) - 0.25 * mu + math.log1p(-10.0 / (7.0 * mu))


@numba.njit(cache=True)
def _chung_log_phi_inv(log_y):
    if log_y >= 0.0:
        return 0.0
    if log_y > _CHUNG_LOG_AT_10:
        return ((_CHUNG_C - log_y) / _CHUNG_A) ** (1.0 / _CHUNG_B)
    # large-mean branch is decreasing on [10, inf): safeguarded Newton
    lo = 10.0
    hi = 10.0 - 8.0 * log_y + 40.0
    x = max(10.0, -4.0 * log_y)
    if x >= hi:
        x = 0.5 * (lo + hi)
    for _ in range(100):
        f = 0.5 * math.log(math.pi / x) - 0.25 * x + math.log1p(-10.0 / (7.0 * x)) - log_y
        if f > 0.0:
            lo = x
        else:
            hi = x
        d = -0.5 / x - 0.25 + (10.0 / (7.0 * x * x)) / (1.0 - 10.0 / (7.0 * x))
        xn = x - f / d
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-13 * x:
            x = xn
            break
        x = xn
    return x if x < MU_MAX else MU_MAX


@numba.njit(cache=True)
def model_log_phi(model, coef, mu):
    """log phi under ``model`` (PHI_EXACT table or PHI_CHUNG closed form)."""
    if mu > MU_MAX:
        mu = MU_MAX
    if model == PHI_CHUNG:
        return _chung_log_phi(mu)
    if mu <= 0.0:
        return 0.0
    return _table_eval(coef, mu)


@numba.njit(cache=True)
def model_log_phi_inv(model, coef, log_y):
    if model == PHI_CHUNG:
        return _chung_log_phi_inv(log_y)
    return _table_inverse(coef, log_y)


@numba.njit(cache=True)
def _vec_model(model, coef, mu):
    out = np.empty(mu.size)
    flat = mu.ravel()
    for k in range(flat.size):
        out[k] = model_log_phi(model, coef, flat[k])
    return out


@numba.njit(cache=True)
def _vec_model_inv(model, coef, log_y):
    out = np.empty(log_y.size)
    flat = log_y.ravel()
    for k in range(flat.size):
        out[k] = model_log_phi_inv(model, coef, flat[k])
    return out


def phi_chung(x):
    """Closed-form phi approximation: ``exp(-0.4527 x^0.86 + 0.0218)`` below 10,
    ``sqrt(pi/x) exp(-x/4) (1 - 10/(7x))`` above; capped at 1.

    Not monotone at ``x = 10`` (the branches disagree by about 1e-3).
    """
    x = _check_mean(x)
    out = np.exp(_vec_model(PHI_CHUNG, _DUMMY, np.ascontiguousarray(x, dtype=float))).reshape(x.shape)
    return out if x.ndim else float(out)


def phi_chung_inv(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)) or np.any(y > 1):
        raise ValueError("phi_chung_inv expects values in (0, 1]")
    out = _vec_model_inv(PHI_CHUNG, _DUMMY, np.ascontiguousarray(np.log(y))).reshape(y.shape)
    return out if y.ndim else float(out)


_DUMMY = np.zeros((1, 4))

PHI_MODELS = {"exact": PHI_EXACT, "chung": PHI_CHUNG}


def phi_model_id(name: str) -> int:
    try:
        return PHI_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown phi model {name!r}; expected one of {sorted(PHI_MODELS)}") from None


def phi_table() -> np.ndarray:
    """Coefficient table consumed by the numba kernels."""
    return _table("phi")


def _check_mean(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("phi is defined for non-negative means only")
    return x


def log_phi(x):
    """Natural log of ``phi``; finite for every mean up to ``MU_MAX``."""
    x = _check_mean(x)
    out = _vec_eval(_table("phi"), np.ascontiguousarray(x, dtype=float)).reshape(x.shape)
    return out if x.ndim else float(out)


def phi(x):
    """``phi(x) = 1 - E[tanh(u/2)]`` for ``u ~ N(x, 2x)``; ``phi(0) = 1``.

    Means above ``MU_MAX`` saturate at ``phi(MU_MAX)``.
    """
    return np.exp(log_phi(x))


def one_minus_phi(x):
    """``1 - phi(x)`` without cancellation for small ``x``."""
    return -np.expm1(log_phi(x))


def phi_inv(y, mu_max: float = MU_MAX):
    """Inverse of :func:`phi` on ``(0, 1]``, saturating at ``mu_max``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)) or np.any(y > 1):
        raise ValueError("phi_inv expects values in (0, 1]")
    with np.errstate(divide="ignore"):
        ly = np.log(y)
    out = _vec_inverse(_table("phi"), np.ascontiguousarray(ly)).reshape(y.shape)
    out = np.minimum(out, mu_max)
    return out if y.ndim else float(out)


def j_mean(mu):
    """Mutual information between a bit and a consistent Gaussian LLR of mean ``mu``."""
    mu = _check_mean(mu)
    out = -np.expm1(_vec_eval(_table("mi"), np.ascontiguousarray(mu, dtype=float))).reshape(mu.shape)
    return out if mu.ndim else float(out)


def j_mean_inv(info):
    """Mean of the consistent Gaussian LLR carrying mutual information ``info``."""
    info = np.asarray(info, dtype=float)
    if np.any(info < 0) or np.any(info > 1):
        raise ValueError("mutual information must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        target = np.log1p(-info)
    out = _vec_inverse(_table("mi"), np.ascontiguousarray(target)).reshape(info.shape)
    return out if info.ndim else float(out)


def j_sigma(sigma):
    """Classic J(sigma) parameterisation: LLR std ``sigma``, mean ``sigma**2 / 2``."""
    sigma = np.asarray(sigma, dtype=float)
    return j_mean(sigma**2 / 2.0)


def j_sigma_approx(sigma):
    """Closed-form J(sigma) fit (Brannstrom et al.), accurate to about 1e-3."""
    sigma = np.asarray(sigma, dtype=float)
    h1, h2, h3 = 0.3073, 0.8935, 1.1064
    return (1.0 - 2.0 ** (-h1 * sigma ** (2 * h2))) ** h3
