"""Gaussian-approximation density evolution for protograph codes behind an IDMA front end.

Every message is a consistent Gaussian LLR and only its mean is tracked.  One
sweep of :func:`de_iterate` performs, for all protograph edges at once,

1. the check-node update
   ``mu_{i<-j} = phi^-1(1 - [1-phi(mu_{i->j})]^(B_ji - 1) prod_{k != i} [1-phi(mu_{k->j})]^B_jk)``,
2. the repetition / multi-user detector update
   ``mu_{D<-i} = (d_r - 1) mu_{D->i} + sum_k B_ki mu_{i<-k}`` and
   ``mu_{D->i} = 4 / (N sigma_n^2 + (N - 1) phi(mu_{D<-i}))``,
3. the variable-node update
   ``mu_{i->j} = d_r mu_{D->i} + (B_ji - 1) mu_{i<-j} + sum_{k != j} B_ki mu_{i<-k}``.

Users have equal power ``1/N`` so that ``sigma_n^2 = 10^(-gamma/10)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import ndtri

from ..code_construction import CoupledProtograph, Protograph
from .gaussian import MU_MAX, model_log_phi, model_log_phi_inv, phi_model_id, phi_table

TARGET_ERROR = 1e-10
MAX_ITERS = 10_000


def error_proxy(mu):
    """Bit error probability ``Q(sqrt(mu / 2))`` of a consistent Gaussian LLR."""
    from scipy.special import ndtr

    return ndtr(-np.sqrt(np.asarray(mu, dtype=float) / 2.0))


def mean_for_error(target: float = TARGET_ERROR) -> float:
    """Smallest total mean whose error proxy is below ``target``."""
    q = -ndtri(target)
    return 2.0 * q * q


def noise_variance(gamma_db: float) -> float:
    return 10.0 ** (-gamma_db / 10.0)


@dataclass
class DeGraph:
    """Edge lists of a protograph (check-major and variable-major views)."""

    n_checks: int
    n_vars: int
    edge_check: np.ndarray
    edge_var: np.ndarray
    edge_mult: np.ndarray
    check_ptr: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    var_position: np.ndarray

    @classmethod
    def from_matrix(cls, B: np.ndarray, var_position: np.ndarray | None = None) -> "DeGraph":
        B = np.asarray(B, dtype=np.int64)
        j, i = np.nonzero(B)  # row-major, i.e. already grouped by check
        mult = B[j, i].astype(np.float64)
        m, n = B.shape
        check_ptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(check_ptr, j + 1, 1)
        check_ptr = np.cumsum(check_ptr)
        order = np.argsort(i, kind="stable")
        var_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(var_ptr, i + 1, 1)
        var_ptr = np.cumsum(var_ptr)
        if var_position is None:
            var_position = np.zeros(n, dtype=np.int64)
        return cls(m, n, j.astype(np.int64), i.astype(np.int64), mult, check_ptr, var_ptr,
                   order.astype(np.int64), np.asarray(var_position, dtype=np.int64))

    @classmethod
    def from_protograph(cls, proto: Protograph | CoupledProtograph) -> "DeGraph":
        if isinstance(proto, CoupledProtograph):
            return cls.from_matrix(proto.matrix, proto.var_position())
        return cls.from_matrix(proto.entries)


@dataclass
class DeState:
    """Per-edge and per-variable message means."""

    mu_vc: np.ndarray        # variable -> check, per edge
    mu_cv: np.ndarray        # check -> variable, per edge
    mu_from_mud: np.ndarray  # mu_{D->i}, per variable type
    mu_to_mud: np.ndarray    # mu_{D<-i}, per variable type
    iteration: int = 0

    def copy(self) -> "DeState":
        return DeState(self.mu_vc.copy(), self.mu_cv.copy(), self.mu_from_mud.copy(),
                       self.mu_to_mud.copy(), self.iteration)


def mud_mean(mu_to_mud, n_users: int, sigma2: float):
    """``mu_{D->i}`` from the incoming mean ``mu_{D<-i}``."""
    from .gaussian import phi

    return 4.0 / (n_users * sigma2 + (n_users - 1) * phi(mu_to_mud))


def initial_state(graph: DeGraph, n_users: int, gamma_db: float, d_r: int) -> DeState:
    """No a-priori knowledge anywhere: ``mu_{D->i} = 4 / (N sigma^2 + N - 1)``."""
    sigma2 = noise_variance(gamma_db)
    d0 = 4.0 / (n_users * sigma2 + (n_users - 1))
    mu_from = np.full(graph.n_vars, d0)
    return DeState(
        mu_vc=np.full(graph.edge_var.size, d_r * d0),
        mu_cv=np.zeros(graph.edge_var.size),
        mu_from_mud=mu_from,
        mu_to_mud=np.zeros(graph.n_vars),
    )


@numba.njit(cache=True)
def _sweeps(model, coef, check_ptr, edge_mult, var_ptr, var_edges, mu_vc, mu_cv, mu_from, mu_to,
            n_users, sigma2, d_r, n_iter, mu_target, stall_tol, full_interleaver):
    """Run up to ``n_iter`` sweeps in place.

    Returns ``(sweeps_done, status)`` with status 1 = converged, -1 = stalled
    at a fixed point, 0 = iteration budget used up.
    """
    n_chk = check_ptr.size - 1
    n_var = var_ptr.size - 1
    for it in range(n_iter):
        # check nodes: products of (1 - phi) kept as sums of log1p(-phi)
        for j in range(n_chk):
            saturated = True
            for e in range(check_ptr[j], check_ptr[j + 1]):
                if mu_vc[e] < MU_MAX:
                    saturated = False
                    break
            if saturated:
                for e in range(check_ptr[j], check_ptr[j + 1]):
                    mu_cv[e] = MU_MAX
                continue
            s = 0.0
            zeros = 0.0
            for e in range(check_ptr[j], check_ptr[j + 1]):
                lp = model_log_phi(model, coef, mu_vc[e])
                if lp >= 0.0:
                    zeros += edge_mult[e]
                else:
                    s += edge_mult[e] * math.log1p(-math.exp(lp))
            for e in range(check_ptr[j], check_ptr[j + 1]):
                lp = model_log_phi(model, coef, mu_vc[e])
                if lp >= 0.0:
                    z_other = zeros - 1.0
                    l_other = s
                else:
                    z_other = zeros
                    l_other = s - math.log1p(-math.exp(lp))
                if z_other > 0.0:
                    mu_cv[e] = 0.0
                    continue
                if l_other > 0.0:
                    l_other = 0.0
                one_minus_prod = -math.expm1(l_other)
                if one_minus_prod <= 0.0:
                    mu_cv[e] = MU_MAX
                else:
                    mu_cv[e] = model_log_phi_inv(model, coef, math.log(one_minus_prod))
        # repetition code + multi-user detector
        mean_to = 0.0
        for i in range(n_var):
            acc = 0.0
            for q in range(var_ptr[i], var_ptr[i + 1]):
                e = var_edges[q]
                acc += edge_mult[e] * mu_cv[e]
            mu_to[i] = (d_r - 1) * mu_from[i] + acc
            mean_to += mu_to[i]
        mean_to /= n_var
        for i in range(n_var):
            src = mean_to if full_interleaver else mu_to[i]
            mu_from[i] = 4.0 / (n_users * sigma2 + (n_users - 1) * math.exp(model_log_phi(model, coef, src)))
        # variable nodes
        delta = 0.0
        worst = np.inf
        for i in range(n_var):
            acc = 0.0
            for q in range(var_ptr[i], var_ptr[i + 1]):
                e = var_edges[q]
                acc += edge_mult[e] * mu_cv[e]
            total = d_r * mu_from[i] + acc
            if total < worst:
                worst = total
            for q in range(var_ptr[i], var_ptr[i + 1]):
                e = var_edges[q]
                new = total - mu_cv[e]
                if new > MU_MAX:
                    new = MU_MAX
                d = abs(new - mu_vc[e])
                if d > delta:
                    delta = d
                mu_vc[e] = new
        if worst >= mu_target:
            return it + 1, 1
        if delta < stall_tol:
            return it + 1, -1
    return n_iter, 0


@dataclass
class DeRun:
    converged: bool
    iterations: int
    stalled: bool
    state: DeState = field(repr=False)
    totals: np.ndarray = field(repr=False)


def _totals(graph: DeGraph, state: DeState, d_r: int) -> np.ndarray:
    acc = np.zeros(graph.n_vars)
    np.add.at(acc, graph.edge_var, graph.edge_mult * state.mu_cv)
    return d_r * state.mu_from_mud + acc


def _run_kernel(graph: DeGraph, state: DeState, n_users: int, d_r: int, gamma_db: float, n_iter: int,
                mu_target: float, stall_tol: float, full_interleaver: bool, phi_model: str):
    done, status = _sweeps(phi_model_id(phi_model), phi_table(), graph.check_ptr, graph.edge_mult,
                           graph.var_ptr, graph.var_edges, state.mu_vc, state.mu_cv, state.mu_from_mud,
                           state.mu_to_mud, n_users, noise_variance(gamma_db), d_r, n_iter, mu_target,
                           stall_tol, full_interleaver)
    state.iteration += done
    return done, status


def de_iterate(graph: DeGraph, n_users: int, d_r: int, gamma_db: float, state: DeState,
               full_interleaver: bool = False, phi_model: str = "exact") -> DeState:
    """One synchronous sweep (check, repetition/detector, variable) returning a new state.

    ``full_interleaver`` replaces each position's detector input by the mean
    over all positions, the degradation a frame-wide interleaver causes.
    """
    new = state.copy()
    _run_kernel(graph, new, n_users, d_r, gamma_db, 1, np.inf, -1.0, full_interleaver, phi_model)
    return new


def run_de(graph: DeGraph, n_users: int, d_r: int, gamma_db: float, max_iters: int = MAX_ITERS,
           target_error: float = TARGET_ERROR, stall_tol: float = 1e-10,
           full_interleaver: bool = False, phi_model: str = "chung",
           start: DeState | None = None) -> DeRun:
    """Iterate until convergence, a fixed point or ``max_iters``.

    ``start`` may be any state that lies below the least fixed point at
    ``gamma_db`` and whose first sweep does not decrease it, e.g. the final
    state of a failed run at a lower SNR.  The updates are monotone, so the
    outcome is the same as starting from zero knowledge, only faster.
    """
    state = initial_state(graph, n_users, gamma_db, d_r) if start is None else start.copy()
    done, status = _run_kernel(graph, state, n_users, d_r, gamma_db, max_iters,
                               mean_for_error(target_error), stall_tol, full_interleaver, phi_model)
    return DeRun(converged=status == 1, iterations=done, stalled=status == -1, state=state,
                 totals=_totals(graph, state, d_r))


def de_trace(graph: DeGraph, n_users: int, d_r: int, gamma_db: float, n_iter: int,
             full_interleaver: bool = False, phi_model: str = "chung") -> tuple[list[DeState], np.ndarray]:
    """States after every sweep plus the ``(n_iter + 1, n_vars)`` array of total means."""
    states = [initial_state(graph, n_users, gamma_db, d_r)]
    for _ in range(n_iter):
        states.append(de_iterate(graph, n_users, d_r, gamma_db, states[-1], full_interleaver, phi_model))
    totals = np.array([_totals(graph, s, d_r) for s in states])
    return states, totals


def converges(graph: DeGraph, n_users: int, d_r: int, gamma_db: float, **kw) -> bool:
    return run_de(graph, n_users, d_r, gamma_db, **kw).converged


def threshold(proto, n_users: int, d_r: int, lo_db: float = -5.0, hi_db: float = 20.0,
              tol_db: float = 0.01, **kw) -> float | None:
    """Smallest multi-user SNR (dB) at which density evolution converges, to ``tol_db``.

    Returns ``None`` when DE does not converge even at ``hi_db`` (no threshold
    inside the bracket).  Raises if it already converges at ``lo_db``.  Each
    failed probe warm-starts the next, higher one.
    """
    graph = proto if isinstance(proto, DeGraph) else DeGraph.from_protograph(proto)
    if not converges(graph, n_users, d_r, hi_db, **kw):
        return None
    low = run_de(graph, n_users, d_r, lo_db, **kw)
    if low.converged:
        raise ValueError(f"DE already converges at the lower bracket end {lo_db} dB")
    warm = low.state
    lo, hi = lo_db, hi_db
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        run = run_de(graph, n_users, d_r, mid, start=warm, **kw)
        if run.converged:
            hi = mid
        else:
            lo = mid
            warm = run.state
    return hi
