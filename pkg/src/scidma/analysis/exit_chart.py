"""EXIT curves of the check-node decoder and of the combined MUD + REP + variable-node decoder.

Mutual information is mapped to and from message means with the J-function
of a consistent Gaussian LLR (:func:`~scidma.analysis.gaussian.j_mean`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..code_construction import CoupledProtograph, Protograph, make_regular_protograph
from .density_evolution import DeGraph, de_trace, noise_variance
from .gaussian import MU_MAX, j_mean, j_mean_inv, phi, phi_inv


@dataclass
class ExitCurve:
    label: str
    i_a: np.ndarray
    i_e: np.ndarray

    def __post_init__(self):
        self.i_a = np.clip(np.asarray(self.i_a, dtype=float), 0.0, 1.0)
        self.i_e = np.clip(np.asarray(self.i_e, dtype=float), 0.0, 1.0)


def _means(i_a):
    return np.minimum(j_mean_inv(np.clip(i_a, 0.0, 1.0)), MU_MAX)


def cnd_curve(d_c: int, i_a) -> np.ndarray:
    """Extrinsic information of a degree-``d_c`` check node."""
    mu = _means(np.asarray(i_a, dtype=float))
    out = 1.0 - (1.0 - phi(mu)) ** (d_c - 1)
    mu_e = phi_inv(np.clip(out, np.finfo(float).tiny, 1.0))
    return j_mean(mu_e)


def mud_fixed_point(mu_checks, d_v: int, d_r: int, n_users: int, sigma2: float,
                    tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """``mu_{D->}`` once the detector / repetition loop has settled for given check inputs."""
    mu_checks = np.asarray(mu_checks, dtype=float)
    d = np.full(mu_checks.shape, 4.0 / (n_users * sigma2 + n_users - 1))
    for _ in range(max_iter):
        to_mud = np.minimum((d_r - 1) * d + d_v * mu_checks, MU_MAX)
        new = 4.0 / (n_users * sigma2 + (n_users - 1) * phi(to_mud))
        if np.max(np.abs(new - d)) < tol:
            return new
        d = new
    return d


def vnd_curve(d_v: int, d_r: int, n_users: int, gamma_db: float, i_a) -> np.ndarray:
    """Extrinsic information of a degree-``d_v`` variable node fed by the detector."""
    mu = _means(np.asarray(i_a, dtype=float))
    d = mud_fixed_point(mu, d_v, d_r, n_users, noise_variance(gamma_db))
    return j_mean(np.minimum(d_r * d + (d_v - 1) * mu, MU_MAX))


def trajectory(proto: Protograph | CoupledProtograph, n_users: int, d_r: int, gamma_db: float,
               n_iter: int = 200) -> ExitCurve:
    """Decoding trajectory from density evolution.

    Each point averages the mutual information over all protograph edges: the
    x coordinate is the information entering variable nodes (from checks), the
    y coordinate the information leaving them.  Consecutive points form the
    usual staircase.
    """
    graph = DeGraph.from_protograph(proto)
    states, _ = de_trace(graph, n_users, d_r, gamma_db, n_iter)
    w = graph.edge_mult / graph.edge_mult.sum()
    xs, ys = [], []
    for s in states:
        i_cv = float(np.dot(w, j_mean(np.minimum(s.mu_cv, MU_MAX))))
        i_vc = float(np.dot(w, j_mean(np.minimum(s.mu_vc, MU_MAX))))
        xs += [i_cv, i_cv]
        ys += [i_vc, i_vc]
    # staircase: (x_k, y_k) -> (x_{k+1}, y_k)
    pts_x = [xs[0]]
    pts_y = [ys[0]]
    for k in range(1, len(states)):
        pts_x += [xs[2 * k], xs[2 * k]]
        pts_y += [pts_y[-1], ys[2 * k]]
    label = "trajectory coupled" if isinstance(proto, CoupledProtograph) else "trajectory block"
    return ExitCurve(label, np.array(pts_x), np.array(pts_y))


def exit_curves(d_v: int, d_c: int, n_users: int, d_r: int, gamma_db: float,
                n_points: int = 101, coupled: CoupledProtograph | None = None,
                n_iter: int = 200) -> list[ExitCurve]:
    """Both transfer curves plus the flat trajectory (and the coupled one if given).

    The check-node curve is returned with swapped axes so that it can be drawn
    in the same chart as the variable-node curve.
    """
    grid = np.linspace(0.0, 1.0, n_points)
    vnd = ExitCurve("MUD+REP+VND", grid, vnd_curve(d_v, d_r, n_users, gamma_db, grid))
    cnd = ExitCurve("CND", cnd_curve(d_c, grid), grid)
    curves = [vnd, cnd, trajectory(make_regular_protograph(d_v, d_c), n_users, d_r, gamma_db, n_iter)]
    if coupled is not None:
        curves.append(trajectory(coupled, n_users, d_r, gamma_db, n_iter))
    return curves


def write_exit_csv(curves: list[ExitCurve], path=None) -> str:
    """Long-format CSV with columns ``curve, I_A, I_E``."""
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "I_A", "I_E"])
    for c in curves:
        for a, e in zip(c.i_a, c.i_e):
            w.writerow([c.label, f"{a:.10g}", f"{e:.10g}"])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
