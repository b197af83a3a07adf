"""Single-user decoding: repetition combiner, sum-product BP and the windowed schedule.

All LLRs use the convention ``L = log P(b=0) / P(b=1)`` (positive favours 0)
and are clipped to ``+-LLR_CLIP``.  Message arrays carry a leading user axis so
that every user of the IDMA system is decoded by one kernel call; users never
share messages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .code_construction import ParityCheck

LLR_CLIP = 30.0
_T_CLIP = math.tanh(0.5 * LLR_CLIP)


def rep_decode(llrs: np.ndarray, d_r: int) -> np.ndarray:
    """Sum each group of ``d_r`` consecutive replica LLRs (last axis)."""
    llrs = np.asarray(llrs, dtype=float)
    if d_r < 1:
        raise ValueError("d_r must be >= 1")
    if llrs.shape[-1] % d_r:
        raise ValueError(f"length {llrs.shape[-1]} is not a multiple of d_r={d_r}")
    return llrs.reshape(*llrs.shape[:-1], -1, d_r).sum(axis=-1)


def rep_encode_soft(app: np.ndarray, own_inputs: np.ndarray, d_r: int) -> np.ndarray:
    """Replicate decoder a-posteriori LLRs ``d_r`` times and remove each replica's own input.

    The value sent back for replica ``k`` of bit ``m`` is
    ``app[m] - own_inputs[m * d_r + k]``, i.e. extrinsic with respect to the
    detector output that replica contributed.
    """
    app = np.asarray(app, dtype=float)
    own = np.asarray(own_inputs, dtype=float)
    rep = np.repeat(app, d_r, axis=-1)
    if rep.shape != own.shape:
        raise ValueError(f"own inputs have shape {own.shape}, expected {rep.shape}")
    return rep - own


# ---------------------------------------------------------------------------
# Tanner graph and BP kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Edge-indexed view of a parity-check matrix.

    Edges are numbered check-major (CSR order); ``var_edges`` lists the same
    edges grouped by variable.
    """

    n: int
    m: int
    check_ptr: np.ndarray
    edge_var: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    var_position: np.ndarray
    check_position: np.ndarray
    n_var_positions: int
    n_check_positions: int

    @classmethod
    def from_parity_check(cls, pc: ParityCheck) -> "TannerGraph":
        g = cls.from_matrix(pc.H)
        return cls(g.n, g.m, g.check_ptr, g.edge_var, g.var_ptr, g.var_edges,
                   pc.var_position(), pc.check_position(), pc.proto.L, pc.proto.n_positions)

    @classmethod
    def from_matrix(cls, H) -> "TannerGraph":
        import scipy.sparse as sp

        H = sp.csr_matrix(H)
        H.sort_indices()
        m, n = H.shape
        edge_var = H.indices.astype(np.int64)
        check_ptr = H.indptr.astype(np.int64)
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int64)
        var_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(var_ptr, edge_var + 1, 1)
        var_ptr = np.cumsum(var_ptr)
        return cls(n, m, check_ptr, edge_var, var_ptr, var_edges,
                   np.zeros(n, dtype=np.int64), np.zeros(m, dtype=np.int64), 1, 1)

    @property
    def n_edges(self) -> int:
        return self.edge_var.size

    def var_range(self, lo_pos: int, hi_pos: int) -> tuple[int, int]:
        """Index range of the variables whose spatial position lies in ``[lo_pos, hi_pos)``."""
        return (int(np.searchsorted(self.var_position, lo_pos, "left")),
                int(np.searchsorted(self.var_position, hi_pos, "left")))

    def check_range(self, lo_pos: int, hi_pos: int) -> tuple[int, int]:
        return (int(np.searchsorted(self.check_position, lo_pos, "left")),
                int(np.searchsorted(self.check_position, hi_pos, "left")))


@numba.njit(cache=True)
def _clip(x):
    if x > LLR_CLIP:
        return LLR_CLIP
    if x < -LLR_CLIP:
        return -LLR_CLIP
    return x


@numba.njit(cache=True)
def _check_update(check_ptr, v2c, c2v, c_lo, c_hi):
    """Exact tanh rule on checks ``[c_lo, c_hi)`` for every user row."""
    n_users = v2c.shape[0]
    max_deg = 0
    for j in range(c_lo, c_hi):
        max_deg = max(max_deg, check_ptr[j + 1] - check_ptr[j])
    t = np.empty(max_deg)
    for u in range(n_users):
        for j in range(c_lo, c_hi):
            e0 = check_ptr[j]
            deg = check_ptr[j + 1] - e0
            saturated = True
            neg = 0
            for k in range(deg):
                v = v2c[u, e0 + k]
                if v < 0.0:
                    neg += 1
                if abs(v) < LLR_CLIP:
                    saturated = False
                    break
            if saturated:
                # every input pinned at +-LLR_CLIP: one atanh serves all edges
                mag = _clip(2.0 * math.atanh(_T_CLIP ** (deg - 1)))
                for k in range(deg):
                    odd = (neg - (1 if v2c[u, e0 + k] < 0.0 else 0)) & 1
                    c2v[u, e0 + k] = -mag if odd else mag
                continue
            prod = 1.0
            zeros = 0
            for k in range(deg):
                t[k] = math.tanh(0.5 * v2c[u, e0 + k])
                if t[k] == 0.0:
                    zeros += 1
                else:
                    prod *= t[k]
            for k in range(deg):
                if t[k] == 0.0:
                    ext = prod if zeros == 1 else 0.0
                elif zeros > 0:
                    ext = 0.0
                else:
                    ext = prod / t[k]
                if ext >= 1.0:
                    c2v[u, e0 + k] = LLR_CLIP
                elif ext <= -1.0:
                    c2v[u, e0 + k] = -LLR_CLIP
                else:
                    c2v[u, e0 + k] = _clip(2.0 * math.atanh(ext))


@numba.njit(cache=True)
def _var_update(var_ptr, var_edges, llr_ch, c2v, v2c, app, v_lo, v_hi):
    """Variable-to-check messages and a-posteriori LLRs on variables ``[v_lo, v_hi)``."""
    n_users = llr_ch.shape[0]
    for u in range(n_users):
        for i in range(v_lo, v_hi):
            total = llr_ch[u, i]
            for q in range(var_ptr[i], var_ptr[i + 1]):
                total += c2v[u, var_edges[q]]
            app[u, i] = total
            for q in range(var_ptr[i], var_ptr[i + 1]):
                e = var_edges[q]
                v2c[u, e] = _clip(total - c2v[u, e])


@numba.njit(cache=True)
def _app_update(var_ptr, var_edges, llr_ch, c2v, app, v_lo, v_hi):
    n_users = llr_ch.shape[0]
    for u in range(n_users):
        for i in range(v_lo, v_hi):
            total = llr_ch[u, i]
            for q in range(var_ptr[i], var_ptr[i + 1]):
                total += c2v[u, var_edges[q]]
            app[u, i] = total


@numba.njit(cache=True)
def _freeze(var_ptr, var_edges, app, v2c, v_lo, v_hi):
    """Pin outgoing messages of variables ``[v_lo, v_hi)`` to their hard decisions."""
    n_users = app.shape[0]
    for u in range(n_users):
        for i in range(v_lo, v_hi):
            val = LLR_CLIP if app[u, i] >= 0.0 else -LLR_CLIP
            for q in range(var_ptr[i], var_ptr[i + 1]):
                v2c[u, var_edges[q]] = val


@dataclass
class MessageStore:
    """Edge messages and a-posteriori LLRs for a batch of independent decoders."""

    v2c: np.ndarray
    c2v: np.ndarray
    app: np.ndarray

    @classmethod
    def zeros(cls, graph: TannerGraph, n_users: int = 1) -> "MessageStore":
        return cls(np.zeros((n_users, graph.n_edges)), np.zeros((n_users, graph.n_edges)),
                   np.zeros((n_users, graph.n)))

    def copy(self) -> "MessageStore":
        return MessageStore(self.v2c.copy(), self.c2v.copy(), self.app.copy())


def bp_iterate(graph: TannerGraph, llr_ch: np.ndarray, store: MessageStore,
               span: tuple[int, int] | None = None) -> MessageStore:
    """One flooding sum-product iteration restricted to spatial positions ``span``.

    ``span = (p, q)`` activates check positions ``[p, q)`` and variable
    positions ``[p, min(q, L))``.  Variables left of ``p`` keep whatever
    (frozen) messages they hold; nothing outside the span is touched.  The
    store is updated in place and returned.
    """
    llr_ch = np.atleast_2d(np.asarray(llr_ch, dtype=float))
    if span is None:
        span = (0, graph.n_check_positions)
    p, q = span
    v_lo, v_hi = graph.var_range(p, q)
    c_lo, c_hi = graph.check_range(p, q)
    _var_update(graph.var_ptr, graph.var_edges, llr_ch, store.c2v, store.v2c, store.app, v_lo, v_hi)
    _check_update(graph.check_ptr, store.v2c, store.c2v, c_lo, c_hi)
    _app_update(graph.var_ptr, graph.var_edges, llr_ch, store.c2v, store.app, v_lo, v_hi)
    return store


def decode_flooding(graph: TannerGraph, llr_ch: np.ndarray, n_iter: int,
                    early_stop: bool = False, H=None) -> np.ndarray:
    """Plain (unwindowed) flooding BP; returns the a-posteriori LLRs.

    This is deliberately written against the three kernels directly rather
    than :func:`bp_iterate` so it can serve as an independent reference.
    """
    llr_ch = np.atleast_2d(np.asarray(llr_ch, dtype=float))
    n_users = llr_ch.shape[0]
    v2c = np.zeros((n_users, graph.n_edges))
    c2v = np.zeros((n_users, graph.n_edges))
    app = llr_ch.copy()
    for _ in range(n_iter):
        _var_update(graph.var_ptr, graph.var_edges, llr_ch, c2v, v2c, app, 0, graph.n)
        _check_update(graph.check_ptr, v2c, c2v, 0, graph.m)
        _app_update(graph.var_ptr, graph.var_edges, llr_ch, c2v, app, 0, graph.n)
        if early_stop and H is not None:
            hard = (app < 0).astype(np.int64)
            if not np.any((H @ hard.T) % 2):
                break
    return app


# ---------------------------------------------------------------------------
# window schedule
# ---------------------------------------------------------------------------


@dataclass
class WindowState:
    """Position of the decoding window over the ``L + W - 1`` check positions.

    The active span is check positions ``[p, p + W_d)`` and the variable
    positions inside it.  Variable positions left of ``p`` are final.
    """

    n_positions: int
    n_var_positions: int
    W: int
    W_d: int
    p: int = 0
    decided: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.W_d < self.W:
            raise ValueError(f"window length W_d={self.W_d} must be >= coupling width W={self.W}")
        if not 1 <= self.W_d <= self.n_positions:
            raise ValueError(f"W_d={self.W_d} outside [1, {self.n_positions}]")

    @classmethod
    def for_graph(cls, graph: TannerGraph, W: int, W_d: int) -> "WindowState":
        return cls(graph.n_check_positions, graph.n_var_positions, W, W_d)

    @property
    def span(self) -> tuple[int, int]:
        return self.p, min(self.p + self.W_d, self.n_positions)

    @property
    def n_windows(self) -> int:
        """Number of window positions visited: ``L + W - 1 - W_d + 1``."""
        return self.n_positions - self.W_d + 1

    @property
    def is_last(self) -> bool:
        return self.p + self.W_d >= self.n_positions

    @property
    def active_var_positions(self) -> tuple[int, int]:
        lo, hi = self.span
        return min(lo, self.n_var_positions), min(hi, self.n_var_positions)


FREEZE_MODES = ("hard", "keep")


def window_advance(ws: WindowState, graph: TannerGraph, store: MessageStore,
                   freeze: str = "hard") -> WindowState:
    """Shift the window by one position, freezing the variable position that leaves it.

    ``freeze='hard'`` pins the leaving variables' messages to their clipped
    hard decisions; ``'keep'`` leaves their last messages in place.  Raises
    ``StopIteration`` when the window already covers the termination tail.
    """
    if ws.is_last:
        raise StopIteration("window already at the last position")
    if freeze not in FREEZE_MODES:
        raise ValueError(f"unknown freeze mode {freeze!r}")
    v_lo, v_hi = graph.var_range(ws.p, ws.p + 1)
    if freeze == "hard":
        _freeze(graph.var_ptr, graph.var_edges, store.app, store.v2c, v_lo, v_hi)
    decided = (store.app[:, v_lo:v_hi] < 0).astype(np.uint8)
    if ws.decided is None:
        ws.decided = np.zeros(store.app.shape, dtype=np.uint8)
    ws.decided[:, v_lo:v_hi] = decided
    return WindowState(ws.n_positions, ws.n_var_positions, ws.W, ws.W_d, ws.p + 1, ws.decided)


def window_schedule(n_positions: int, W_d: int) -> list[tuple[int, int]]:
    """Spans visited by the windowed decoder, first to last."""
    return [(p, min(p + W_d, n_positions)) for p in range(n_positions - W_d + 1)]


def decode_windowed(graph: TannerGraph, llr_ch: np.ndarray, W: int, W_d: int, I_max: int,
                    trace: list | None = None, freeze: str = "hard") -> np.ndarray:
    """Single-user windowed BP with fixed channel LLRs; returns hard decisions.

    ``trace``, when given, receives ``(window_p, iteration, app copy)`` after
    every iteration.
    """
    llr_ch = np.atleast_2d(np.asarray(llr_ch, dtype=float))
    store = MessageStore.zeros(graph, llr_ch.shape[0])
    store.app[:] = llr_ch
    ws = WindowState.for_graph(graph, W, W_d)
    while True:
        for it in range(I_max):
            bp_iterate(graph, llr_ch, store, ws.span)
            if trace is not None:
                trace.append((ws.p, it, store.app.copy()))
        if ws.is_last:
            break
        ws = window_advance(ws, graph, store, freeze)
    out = (store.app < 0).astype(np.uint8)
    if ws.decided is not None:
        v_hi = graph.var_range(0, ws.p)[1]
        out[:, :v_hi] = ws.decided[:, :v_hi]
    return out
