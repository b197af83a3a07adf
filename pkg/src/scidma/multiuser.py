"""IDMA front end and the joint windowed multi-user receiver.

Chips are the repetition-coded bits of one user (``n * d_r`` per frame).  An
interleaver stores ``perm`` with the convention ``channel[k] = code[perm[k]]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numba
import numpy as np

from .receiver import (LLR_CLIP, MessageStore, TannerGraph, WindowState, bp_iterate,
                       window_advance)

FULL = "full"
SUBBLOCK = "subblock"


@dataclass(frozen=True, eq=False)
class Interleaver:
    perm: np.ndarray
    kind: str
    block_len: int
    user: int = 0
    seed: int | None = None

    def __post_init__(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        object.__setattr__(self, "inverse", inv)

    @property
    def size(self) -> int:
        return self.perm.size

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.perm]

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.inverse]

    def channel_index(self, code_idx) -> np.ndarray:
        """Channel slots that carry the given code-domain chips."""
        return self.inverse[code_idx]


def build_interleaver(kind: str, n_sym: int, block_len: int | None = None, user: int = 0,
                      seed: int | None = 0, rng: np.random.Generator | None = None) -> Interleaver:
    """Random full-length or sub-block (locally confined) permutation.

    Without an explicit ``rng`` the permutation is a pure function of
    ``(seed, user)``.
    """
    kind = kind.lower()
    if rng is None:
        rng = np.random.default_rng([seed if seed is not None else 0, user])
    if kind == FULL:
        return Interleaver(rng.permutation(n_sym), FULL, n_sym, user, seed)
    if kind != SUBBLOCK:
        raise ValueError(f"unknown interleaver kind {kind!r}")
    if not block_len or n_sym % block_len:
        raise ValueError(f"block length {block_len} does not divide {n_sym}")
    n_blocks = n_sym // block_len
    perm = np.argsort(rng.random((n_blocks, block_len)), axis=1)
    perm += (np.arange(n_blocks) * block_len)[:, None]
    return Interleaver(perm.ravel(), SUBBLOCK, block_len, user, seed)


def map_bpsk(bits: np.ndarray, phases: np.ndarray | None = None) -> np.ndarray:
    """Bit ``b`` becomes ``(1 - 2b) exp(j phase)``."""
    s = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    if phases is None:
        return s.astype(complex)
    return s * np.exp(1j * np.asarray(phases))


@dataclass(eq=False)
class ChannelRealization:
    """Per-user powers, fading, scrambling phases and noise for one frame.

    ``h`` is ``None`` for AWGN (all ones) and ``phases`` is ``None`` when
    scrambling is off.  ``sigma2`` is the total complex noise variance.
    ``signs`` is an optional known +-1 chip cover; the all-zero-codeword mode
    uses it so that the superimposed signal looks like random data.
    """

    power: np.ndarray
    sigma2: float
    n_chips: int
    h: np.ndarray | None = None
    phases: np.ndarray | None = None
    y: np.ndarray | None = field(default=None, repr=False)
    signs: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.power.size

    @property
    def snr(self) -> float:
        return float(self.power.sum() / self.sigma2)

    def gain(self) -> np.ndarray:
        """Complex coefficient ``sqrt(P) h exp(j phase)`` per user and chip."""
        g = np.broadcast_to(np.sqrt(self.power)[:, None], (self.n_users, self.n_chips)).astype(complex)
        if self.h is not None:
            g = g * self.h
        if self.phases is not None:
            g = g * np.exp(1j * self.phases)
        if self.signs is not None:
            g = g * self.signs
        return g

    def gain2(self) -> np.ndarray:
        """``P |h|^2`` per user and chip."""
        p = np.broadcast_to(self.power[:, None], (self.n_users, self.n_chips))
        if self.h is None:
            return np.array(p, dtype=float)
        return p * np.abs(self.h) ** 2


def draw_channel(n_users: int, n_chips: int, gamma_db: float, kind: str = "awgn",
                 rng_fading: np.random.Generator | None = None,
                 rng_phase: np.random.Generator | None = None,
                 scramble: bool = True, power: np.ndarray | None = None) -> ChannelRealization:
    """Equal powers ``1/N`` unless given; ``sigma2`` set so that ``sum(P) / sigma2 = gamma``."""
    power = np.full(n_users, 1.0 / n_users) if power is None else np.asarray(power, dtype=float)
    sigma2 = power.sum() * 10 ** (-gamma_db / 10)
    kind = kind.lower()
    h = None
    if kind == "rayleigh":
        rng_fading = rng_fading or np.random.default_rng()
        h = (rng_fading.standard_normal((n_users, n_chips))
             + 1j * rng_fading.standard_normal((n_users, n_chips))) / np.sqrt(2)
        scramble = False
    elif kind != "awgn":
        raise ValueError(f"unknown channel {kind!r}")
    phases = None
    if scramble:
        rng_phase = rng_phase or np.random.default_rng()
        phases = rng_phase.uniform(0.0, np.pi, (n_users, n_chips))
    return ChannelRealization(power, sigma2, n_chips, h, phases)


def transmit(symbols: np.ndarray, cr: ChannelRealization, rng_noise: np.random.Generator | None = None,
             noiseless: bool = False) -> np.ndarray:
    """Superimpose unit-energy ``symbols`` (already scrambled) of all users and add noise.

    ``symbols`` are the mapper outputs, so only power and fading are applied
    here.  The result is also stored in ``cr.y``.
    """
    symbols = np.atleast_2d(symbols)
    if symbols.shape != (cr.n_users, cr.n_chips):
        raise ValueError(f"symbols have shape {symbols.shape}, expected {(cr.n_users, cr.n_chips)}")
    amp = np.sqrt(cr.power)[:, None] * (cr.h if cr.h is not None else 1.0)
    y = np.sum(amp * symbols, axis=0)
    if not noiseless:
        rng_noise = rng_noise or np.random.default_rng()
        s = np.sqrt(cr.sigma2 / 2)
        y = y + s * (rng_noise.standard_normal(cr.n_chips) + 1j * rng_noise.standard_normal(cr.n_chips))
    cr.y = y
    return y


# ---------------------------------------------------------------------------
# soft interference cancellation
# ---------------------------------------------------------------------------


def soft_symbols(llr_a: np.ndarray) -> np.ndarray:
    """Conditional-mean BPSK estimate ``tanh(L/2)`` (before phase/fading)."""
    return np.tanh(0.5 * np.asarray(llr_a, dtype=float))


def estimate_interference_power(x_hat: np.ndarray, cr: ChannelRealization, block_len: int) -> np.ndarray:
    """Residual interference power seen by each user in each sub-block.

    Returns ``(n_users, n_blocks)`` with entry ``sum_{i != j} mean_s(P_i |h_i|^2 (1 - x_hat_i^2))``.
    """
    x_hat = np.atleast_2d(x_hat)
    if cr.n_chips % block_len:
        raise ValueError(f"block length {block_len} does not divide {cr.n_chips}")
    per_user = (cr.gain2() * (1.0 - x_hat ** 2)).reshape(cr.n_users, -1, block_len).mean(axis=2)
    return np.maximum(per_user.sum(axis=0, keepdims=True) - per_user, 0.0)


def soic_demap(y: np.ndarray, x_hat: np.ndarray, cr: ChannelRealization, sigma2_i: np.ndarray,
               block_len: int, users=None) -> np.ndarray:
    """Extrinsic demapper LLRs of all (or the listed) users over the whole frame.

    ``x_hat`` holds real soft symbols; ``sigma2_i`` comes from
    :func:`estimate_interference_power`.
    """
    g = cr.gain()
    recon = g * np.atleast_2d(x_hat)
    total = recon.sum(axis=0)
    users = range(cr.n_users) if users is None else users
    out = []
    for j in users:
        yj = y - total + recon[j]
        var = np.repeat(sigma2_i[j], block_len) + cr.sigma2
        out.append(np.clip(4.0 * np.real(yj * np.conj(g[j])) / var, -LLR_CLIP, LLR_CLIP))
    return np.array(out)


# ---------------------------------------------------------------------------
# joint receiver
# ---------------------------------------------------------------------------


@dataclass
class ReceiveResult:
    bits: np.ndarray
    app: np.ndarray
    iterations: int


@numba.njit(cache=True)
def _mud_update(idx, llr_a, last_a, g, g2, x_hat, recon_total, resid, block_resid, block_len):
    """Refresh soft symbols at the channel slots ``idx[u]`` of every user."""
    n_users, n_act = idx.shape
    n_blocks = block_resid.shape[1]
    touched = np.zeros(n_blocks, dtype=np.bool_)
    for u in range(n_users):
        touched[:] = False
        for k in range(n_act):
            c = idx[u, k]
            if llr_a[u, k] == last_a[u, c]:
                continue
            last_a[u, c] = llr_a[u, k]
            new = math.tanh(0.5 * llr_a[u, k])
            recon_total[c] += g[u, c] * (new - x_hat[u, c])
            x_hat[u, c] = new
            resid[u, c] = g2[u, c] * (1.0 - new * new)
            touched[c // block_len] = True
        for b in range(n_blocks):
            if touched[b]:
                acc = 0.0
                for c in range(b * block_len, (b + 1) * block_len):
                    acc += resid[u, c]
                block_resid[u, b] = acc / block_len


@numba.njit(cache=True)
def _mud_demap(idx, y, g, x_hat, recon_total, block_resid, sigma2, block_len, out):
    """SoIC extrinsic LLRs at the channel slots ``idx[u]`` of every user."""
    n_users, n_act = idx.shape
    block_total = np.zeros(block_resid.shape[1])
    for u in range(n_users):
        block_total += block_resid[u]
    for u in range(n_users):
        for k in range(n_act):
            c = idx[u, k]
            b = c // block_len
            var = block_total[b] - block_resid[u, b]
            if var < 0.0:
                var = 0.0
            var += sigma2
            yj = y[c] - recon_total[c] + g[u, c] * x_hat[u, c]
            gc = g[u, c]
            v = 4.0 * (yj.real * gc.real + yj.imag * gc.imag) / var
            out[u, k] = min(max(v, -LLR_CLIP), LLR_CLIP)


class _Mud:
    """Incrementally maintained soft reconstruction for the SoIC detector."""

    def __init__(self, y, cr: ChannelRealization, block_len: int):
        self.y = np.ascontiguousarray(y, dtype=complex)
        self.sigma2 = float(cr.sigma2)
        self.block_len = block_len
        self.g = np.ascontiguousarray(cr.gain())
        self.g2 = np.ascontiguousarray(cr.gain2())
        self.x_hat = np.zeros((cr.n_users, cr.n_chips))
        self.last_a = np.zeros((cr.n_users, cr.n_chips))
        self.recon_total = np.zeros(cr.n_chips, dtype=complex)
        self.resid = self.g2.copy()  # P |h|^2 (1 - x_hat^2)
        n_blocks = cr.n_chips // block_len
        self.block_resid = self.resid.reshape(cr.n_users, n_blocks, block_len).mean(axis=2)

    def update(self, idx: np.ndarray, llr_a: np.ndarray):
        _mud_update(idx, llr_a, self.last_a, self.g, self.g2, self.x_hat, self.recon_total, self.resid,
                    self.block_resid, self.block_len)

    def demap(self, idx: np.ndarray, out: np.ndarray) -> np.ndarray:
        _mud_demap(idx, self.y, self.g, self.x_hat, self.recon_total, self.block_resid,
                   self.sigma2, self.block_len, out)
        return out


def joint_windowed_receive(y: np.ndarray, cr: ChannelRealization, graph: TannerGraph,
                           interleavers: list[Interleaver], d_r: int, W: int, W_d: int | None,
                           I_max: int, allow_full_windowed: bool = False,
                           on_iteration: Callable | None = None, freeze: str = "hard") -> ReceiveResult:
    """Joint SoIC detection and windowed BP decoding of all users.

    ``W_d=None`` (or ``L + W - 1``) runs full-span BP for ``I_max``
    iterations.  Each iteration performs one SoIC update on the channel slots
    of the active positions followed by one BP iteration, for every user.
    Code chips whose slot lies outside the window keep the detector output
    their slot last received (initially the zero-a-priori one); with sub-block
    interleavers this never happens.  ``on_iteration(p, it,
    store)`` is called after every iteration.  ``freeze`` selects how
    positions leaving the window are frozen (see ``window_advance``).
    """
    n_users = cr.n_users
    if len(interleavers) != n_users:
        raise ValueError("need one interleaver per user")
    n_pos = graph.n_check_positions
    if W_d is None:
        W_d = n_pos
    windowed = W_d < n_pos
    if windowed and not allow_full_windowed and any(il.kind == FULL for il in interleavers):
        raise ValueError("windowed decoding with full interleavers is rejected; "
                         "use sub-block interleavers or set allow_full_windowed")
    n_chips = graph.n * d_r
    if any(il.size != n_chips for il in interleavers) or cr.n_chips != n_chips:
        raise ValueError(f"frame must carry n * d_r = {n_chips} chips per user")
    block_len = interleavers[0].block_len if interleavers[0].kind == SUBBLOCK else \
        (graph.n // graph.n_var_positions) * d_r

    mud = _Mud(np.asarray(y), cr, block_len)
    # detector output per channel slot; every slot starts from a zero-a-priori pass
    all_slots = np.broadcast_to(np.arange(n_chips), (n_users, n_chips))
    llr_chan = mud.demap(np.ascontiguousarray(all_slots), np.empty((n_users, n_chips)))
    llr_code = np.zeros((n_users, n_chips))  # detector output seen by each code chip
    llr_ch = np.zeros((n_users, graph.n))
    store = MessageStore.zeros(graph, n_users)
    ws = WindowState.for_graph(graph, W, W_d)
    total_it = 0
    while True:
        lo, hi = ws.span
        v_lo, v_hi = graph.var_range(lo, hi)
        c_lo, c_hi = v_lo * d_r, v_hi * d_r
        # the detector refreshes the channel slots of the active positions only
        active = np.ascontiguousarray(np.broadcast_to(np.arange(c_lo, c_hi), (n_users, c_hi - c_lo)))
        chan_idx = np.array([il.channel_index(np.arange(c_lo, c_hi)) for il in interleavers])
        rows = np.arange(n_users)[:, None]
        ext = np.empty((n_users, c_hi - c_lo))
        for it in range(I_max):
            llr_chan[:, c_lo:c_hi] = mud.demap(active, ext)
            llr_code[:, c_lo:c_hi] = llr_chan[rows, chan_idx]
            llr_ch[:, v_lo:v_hi] = llr_code[:, c_lo:c_hi].reshape(n_users, -1, d_r).sum(axis=2)
            bp_iterate(graph, llr_ch, store, (lo, hi))
            prior = np.repeat(store.app[:, v_lo:v_hi], d_r, axis=1) - llr_code[:, c_lo:c_hi]
            np.clip(prior, -LLR_CLIP, LLR_CLIP, out=prior)
            mud.update(chan_idx, prior)
            total_it += 1
            if on_iteration is not None:
                on_iteration(ws.p, it, store)
        if ws.is_last:
            break
        ws = window_advance(ws, graph, store, freeze)
    bits = (store.app < 0).astype(np.uint8)
    if ws.decided is not None:
        done = graph.var_range(0, ws.p)[1]
        bits[:, :done] = ws.decided[:, :done]
    return ReceiveResult(bits, store.app, total_it)


def dump_frame(path, cr: ChannelRealization, llrs: np.ndarray | None = None) -> None:
    """Write one row per chip: y, then per-user h, phase and optional LLR."""
    n = cr.n_users
    header = ["chip", "y_re", "y_im"]
    for i in range(n):
        header += [f"h{i}_re", f"h{i}_im", f"phase{i}"] + ([f"llr{i}"] if llrs is not None else [])
    y = cr.y if cr.y is not None else np.zeros(cr.n_chips, dtype=complex)
    h = cr.h if cr.h is not None else np.ones((n, cr.n_chips), dtype=complex)
    ph = cr.phases if cr.phases is not None else np.zeros((n, cr.n_chips))
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(cr.n_chips):
            row = [k, repr(float(y[k].real)), repr(float(y[k].imag))]
            for i in range(n):
                row += [repr(float(h[i, k].real)), repr(float(h[i, k].imag)), repr(float(ph[i, k]))]
                if llrs is not None:
                    row.append(repr(float(llrs[i, k])))
            w.writerow(row)
