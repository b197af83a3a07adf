"""Monte Carlo BER campaigns for the coded IDMA system."""

from __future__ import annotations

import dataclasses
import functools
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..code_construction import build_encoder, couple, lift
from ..multiuser import build_interleaver, draw_channel, joint_windowed_receive, map_bpsk, transmit
from ..receiver import TannerGraph
from .config import SimConfig

# fixed spawn-key prefixes of the named random streams
STREAMS = {"interleaver": 1, "info": 2, "phase": 3, "fading": 4, "noise": 5}


def stream(seed: int, name: str, *key: int) -> np.random.Generator:
    """Independent generator for one named stream; ``key`` selects user, frame, etc."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name], *key)))


@dataclass
class PointResult:
    gamma_db: float
    frames: int
    bits: int
    errors: int
    stop: str  # "errors" or "frames"
    position_errors: np.ndarray
    position_bits: np.ndarray
    seconds: float = 0.0

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def position_ber(self) -> np.ndarray:
        return self.position_errors / np.maximum(self.position_bits, 1)


@dataclass
class SimResult:
    config: SimConfig
    points: list[PointResult] = field(default_factory=list)
    label: str = ""

    def ber_curve(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([p.gamma_db for p in self.points]), np.array([p.ber for p in self.points]))

    def to_csv(self, path=None) -> str:
        """CSV with a ``#`` header echoing the configuration and stream seeds.

        Wall-clock times are left out so that reruns are byte-identical.
        """
        cfg = self.config
        buf = io.StringIO()
        if self.label:
            buf.write(f"# run = {self.label}\n")
        for k, v in cfg.items():
            buf.write(f"# {k} = {v}\n")
        buf.write(f"# streams = {', '.join(f'{k}:{v}' for k, v in STREAMS.items())}\n")
        buf.write(f"# r_sum = {cfg.r_sum:.6g}\n# n_cw = {cfg.n_cw}\n")
        buf.write("# gamma is the multi-user SNR sum(P_i) / sigma_n^2 in dB\n")
        n_pos = len(self.points[0].position_bits) if self.points else 0
        cols = ["gamma_db", "frames", "bits", "errors", "ber", "stop"] + [f"ber_pos{t}" for t in range(n_pos)]
        buf.write(",".join(cols) + "\n")
        for p in self.points:
            row = [f"{p.gamma_db:.4f}", str(p.frames), str(p.bits), str(p.errors), f"{p.ber:.6e}", p.stop]
            row += [f"{b:.6e}" for b in p.position_ber]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@functools.lru_cache(maxsize=8)
def _code(parts_key, L: int, Z: int, lift_seed: int, style: str, need_encoder: bool):
    parts = [np.array(p) for p in parts_key]
    cp = couple(parts, L)
    pc = lift(cp, Z, seed=lift_seed, style=style)
    enc = build_encoder(pc) if need_encoder else None
    return cp, pc, TannerGraph.from_parity_check(pc), enc


def prepare(cfg: SimConfig):
    """Coupled protograph, lifted code, Tanner graph and (if needed) encoder for ``cfg``."""
    key = tuple(tuple(map(tuple, p.entries.tolist())) for p in cfg.parts())
    need = (not cfg.all_zero) or cfg.count_on == "info"
    return _code(key, cfg.L, cfg.Z, cfg.lift_seed, cfg.lift_style, need)


def simulate_frame(cfg: SimConfig, gamma_db: float, frame: int, gamma_index: int = 0,
                   prepared=None, on_iteration: Callable | None = None):
    """Transmit and decode one frame; returns ``(sent code bits, decided bits)`` per user."""
    cp, pc, graph, enc = prepared or prepare(cfg)
    N, d_r = cfg.n_users, cfg.d_r
    n_chips = pc.n * d_r
    block = pc.bits_per_position * d_r
    ils = [build_interleaver(cfg.interleaver, n_chips, block, user=u,
                             rng=stream(cfg.seed, "interleaver", u)) for u in range(N)]
    if cfg.all_zero:
        code = np.zeros((N, pc.n), dtype=np.uint8)
    else:
        info = stream(cfg.seed, "info", gamma_index, frame).integers(0, 2, (N, enc.k), dtype=np.uint8)
        code = enc.encode(info)
    chips = np.repeat(code, d_r, axis=1)
    chips = np.array([il.interleave(c) for il, c in zip(ils, chips)])
    cr = draw_channel(N, n_chips, gamma_db, cfg.channel,
                      rng_fading=stream(cfg.seed, "fading", gamma_index, frame),
                      rng_phase=stream(cfg.seed, "phase", gamma_index, frame))
    if cfg.all_zero:
        # a known random chip cover keeps the interference zero-mean
        cover = stream(cfg.seed, "info", gamma_index, frame).integers(0, 2, chips.shape, dtype=np.uint8)
        cr.signs = 1.0 - 2.0 * cover
        chips = chips ^ cover
    y = transmit(map_bpsk(chips, cr.phases), cr, stream(cfg.seed, "noise", gamma_index, frame))
    res = joint_windowed_receive(y, cr, graph, ils, d_r, cp.W, cfg.W_d if cfg.windowed else None,
                                 cfg.I_max, allow_full_windowed=cfg.allow_full_windowed,
                                 on_iteration=on_iteration, freeze=cfg.freeze)
    return code, res.bits


def run_ber(cfg: SimConfig, progress: Callable[[PointResult], None] | None = None,
            stop_below: float | None = None) -> SimResult:
    """BER per configured SNR point; each point stops at ``max_errors`` or ``max_frames``.

    With ``stop_below`` the sweep ends after the first point whose BER is
    below it (points must be given in increasing SNR).
    """
    cfg.validate()
    if not cfg.gammas:
        raise ValueError("no SNR points configured")
    prepared = prepare(cfg)
    cp, pc, graph, enc = prepared
    counted = enc.info_cols if cfg.count_on == "info" else np.arange(pc.n)
    pos_of = pc.var_position()[counted]
    pos_bits = np.bincount(pos_of, minlength=cp.L)
    result = SimResult(cfg)
    for gi, gamma in enumerate(cfg.gammas):
        t0 = time.perf_counter()
        errors = 0
        frames = 0
        pos_err = np.zeros(cp.L, dtype=np.int64)
        while frames < cfg.max_frames and errors < cfg.max_errors:
            sent, got = simulate_frame(cfg, gamma, frames, gi, prepared)
            wrong = sent[:, counted] != got[:, counted]
            errors += int(wrong.sum())
            pos_err += np.bincount(pos_of, weights=wrong.sum(axis=0), minlength=cp.L).astype(np.int64)
            frames += 1
        point = PointResult(float(gamma), frames, frames * cfg.n_users * counted.size, errors,
                            "errors" if errors >= cfg.max_errors else "frames",
                            pos_err, pos_bits * frames * cfg.n_users, time.perf_counter() - t0)
        result.points.append(point)
        if progress is not None:
            progress(point)
        if stop_below is not None and point.ber < stop_below:
            break
    return result


def run_interleaver_comparison(cfg: SimConfig, full_bp_iters: int | None = 1500,
                               progress: Callable | None = None) -> dict[str, SimResult]:
    """Sub-block + windowed, full + windowed and (optionally) full + full-span BP on one config."""
    runs = {
        "subblock+windowed": dataclasses.replace(cfg, interleaver="subblock"),
        "full+windowed": dataclasses.replace(cfg, interleaver="full", allow_full_windowed=True),
    }
    if full_bp_iters:
        runs["full+fullbp"] = dataclasses.replace(cfg, interleaver="full", W_d=0, I_max=full_bp_iters)
    out = {}
    for label, c in runs.items():
        res = run_ber(c, progress)
        res.label = label
        out[label] = res
    return out


def crossing_snr(gammas, bers, target: float) -> float | None:
    """SNR where a decreasing BER curve crosses ``target``.

    Log-linear interpolation between the bracketing points; when the first
    point below ``target`` has no errors at all, its SNR (an upper bound on
    the crossing) is returned.
    """
    g = np.asarray(gammas, dtype=float)
    b = np.asarray(bers, dtype=float)
    order = np.argsort(g)
    g, b = g[order], b[order]
    for k in range(len(g)):
        if b[k] < target:
            if k == 0:
                return None
            if b[k] <= 0:
                return float(g[k])
            t = (np.log10(b[k - 1]) - np.log10(target)) / (np.log10(b[k - 1]) - np.log10(b[k]))
            return float(g[k - 1] + t * (g[k] - g[k - 1]))
    return None
