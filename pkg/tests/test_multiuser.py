import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scidma.code_construction import couple, lift, named_code_parts
from scidma.multiuser import (FULL, SUBBLOCK, _Mud, build_interleaver, draw_channel,
                              estimate_interference_power, joint_windowed_receive, map_bpsk, soft_symbols,
                              soic_demap, transmit)
from scidma.receiver import TannerGraph, decode_windowed, rep_decode


# -- interleavers ------------------------------------------------------------

def test_full_interleaver_small():
    il = build_interleaver(FULL, 4, user=0, seed=3)
    assert sorted(il.perm.tolist()) == [0, 1, 2, 3]


def test_subblock_locality_small():
    il = build_interleaver(SUBBLOCK, 8, 4, user=2, seed=1)
    assert sorted(il.perm[:4].tolist()) == [0, 1, 2, 3]
    assert sorted(il.perm[4:].tolist()) == [4, 5, 6, 7]


def test_interleaver_determinism():
    a = build_interleaver(SUBBLOCK, 400, 40, user=5, seed=9)
    b = build_interleaver(SUBBLOCK, 400, 40, user=5, seed=9)
    c = build_interleaver(SUBBLOCK, 400, 40, user=6, seed=9)
    assert np.array_equal(a.perm, b.perm)
    assert not np.array_equal(a.perm, c.perm)


@settings(max_examples=60, deadline=None)
@given(n_blocks=st.integers(1, 12), block=st.integers(1, 50), user=st.integers(0, 64),
       seed=st.integers(0, 2**32 - 1), kind=st.sampled_from([FULL, SUBBLOCK]))
def test_interleaver_bijective_and_local(n_blocks, block, user, seed, kind):
    n = n_blocks * block
    il = build_interleaver(kind, n, block, user=user, seed=seed)
    assert np.array_equal(np.sort(il.perm), np.arange(n))
    x = np.random.default_rng(seed).normal(size=n)
    assert np.array_equal(il.deinterleave(il.interleave(x)), x)
    assert np.array_equal(il.interleave(il.deinterleave(x)), x)
    assert np.array_equal(il.interleave(x)[il.channel_index(np.arange(n))], x)
    if kind == SUBBLOCK:
        assert np.array_equal(il.perm // block, np.arange(n) // block)


def test_interleaver_errors():
    with pytest.raises(ValueError):
        build_interleaver(SUBBLOCK, 10, 4)
    with pytest.raises(ValueError):
        build_interleaver("spiral", 10, 5)


# -- mapper and channel --------------------------------------------------------

def test_map_bpsk():
    assert map_bpsk([0], [0.0])[0] == pytest.approx(1.0)
    assert map_bpsk([1], [np.pi / 2])[0] == pytest.approx(-1j)
    rng = np.random.default_rng(0)
    s = map_bpsk(rng.integers(0, 2, 1000), rng.uniform(0, np.pi, 1000))
    assert np.allclose(np.abs(s), 1.0)


def test_superposition_noiseless():
    cr = draw_channel(1, 4, 10.0, scramble=False)
    y = transmit(map_bpsk(np.array([[0, 1, 1, 0]])), cr, noiseless=True)
    assert np.allclose(y, np.sqrt(cr.power[0]) * np.array([1, -1, -1, 1]))
    cr2 = draw_channel(2, 1, 10.0, scramble=False)
    y2 = transmit(map_bpsk(np.zeros((2, 1), dtype=int)), cr2, noiseless=True)
    assert y2[0] == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("kind", ["awgn", "rayleigh"])
def test_received_second_moment(kind):
    N, n, gamma_db = 8, 200_000, 3.0
    rng = np.random.default_rng(42)
    cr = draw_channel(N, n, gamma_db, kind, rng_fading=rng, rng_phase=rng)
    bits = rng.integers(0, 2, (N, n))
    y = transmit(map_bpsk(bits, cr.phases), cr, rng)
    expected = cr.power.sum() + cr.sigma2
    assert np.mean(np.abs(y) ** 2) == pytest.approx(expected, rel=0.01)
    assert cr.snr == pytest.approx(10 ** (gamma_db / 10))


def test_rayleigh_disables_scrambling():
    cr = draw_channel(3, 10, 0.0, "rayleigh", rng_fading=np.random.default_rng(1))
    assert cr.phases is None and cr.h is not None
    assert np.all(draw_channel(3, 1000, 0.0, rng_phase=np.random.default_rng(1)).phases < np.pi)


# -- soft interference cancellation --------------------------------------------

def _frame(N, n, gamma_db, seed=0, kind="awgn"):
    rng = np.random.default_rng(seed)
    cr = draw_channel(N, n, gamma_db, kind, rng_fading=rng, rng_phase=rng)
    bits = rng.integers(0, 2, (N, n))
    y = transmit(map_bpsk(bits, cr.phases), cr, rng)
    return cr, bits, y


def test_zero_apriori_interference_power():
    cr, _, _ = _frame(4, 400, 0.0, kind="rayleigh")
    s2 = estimate_interference_power(np.zeros((4, 400)), cr, 100)
    g2 = cr.gain2().reshape(4, 4, 100).mean(axis=2)
    for j in range(4):
        assert np.allclose(s2[j], g2.sum(axis=0) - g2[j])


def test_perfect_apriori_interference_power_is_zero():
    cr, bits, _ = _frame(4, 400, 0.0)
    x = 1.0 - 2.0 * bits
    assert np.allclose(estimate_interference_power(x, cr, 100), 0.0)


def test_half_known_interference_power():
    N, n = 4, 4000
    cr, bits, _ = _frame(N, n, 0.0)
    x = np.where(np.random.default_rng(1).random((N, n)) < 0.5, 1.0 - 2.0 * bits, 0.0)
    half = estimate_interference_power(x, cr, 2000)
    full = estimate_interference_power(np.zeros((N, n)), cr, 2000)
    assert np.allclose(half, 0.5 * full, rtol=0.05)


def test_perfect_cancellation_gives_single_user_llr():
    N, n, gamma_db = 8, 200_000, 5.0
    cr, bits, y = _frame(N, n, gamma_db, seed=3)
    x = 1.0 - 2.0 * bits
    llr = soic_demap(y, x, cr, np.zeros((N, 1)), n, users=[2])[0]
    others = np.delete(np.arange(N), 2)
    y_j = y - (cr.gain()[others] * x[others]).sum(axis=0)
    ref = 4 * np.sqrt(cr.power[2]) * np.real(y_j * np.exp(-1j * cr.phases[2])) / cr.sigma2
    assert np.allclose(llr, np.clip(ref, -30, 30))
    # moments of the sign-corrected LLR: mean 4 gamma_j, variance 8 gamma_j
    gj = cr.power[2] / cr.sigma2
    z = llr * x[2]
    assert np.mean(z) == pytest.approx(4 * gj, rel=0.05)
    assert np.var(z) == pytest.approx(8 * gj, rel=0.05)


def test_zero_apriori_sinr():
    # N=8, P=1/8, gamma=0 dB: SINR (1/8) / (7/8 + 1) = 1/15 per user
    N, n = 8, 100_000
    cr, bits, y = _frame(N, n, 0.0, seed=5)
    s2 = estimate_interference_power(np.zeros((N, n)), cr, n)
    assert s2[0, 0] / cr.power[0] == pytest.approx(7.0)
    llr = soic_demap(y, np.zeros((N, n)), cr, s2, n)
    z = llr * (1.0 - 2.0 * bits)
    assert np.mean(z) / 4 == pytest.approx(1 / 15, rel=0.02)


def test_incremental_detector_matches_reference():
    N, n, block = 5, 600, 100
    cr, bits, y = _frame(N, n, 2.0, seed=8, kind="rayleigh")
    rng = np.random.default_rng(9)
    prior = rng.normal(0, 3, (N, n))
    mud = _Mud(y, cr, block)
    idx = np.ascontiguousarray(np.broadcast_to(np.arange(n), (N, n)))
    mud.update(idx, prior)
    got = mud.demap(idx, np.empty((N, n)))
    xh = soft_symbols(prior)
    ref = soic_demap(y, xh, cr, estimate_interference_power(xh, cr, block), block)
    assert np.allclose(got, ref, atol=1e-9)
    # a partial refresh touches only the listed slots
    sel = np.ascontiguousarray(np.sort(rng.choice(n, (N, 50), replace=True), axis=1))
    new = rng.normal(0, 3, (N, 50))
    mud.update(sel, new)
    for u in range(N):
        xh[u, sel[u]] = soft_symbols(new[u])
    ref = soic_demap(y, xh, cr, estimate_interference_power(xh, cr, block), block)
    assert np.allclose(mud.demap(idx, np.empty((N, n))), ref, atol=1e-9)


# -- joint receiver --------------------------------------------------------------

def _coded_frame(N, gamma_db, d_r=2, L=8, Z=20, kind=SUBBLOCK, seed=0, noiseless=False):
    pc = lift(couple(named_code_parts("c1"), L), Z, seed=1)
    g = TannerGraph.from_parity_check(pc)
    n_chips = pc.n * d_r
    rng = np.random.default_rng(seed)
    ils = [build_interleaver(kind, n_chips, pc.bits_per_position * d_r, user=u, seed=seed) for u in range(N)]
    code = np.zeros((N, pc.n), dtype=np.uint8)
    cover = rng.integers(0, 2, (N, n_chips), dtype=np.uint8)
    chips = np.array([il.interleave(np.repeat(c, d_r)) for il, c in zip(ils, code)]) ^ cover
    cr = draw_channel(N, n_chips, gamma_db, rng_phase=rng)
    cr.signs = 1.0 - 2.0 * cover
    y = transmit(map_bpsk(chips, cr.phases), cr, rng, noiseless=noiseless)
    return pc, g, ils, cr, y, code


def test_single_user_reduces_to_windowed_bp():
    pc, g, ils, cr, y, code = _coded_frame(1, -1.0)
    res = joint_windowed_receive(y, cr, g, ils, 2, 3, 4, 8)
    chan = soic_demap(y, np.zeros((1, cr.n_chips)), cr, np.zeros((1, 1)), cr.n_chips)
    llr = rep_decode(ils[0].deinterleave(chan), 2)
    assert np.array_equal(res.bits, decode_windowed(g, llr, 3, 4, 8))


def test_noiseless_two_users_decode():
    pc, g, ils, cr, y, code = _coded_frame(2, 30.0, noiseless=True)
    res = joint_windowed_receive(y, cr, g, ils, 2, 3, 4, 5)
    assert np.array_equal(res.bits, code)


def test_receiver_deterministic():
    a = _coded_frame(4, 6.0, seed=3)
    b = _coded_frame(4, 6.0, seed=3)
    ra = joint_windowed_receive(a[4], a[3], a[1], a[2], 2, 3, 4, 6)
    rb = joint_windowed_receive(b[4], b[3], b[1], b[2], 2, 3, 4, 6)
    assert np.array_equal(ra.bits, rb.bits) and np.array_equal(ra.app, rb.app)


def test_full_interleaver_with_window_rejected():
    pc, g, ils, cr, y, code = _coded_frame(2, 5.0, kind=FULL)
    with pytest.raises(ValueError):
        joint_windowed_receive(y, cr, g, ils, 2, 3, 4, 3)
    joint_windowed_receive(y, cr, g, ils, 2, 3, 4, 3, allow_full_windowed=True)
    joint_windowed_receive(y, cr, g, ils, 2, 3, None, 3)


def test_frame_size_checked():
    pc, g, ils, cr, y, code = _coded_frame(2, 5.0)
    with pytest.raises(ValueError):
        joint_windowed_receive(y, cr, g, ils, 4, 3, 4, 3)
    with pytest.raises(ValueError):
        joint_windowed_receive(y, cr, g, ils[:1], 2, 3, 4, 3)


def test_iteration_callback():
    pc, g, ils, cr, y, code = _coded_frame(2, 8.0)
    seen = []
    res = joint_windowed_receive(y, cr, g, ils, 2, 3, 4, 3, on_iteration=lambda p, it, s: seen.append((p, it)))
    n_windows = g.n_check_positions - 4 + 1
    assert len(seen) == res.iterations == 3 * n_windows
    assert seen[-1] == (n_windows - 1, 2)
