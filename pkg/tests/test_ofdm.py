from math import erfc, sqrt

import numpy as np
import pytest

from ris_semcom.ofdm import (
    BITS_PER_PART,
    StreamPlan,
    demodulate,
    map_bits_to_streams,
    modulate,
    qam16_modulate,
    qpsk_modulate,
    random_bits,
    sum_rate,
    svd_subchannels,
    time_domain_reference,
    transmit_frame,
)
from ris_semcom.ris import RisConfig, cascade
from ris_semcom.scenario import ScenarioConfig, Schedule, UserState, generate_links


def q_function(x: float) -> float:
    return 0.5 * erfc(x / sqrt(2.0))


def flat_svd(k: int, gains=(1.0, 1.0)):
    """Identity decomposition with prescribed flat subchannel gains."""
    n = len(gains)
    u = np.repeat(np.eye(n, dtype=complex)[None], k, axis=0)
    v = np.repeat(np.eye(n, dtype=complex)[None], k, axis=0)
    lam = np.repeat(np.asarray(gains, float)[None], k, axis=0)
    return svd_like(u, v, lam)


def svd_like(u, v, lam):
    from ris_semcom.ofdm import SvdDecomposition

    return SvdDecomposition(u_k=u, v_k=v, lambda_k=lam)


# ---------------------------------------------------------------- SVD


def test_svd_identity_channel():
    h = np.repeat(np.eye(2, dtype=complex)[None], 4, axis=0)
    svd = svd_subchannels(h)
    assert np.allclose(svd.lambda_k, 1.0)


def test_svd_rank_deficient_diagonal():
    h = np.repeat(np.diag([3.0, 0.0]).astype(complex)[None], 4, axis=0)
    svd = svd_subchannels(h)
    assert np.allclose(svd.lambda_k[:, 0], 3.0)
    assert np.allclose(svd.lambda_k[:, 1], 0.0)


def test_svd_reconstruction_on_random_batch():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((1000, 2, 2)) + 1j * rng.standard_normal((1000, 2, 2))
    svd = svd_subchannels(h)
    recon = np.einsum("kur,kr,kbr->kub", svd.u_k, svd.lambda_k, np.conj(svd.v_k))
    err = np.linalg.norm(recon - h, axis=(1, 2)) / np.linalg.norm(h, axis=(1, 2))
    assert np.max(err) <= 1e-9
    assert np.all(svd.lambda_k[:, 0] >= svd.lambda_k[:, 1])
    assert np.all(svd.lambda_k >= 0)
    # orthonormal columns
    gram_u = np.einsum("kur,kus->krs", np.conj(svd.u_k), svd.u_k)
    gram_v = np.einsum("kbr,kbs->krs", np.conj(svd.v_k), svd.v_k)
    eye = np.eye(2)
    assert np.max(np.abs(gram_u - eye)) <= 1e-10
    assert np.max(np.abs(gram_v - eye)) <= 1e-10


def test_svd_sign_convention_is_reproducible():
    rng = np.random.default_rng(1)
    h = rng.standard_normal((16, 2, 2)) + 1j * rng.standard_normal((16, 2, 2))
    a = svd_subchannels(h)
    b = svd_subchannels(h.copy())
    assert np.array_equal(a.u_k, b.u_k) and np.array_equal(a.v_k, b.v_k)
    anchor = a.u_k[:, 0, :]
    assert np.all(np.abs(anchor.imag) <= 1e-12)
    assert np.all(anchor.real > 0)


def test_svd_rejects_non_finite():
    h = np.zeros((2, 2, 2), complex)
    h[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        svd_subchannels(h)


# ---------------------------------------------------- constellations


def test_qpsk_unit_energy_and_gray_adjacency():
    bits = np.array([0, 0, 0, 1, 1, 1, 1, 0])
    pts = qpsk_modulate(bits)
    assert np.allclose(np.abs(pts) ** 2, 1.0, atol=1e-12)
    # exhaustive adjacency audit: minimum-distance neighbors differ in 1 bit
    all_bits = [(b0, b1) for b0 in (0, 1) for b1 in (0, 1)]
    points = {bb: qpsk_modulate(np.array(bb))[0] for bb in all_bits}
    dmin = min(
        abs(points[a] - points[b]) for a in all_bits for b in all_bits if a != b
    )
    for a in all_bits:
        for b in all_bits:
            if a != b and abs(points[a] - points[b]) <= dmin + 1e-9:
                assert sum(x != y for x, y in zip(a, b)) == 1


def test_qam16_unit_energy_and_gray_adjacency():
    rng = np.random.default_rng(2)
    bits = random_bits(rng, 4 * 4096)
    pts = qam16_modulate(bits)
    assert abs(np.mean(np.abs(pts) ** 2) - 1.0) <= 0.02
    codes = [tuple((b >> s) & 1 for s in (3, 2, 1, 0)) for b in range(16)]
    points = {c: qam16_modulate(np.array(c))[0] for c in codes}
    dmin = min(abs(points[a] - points[b]) for a in codes for b in codes if a != b)
    for a in codes:
        for b in codes:
            if a != b and abs(points[a] - points[b]) <= dmin + 1e-9:
                assert sum(x != y for x, y in zip(a, b)) == 1


@pytest.mark.parametrize("order", [4, 16])
def test_modulation_bijection_exhaustive_12_bit(order):
    # all 2^12 12-bit prefixes, both bit orders
    width = 12
    for value in range(2**width):
        bits = np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], np.uint8)
        for seq in (bits, bits[::-1]):
            assert np.array_equal(demodulate(modulate(seq, order), order), seq)


# ------------------------------------------------------- stream plans


def test_stream_plan_modulation_rule():
    assert StreamPlan((0, 0)).shared and StreamPlan((0, 0)).modulation_order == 16
    assert StreamPlan((1, 1)).shared
    assert not StreamPlan((0, 1)).shared
    assert StreamPlan((0, 1)).modulation_order == 4


def test_map_split_plan():
    rng = np.random.default_rng(3)
    bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
    payload = map_bits_to_streams(bb, bo, StreamPlan((0, 1)))
    assert payload.symbols[0].size == payload.symbols[1].size == 1024
    for d in range(2):
        assert abs(np.mean(np.abs(payload.symbols[d]) ** 2) - 1.0) <= 1e-12 + 0.1
    # 4-QAM has exactly unit energy per symbol
    assert np.allclose(np.abs(payload.symbols[0]) ** 2, 1.0, atol=1e-12)


def test_map_shared_plan_blocks_other_stream():
    rng = np.random.default_rng(4)
    bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
    payload = map_bits_to_streams(bb, bo, StreamPlan((1, 1)))
    assert payload.symbols[0].size == 0
    assert payload.symbols[1].size == 1024
    assert np.array_equal(payload.stream_bits[1][:2048], bb)
    assert np.array_equal(payload.stream_bits[1][2048:], bo)


def test_map_rejects_wrong_bit_count():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        map_bits_to_streams(random_bits(rng, 100), random_bits(rng, 2048), StreamPlan((0, 1)))


# ------------------------------------------------------ transmission


def test_noiseless_identity_transport():
    rng = np.random.default_rng(6)
    bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
    payload = map_bits_to_streams(bb, bo, StreamPlan((0, 1)))
    svd = flat_svd(1024)
    rx_bg, rx_obj, errors = transmit_frame(payload, svd, 300.0, rng)
    assert np.array_equal(rx_bg, bb) and np.array_equal(rx_obj, bo)
    assert errors.sum() == 0


def test_dead_subchannel_decodes_at_chance():
    rng = np.random.default_rng(7)
    bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
    payload = map_bits_to_streams(bb, bo, StreamPlan((0, 1)))
    svd = flat_svd(1024, gains=(1.0, 0.0))
    _, rx_obj, _ = transmit_frame(payload, svd, 3.0, rng)
    ber = np.mean(rx_obj != bo)
    assert abs(ber - 0.5) <= 0.03


def test_qpsk_ber_matches_q_function():
    # >= 1e6 bits on a unit-gain subchannel at Es/N0 = 3 dB
    rng = np.random.default_rng(8)
    snr_db = 3.0
    expected = q_function(sqrt(10 ** (snr_db / 10.0)))
    n_frames = 256  # 256 frames x 4096 bits > 1e6 bits
    errors = 0
    total = 0
    svd = flat_svd(1024)
    for _ in range(n_frames):
        bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
        payload = map_bits_to_streams(bb, bo, StreamPlan((0, 1)))
        _, _, errs = transmit_frame(payload, svd, snr_db, rng)
        errors += errs.sum()
        total += 4096
    ber = errors / total
    assert abs(ber - expected) / expected <= 0.10


def test_noise_calibration_within_tenth_db():
    # empirical per-symbol SNR across >= 1e5 symbols on a unit-gain subchannel
    rng = np.random.default_rng(9)
    svd = flat_svd(1024)
    snr_db = 3.0
    signal_power = 0.0
    noise_power = 0.0
    n_symbols = 0
    for _ in range(50):
        bb, bo = random_bits(rng, 2048), random_bits(rng, 2048)
        payload = map_bits_to_streams(bb, bo, StreamPlan((0, 1)))
        _, _, _, estimates = transmit_frame(
            payload, svd, snr_db, rng, return_symbols=True
        )
        for d in range(2):
            x = payload.symbols[d]
            signal_power += float(np.sum(np.abs(x) ** 2))
            noise_power += float(np.sum(np.abs(estimates[d] - x) ** 2))
            n_symbols += x.size
    assert n_symbols >= 100_000
    measured = 10 * np.log10(signal_power / noise_power)
    assert abs(measured - snr_db) <= 0.1


def test_sum_rate_values_and_monotonicity():
    assert sum_rate(flat_svd(4, gains=(0.0, 0.0)), 10.0) == 0.0
    assert abs(sum_rate(flat_svd(1, gains=(1.0, 1.0)), 0.0) - 2.0) <= 1e-12
    low = sum_rate(flat_svd(8, gains=(1.0, 0.5)), 3.0)
    high = sum_rate(flat_svd(8, gains=(2.0, 1.0)), 3.0)
    assert high > low


# ------------------------------------------- time-domain equivalence


def make_effective(cfg, rng, blocked=True):
    state = UserState(
        position=np.array([3.0, 4.0, 1.5]), direct_link_blocked=blocked, interval_index=0
    )
    links = generate_links(state, cfg, rng)
    ris = RisConfig.initial(cfg, rng=rng)
    return cascade(links, ris, cfg)


def k_sized_payload(k, rng):
    """Split-plan payload with one QPSK symbol per subcarrier per stream."""
    from ris_semcom.ofdm import StreamSymbols

    bits = [random_bits(rng, 2 * k) for _ in range(2)]
    return StreamSymbols(
        plan=StreamPlan((0, 1)),
        symbols=(qpsk_modulate(bits[0]), qpsk_modulate(bits[1])),
        stream_bits=(bits[0], bits[1]),
    )


def test_time_domain_matches_frequency_domain_single_tap():
    cfg = ScenarioConfig(
        n_subcarriers=64, cp_length=4, n_taps=1, tap_power_split=(1.0,),
        ris_rows=2, ris_cols=2, schedule=Schedule(1, 1),
    )
    rng = np.random.default_rng(10)
    eff = make_effective(cfg, rng, blocked=False)
    svd = svd_subchannels(eff.cfr)
    payload = k_sized_payload(cfg.n_subcarriers, rng)
    received = time_domain_reference(payload, eff, svd, cfg.cp_length)
    k = cfg.n_subcarriers
    for d in range(2):
        x = np.zeros(k, complex)
        x[: payload.symbols[d].size] = payload.symbols[d]
        expected = svd.lambda_k[:, d] * x
        assert np.max(np.abs(received[:, d] - expected)) <= 1e-10 * max(
            1.0, np.max(np.abs(expected))
        )


def test_time_domain_matches_frequency_domain_two_tap():
    cfg = ScenarioConfig(
        n_subcarriers=64, cp_length=3, ris_rows=2, ris_cols=2, schedule=Schedule(1, 1)
    )
    rng = np.random.default_rng(11)
    eff = make_effective(cfg, rng)
    svd = svd_subchannels(eff.cfr)
    payload = k_sized_payload(cfg.n_subcarriers, rng)
    received = time_domain_reference(payload, eff, svd, cfg.cp_length)
    scale = np.max(np.abs(svd.lambda_k))
    for d in range(2):
        x = np.zeros(cfg.n_subcarriers, complex)
        x[: payload.symbols[d].size] = payload.symbols[d]
        expected = svd.lambda_k[:, d] * x
        assert np.max(np.abs(received[:, d] - expected)) <= 1e-6 * scale


def test_cp_violation_negative_control():
    cfg = ScenarioConfig(
        n_subcarriers=64, cp_length=3, ris_rows=2, ris_cols=2, schedule=Schedule(1, 1)
    )
    rng = np.random.default_rng(12)
    eff = make_effective(cfg, rng)
    svd = svd_subchannels(eff.cfr)
    payload = k_sized_payload(cfg.n_subcarriers, rng)
    with pytest.raises(ValueError):
        time_domain_reference(payload, eff, svd, cp_length=1)
    received = time_domain_reference(payload, eff, svd, cp_length=1, enforce_cp=False)
    errs = []
    for d in range(2):
        x = np.zeros(cfg.n_subcarriers, complex)
        x[: payload.symbols[d].size] = payload.symbols[d]
        errs.append(np.max(np.abs(received[:, d] - svd.lambda_k[:, d] * x)))
    assert max(errs) > 1e-3
