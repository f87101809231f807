import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_complex
from oracles import lmmse_sinr_closed_form
from mpmimo.linkproc import (
    LinkBudget,
    Scheme,
    average_receive_snr,
    dbm_to_watts,
    lmmse_batch,
    lmmse_equalize,
    mrc_sinr,
    noise_power_for_snr,
    one_layer_sinr,
    optimal_rates,
    rate_lmmse_one_layer,
    rate_lmmse_two_layer,
    rate_miso_1x1,
    rate_mrc_2x1,
    rate_optimal,
    scheme_rates,
    sic_layer_rates,
    watts_to_dbm,
)

B = 10e6


def capacity(snr, bw=B):
    return bw * math.log2(1 + snr)


def precoded(H):
    return H @ H.conj().T / np.linalg.norm(H)


def test_budget_validation_and_units():
    with pytest.raises(ValueError):
        LinkBudget(B, 0.0, 1.0)
    with pytest.raises(ValueError):
        LinkBudget(B, 1.0, float("inf"))
    lb = LinkBudget.from_dbm(B, 30.0, -60.0)
    assert lb.signal_power == pytest.approx(1.0)
    assert lb.noise_power == pytest.approx(1e-9)
    assert watts_to_dbm(dbm_to_watts(-87.5)) == pytest.approx(-87.5)


def test_miso_unit_snr():
    r = rate_miso_1x1(np.array([1.0, 0, 0]), LinkBudget(B, 1.0, 1.0))
    assert r.rate == pytest.approx(1e7, rel=1e-15)
    assert rate_miso_1x1(np.ones(4), LinkBudget(B, 1e-300, 1.0)).rate < 1e-280


def test_miso_zero_channel_flagged():
    r = rate_miso_1x1(np.zeros(4), LinkBudget(B, 1.0, 1.0))
    assert r.rate == 0 and r.degenerate


def test_miso_explicit_beamformer():
    rng = np.random.default_rng(0)
    lb = LinkBudget(B, 0.2, 1e-3)
    for _ in range(100):
        h = random_complex(rng, 16)
        w = h.conj() / np.linalg.norm(h)
        snr = abs(h @ w) ** 2 * lb.signal_power / lb.noise_power
        assert rate_miso_1x1(h, lb).rate == pytest.approx(capacity(snr), rel=1e-12)


def test_mrc_degenerate_second_antenna():
    rng = np.random.default_rng(1)
    lb = LinkBudget(B, 1.0, 0.1)
    h1 = random_complex(rng, 16)
    H = np.stack([h1, np.zeros(16)])
    assert rate_mrc_2x1(H, 0, lb).rate == pytest.approx(rate_miso_1x1(h1, lb).rate, rel=1e-14)
    H = np.stack([h1, h1])
    snr = 2 * np.linalg.norm(h1) ** 2 * lb.snr
    assert rate_mrc_2x1(H, 0, lb).rate == pytest.approx(capacity(snr), rel=1e-14)


def test_mrc_explicit_signal_model():
    rng = np.random.default_rng(2)
    lb = LinkBudget(B, 0.5, 0.05)
    for target in (0, 1):
        for _ in range(50):
            H = random_complex(rng, (2, 16))
            w = H[target].conj() / np.linalg.norm(H[target])
            # two scalar observations y_i = (h_i^T w) x + n_i, combined with their conjugates
            g = H @ w
            snr = (abs(g[0]) ** 2 + abs(g[1]) ** 2) * lb.signal_power / lb.noise_power
            assert rate_mrc_2x1(H, target, lb).rate == pytest.approx(capacity(snr), rel=1e-12)
    with pytest.raises(ValueError):
        rate_mrc_2x1(np.zeros((2, 4)), 0, lb)
    with pytest.raises(ValueError):
        rate_mrc_2x1(random_complex(rng, (2, 4)), 2, lb)


def test_lmmse_sinr_closed_form_1e4():
    rng = np.random.default_rng(3)
    H = random_complex(rng, (10_000, 2, 16))
    lb = LinkBudget(B, 1.0, 0.1)
    gain, err = lmmse_batch(H, lb)
    sinr = gain ** 2 * lb.signal_power / err
    G = np.stack([precoded(h) for h in H])
    ref = np.stack([lmmse_sinr_closed_form(g, lb.snr) for g in G])
    assert np.max(np.abs(sinr - ref) / ref) <= 1e-10


def test_lmmse_decoupled_layers():
    # H = diag(a, b) -> G = H H^H / ||H|| diagonal
    H = np.diag([1.0, 0.8]).astype(complex)
    lb = LinkBudget(B, 1.0, 1e-9)
    gain, err = lmmse_equalize(H, lb)
    np.testing.assert_allclose(gain, 1.0, atol=1e-6)
    # no cross-layer interference remains: error is filtered noise only
    G = precoded(H)
    L = lb.signal_power * G.conj().T @ np.linalg.inv(lb.signal_power * G @ G.conj().T
                                                     + lb.noise_power * np.eye(2))
    np.testing.assert_allclose(err, np.real(np.diag(L @ L.conj().T)) * lb.noise_power, rtol=1e-9)


def test_lmmse_rank_one_interference_limited():
    rng = np.random.default_rng(4)
    h = random_complex(rng, 16)
    H = np.stack([h, h])
    sinrs = []
    for pn in (1e-4, 1e-8, 1e-12):
        r = rate_lmmse_two_layer(H, LinkBudget(B, 1.0, pn))
        assert r.effective_sinr[0] == pytest.approx(r.effective_sinr[1], rel=1e-9)
        sinrs.append(r.effective_sinr[0])
    assert sinrs[-1] < 2.0 and sinrs[-1] == pytest.approx(sinrs[-2], rel=1e-3)


def test_two_layer_diagonal():
    H = np.diag([1.0, 1.0]).astype(complex)
    lb = LinkBudget(B, 1.0, 0.01)
    r = rate_lmmse_two_layer(H, lb)
    G = precoded(H)
    x = abs(G[0, 0]) ** 2 * lb.snr
    assert r.rate == pytest.approx(2 * capacity(x), rel=1e-12)
    assert sum(r.per_layer) == pytest.approx(r.rate, rel=1e-12)


def test_one_layer_collapses():
    assert one_layer_sinr(np.array([0.7, 0.0]), np.array([0.2, 5.0]), 1.0) == \
        pytest.approx(0.7 ** 2 / 0.2)
    assert one_layer_sinr(np.array([0.6, 0.6]), np.array([0.3, 0.3]), 2.0) == \
        pytest.approx(2 * 0.36 * 2.0 / 0.3)


def test_one_layer_bounds():
    """One-layer combining lies between the weaker layer and the sum-SINR bound."""
    rng = np.random.default_rng(5)
    H = random_complex(rng, (2000, 2, 16))
    lb = LinkBudget(B, 1.0, 0.3)
    gain, err = lmmse_batch(H, lb)
    per_layer = gain ** 2 * lb.signal_power / err
    one = scheme_rates(Scheme.LMMSE_ONE_LAYER, H, lb)
    lo = B * np.log2(1 + per_layer.min(axis=1))
    hi = B * np.log2(1 + per_layer.sum(axis=1))
    assert np.all(one >= lo * (1 - 1e-12)) and np.all(one <= hi * (1 + 1e-12))


def test_one_layer_not_always_above_best_layer():
    """Combining across layers can fall below the stronger layer on its own."""
    gain, err = np.array([0.99, 0.1]), np.array([0.01, 0.5])
    combined = one_layer_sinr(gain, err, 1.0)
    best = max(gain ** 2 / err)
    assert combined < best


def test_optimal_reduces_to_miso():
    rng = np.random.default_rng(6)
    lb = LinkBudget(B, 1.0, 0.01)
    for _ in range(20):
        h = random_complex(rng, (1, 16))
        assert rate_optimal(h, lb).rate == pytest.approx(rate_miso_1x1(h[0], lb).rate, rel=1e-12)


def test_optimal_diagonal_is_sum_of_layers():
    H = np.diag([1.0, 0.5]).astype(complex)
    lb = LinkBudget(B, 1.0, 0.05)
    G = precoded(H)
    expected = sum(capacity(abs(G[i, i]) ** 2 * lb.snr) for i in range(2))
    r = rate_optimal(H, lb)
    assert r.rate == pytest.approx(expected, rel=1e-12)
    assert sum(r.per_layer) == pytest.approx(expected, rel=1e-12)


def test_sic_chain_rule_1e4():
    rng = np.random.default_rng(7)
    H = random_complex(rng, (10_000, 2, 16))
    lb = LinkBudget(B, 1.0, 0.05)
    total = optimal_rates(H, lb)
    layers = sic_layer_rates(H, lb).sum(axis=1)
    assert np.max(np.abs(layers - total) / total) <= 1e-10


def _orderings(H, lb):
    mrc = [scheme_rates(Scheme.MRC_2X1, H, lb, t) for t in (0, 1)]
    miso = [scheme_rates(Scheme.MISO_1X1, H, lb, t) for t in (0, 1)]
    opt = optimal_rates(H, lb)
    two = scheme_rates(Scheme.LMMSE_TWO_LAYER, H, lb)
    return miso, mrc, opt, two


def test_ordering_at_ten_db_per_entry():
    rng = np.random.default_rng(8)
    H = random_complex(rng, (10_000, 2, 16))
    lb = LinkBudget(B, 1.0, 0.1)
    miso, mrc, opt, two = _orderings(H, lb)
    tol = 1 + 1e-12
    for t in (0, 1):
        assert np.all(miso[t] <= mrc[t] * tol)
        assert np.all(mrc[t] <= opt * tol)
    assert np.all(two <= opt * tol)


def test_mrc_exceeds_optimal_only_below_crossover():
    """With W = H^H/||H||_F the log-det rate can drop below MRC at low SNR.

    MRC <= optimal holds whenever snr * l1^2 * l2 >= l1^2 - l2^2, with l1 >= l2 the
    eigenvalues of H H^H; every violation must sit below that crossover.
    """
    rng = np.random.default_rng(9)
    H = random_complex(rng, (10_000, 2, 16))
    lb = LinkBudget(B, 1.0, 100.0)
    _, mrc, opt, _ = _orderings(H, lb)
    lam = np.linalg.eigvalsh(H @ np.conj(np.swapaxes(H, 1, 2)))
    l2, l1 = lam[:, 0], lam[:, 1]
    above = lb.snr * l1 ** 2 * l2 >= l1 ** 2 - l2 ** 2
    best_mrc = np.maximum(mrc[0], mrc[1])
    assert np.all(best_mrc[above] <= opt[above] * (1 + 1e-12))
    assert np.any(best_mrc[~above] > opt[~above])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scheme=st.sampled_from(list(Scheme)),
       px=st.floats(1e-3, 1e3), pn=st.floats(1e-3, 1e3))
def test_monotone_in_powers_and_linear_in_bandwidth(seed, scheme, px, pn):
    H = random_complex(np.random.default_rng(seed), (4, 2, 8))
    base = scheme_rates(scheme, H, LinkBudget(B, px, pn))
    assert np.all(scheme_rates(scheme, H, LinkBudget(B, px * 1.5, pn)) > base)
    assert np.all(scheme_rates(scheme, H, LinkBudget(B, px, pn * 1.5)) < base)
    np.testing.assert_allclose(scheme_rates(scheme, H, LinkBudget(3 * B, px, pn)), 3 * base,
                               rtol=1e-12)


def test_batch_matches_single_channel_api():
    rng = np.random.default_rng(10)
    H = random_complex(rng, (20, 2, 16))
    lb = LinkBudget(B, 1.0, 0.2)
    single = {
        Scheme.MISO_1X1: [rate_miso_1x1(h[1], lb).rate for h in H],
        Scheme.MRC_2X1: [rate_mrc_2x1(h, 1, lb).rate for h in H],
        Scheme.LMMSE_ONE_LAYER: [rate_lmmse_one_layer(h, lb).rate for h in H],
        Scheme.LMMSE_TWO_LAYER: [rate_lmmse_two_layer(h, lb).rate for h in H],
        Scheme.OPTIMAL: [rate_optimal(h, lb).rate for h in H],
    }
    for scheme, ref in single.items():
        np.testing.assert_allclose(scheme_rates(scheme, H, lb, 1), ref, rtol=1e-12)


def test_snr_calibration():
    rng = np.random.default_rng(11)
    H = random_complex(rng, (50, 2, 16), scale=1e-3)
    pn = noise_power_for_snr(H, 0.1, 10.0)
    assert 10 * np.log10(average_receive_snr(H, LinkBudget(B, 0.1, pn))) == pytest.approx(10.0)
    # MRC with a single row toward itself equals the per-row SNR
    assert mrc_sinr(np.stack([H[0, 0], np.zeros(16)])[None], 2.0)[0] == \
        pytest.approx(2 * np.linalg.norm(H[0, 0]) ** 2)
