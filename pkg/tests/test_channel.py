import struct

import numpy as np
import pytest

from mmsched.channel import (ChannelTrace, ScenarioConfig, TraceFormatError, evolve_gauss_markov, gen_clustered,
                             gen_random_static, generate, load_trace, load_trace_csv, save_trace, save_trace_csv)
from mmsched.grouping import correlation_matrix


def test_random_static_is_constant_in_time():
    tr = gen_random_static(2, 2, 1, 3, seed=7)
    assert np.array_equal(tr.h[0], tr.h[1]) and np.array_equal(tr.h[1], tr.h[2])


def test_random_static_unit_power():
    tr = gen_random_static(64, 64, 1, 1, seed=1)
    assert abs(np.mean(np.abs(tr.h) ** 2) - 1.0) < 0.1


def test_same_seed_bit_identical():
    a = gen_random_static(4, 3, 2, 2, seed=11)
    b = gen_random_static(4, 3, 2, 2, seed=11)
    assert a.h.tobytes() == b.h.tobytes()
    assert not np.array_equal(a.h, gen_random_static(4, 3, 2, 2, seed=12).h)


def test_independent_rbs_differ():
    tr = gen_random_static(4, 4, 2, 1, seed=3)
    assert not np.allclose(tr.h[0, 0], tr.h[0, 1])


@pytest.mark.parametrize("dims", [(0, 2, 1, 1), (2, 0, 1, 1), (2, 2, 0, 1), (2, 2, 1, -1)])
def test_bad_dimensions(dims):
    with pytest.raises(ValueError):
        gen_random_static(*dims)


def test_trace_is_immutable():
    tr = gen_random_static(2, 2)
    with pytest.raises(ValueError):
        tr.h[0, 0, 0, 0] = 1.0


def test_trace_rejects_nan_and_bad_noise():
    with pytest.raises(ValueError):
        ChannelTrace(np.full((1, 1, 1, 1), np.nan))
    with pytest.raises(ValueError):
        ChannelTrace(np.ones((1, 1, 1, 1)), noise_var=0.0)


def test_tapped_delay_unit_power_and_rb_correlation():
    tr = gen_random_static(32, 32, 8, 1, seed=5, rb_mode="tapped-delay", num_taps=4)
    assert abs(np.mean(np.abs(tr.h) ** 2) - 1.0) < 0.1
    # neighbouring RBs correlated, but not identical
    a, b = tr.h[0, 0].ravel(), tr.h[0, 1].ravel()
    rho = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert 0.2 < rho < 0.99


def test_clustered_zero_corr_matches_random_statistics():
    tr = gen_clustered(64, 64, 1, 1, num_clusters=4, intra_cluster_corr=0.0, seed=2)
    assert np.array_equal(tr.h, gen_random_static(64, 64, 1, 1, seed=2).h)
    assert abs(np.mean(np.abs(tr.h) ** 2) - 1.0) < 0.1
    c = correlation_matrix(tr.h[0, 0])
    off = c[~np.eye(64, dtype=bool)]
    # i.i.d. M=64 vectors: E|c| = sqrt(pi)/2 * Gamma(64)/Gamma(64.5) ~ 0.11
    assert off.mean() < 0.15


def test_clustered_singleton_clusters_unit_power():
    tr = gen_clustered(32, 32, 4, 1, num_clusters=32, intra_cluster_corr=0.9, seed=0)
    assert abs(np.mean(np.abs(tr.h) ** 2) - 1.0) < 0.1


def test_clustered_intra_exceeds_inter_over_seeds():
    intra, inter = [], []
    cluster = np.arange(8) % 4
    same = (cluster[:, None] == cluster[None, :]) & ~np.eye(8, dtype=bool)
    diff = cluster[:, None] != cluster[None, :]
    for seed in range(100):
        c = correlation_matrix(gen_clustered(16, 8, 1, 1, 4, 0.95, seed).h[0, 0])
        intra.append(c[same].mean())
        inter.append(c[diff].mean())
    assert np.mean(intra) > np.mean(inter)
    assert np.mean(intra) > 0.9


@pytest.mark.parametrize("corr", [-0.1, 1.0, 1.5])
def test_clustered_bad_correlation(corr):
    with pytest.raises(ValueError):
        gen_clustered(4, 4, 1, 1, 2, corr)


def test_gauss_markov_rho_one_is_identity():
    base = gen_random_static(4, 4, 2, 5, seed=1)
    out = evolve_gauss_markov(base, 1.0, seed=3)
    assert np.array_equal(out.h, base.h)


def test_gauss_markov_rho_zero_uncorrelated():
    base = gen_random_static(32, 32, 1, 2, seed=1)
    out = evolve_gauss_markov(base, 0.0, seed=4)
    a, b = out.h[0].real.ravel(), out.h[1].real.ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_gauss_markov_lag_one_autocorrelation():
    base = gen_random_static(16, 16, 1, 1, seed=2)
    out = evolve_gauss_markov(base, 0.9, seed=5, num_ttis=400)
    x = out.h.real.reshape(400, -1)
    r = np.sum(x[1:] * x[:-1]) / np.sqrt(np.sum(x[1:] ** 2) * np.sum(x[:-1] ** 2))
    assert x[1:].size >= 10**4
    assert abs(r - 0.9) < 0.05


def test_gauss_markov_preserves_marginal_variance():
    base = gen_random_static(64, 64, 1, 1, seed=9)
    out = evolve_gauss_markov(base, 0.7, seed=1, num_ttis=20)
    v0 = np.mean(np.abs(out.h[0]) ** 2)
    for t in range(20):
        assert abs(np.mean(np.abs(out.h[t]) ** 2) / v0 - 1.0) < 0.1


def test_gauss_markov_rejects_bad_input():
    base = gen_random_static(2, 2, 1, 1)
    with pytest.raises(ValueError):
        evolve_gauss_markov(base, 1.2)
    moving = evolve_gauss_markov(base, 0.5, num_ttis=3)
    with pytest.raises(ValueError):
        evolve_gauss_markov(moving, 0.5)


def test_generate_dispatch_and_validation():
    for topo in ("clustered", "random-static", "mobile"):
        tr = generate(ScenarioConfig(topology=topo, num_clusters=2, rng_seed=4), 4, 4, 2, 3)
        assert tr.h.shape == (3, 2, 4, 4)
    with pytest.raises(ValueError):
        generate(ScenarioConfig(topology="bogus"), 4, 4)
    with pytest.raises(ValueError):
        generate(ScenarioConfig(topology="clustered", num_clusters=9), 4, 4)


def test_binary_round_trip(tmp_path):
    tr = evolve_gauss_markov(gen_random_static(3, 5, 2, 1, seed=1, noise_var=0.3), 0.8, seed=2, num_ttis=4)
    path = tmp_path / "t.mmtr"
    save_trace(tr, path)
    back = load_trace(path)
    assert back.h.tobytes() == tr.h.tobytes()
    assert back.noise_var == tr.noise_var


def test_binary_layout(tmp_path):
    h = np.arange(2 * 1 * 2 * 3).reshape(2, 1, 2, 3) * (1 + 2j)
    path = tmp_path / "t.mmtr"
    save_trace(ChannelTrace(h, 0.5), path)
    raw = path.read_bytes()
    assert raw[:4] == b"MMTR"
    assert struct.unpack_from("<HIIIId", raw, 4) == (1, 2, 1, 2, 3, 0.5)
    payload = np.frombuffer(raw[30:], dtype="<f8")
    assert payload[0] == 0.0 and payload[2] == 1.0 and payload[3] == 2.0   # (t0,b0,m0,l1) = 1+2j


def test_bad_magic(tmp_path):
    path = tmp_path / "t.mmtr"
    save_trace(gen_random_static(2, 2), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(TraceFormatError) as err:
        load_trace(path)
    assert err.value.offset == 0


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.mmtr"
    save_trace(gen_random_static(2, 2, 1, 2), path)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(TraceFormatError, match=r"declares 8 entries \(128 bytes\), found 112 bytes"):
        load_trace(path)


def test_truncated_header_and_overflow(tmp_path):
    path = tmp_path / "t.mmtr"
    path.write_bytes(b"MMTR\x01\x00")
    with pytest.raises(TraceFormatError):
        load_trace(path)
    path.write_bytes(struct.pack("<4sHIIIId", b"MMTR", 1, 2**31, 2**31, 2, 2, 1.0))
    with pytest.raises(TraceFormatError, match="overflow"):
        load_trace(path)


def test_csv_round_trip(tmp_path):
    tr = gen_random_static(3, 2, 2, 2, seed=8, noise_var=0.25)
    path = tmp_path / "t.csv"
    save_trace_csv(tr, path)
    back = load_trace_csv(path, noise_var=0.25)
    assert np.array_equal(back.h, tr.h)
