import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ide2net import harness
from ide2net.channel import SystemConfig, precoding_factor_beta, sample_channel
from ide2net.constellation import one_bit_alphabet, project, qam
from ide2net.harness import (BerResult, PrecoderSpec, SearchTooLarge, SweepSpec, ber_sweep, brute_force_precode,
                             evaluate_point, oracle_batch, read_csv, residual, results_to_csv, run_trial,
                             trial_rng, trials_for_bits)
from ide2net.precoders import Ide2Config, ide2, zf_precode
from ide2net.unfolded import Ide2NetParams

A = one_bit_alphabet(1.0)
C16 = qam(16)
SMALL = SystemConfig(32, 4, 1.0, 14.0)


def test_precoder_spec_names():
    with pytest.raises(ValueError):
        PrecoderSpec("squid")
    with pytest.raises(ValueError):
        PrecoderSpec("ide2-net", t_max=3).network()
    p = Ide2NetParams.warm_start(3)
    assert PrecoderSpec("ide2-net", t_max=3, params={3: p}).network() is p


def test_zf_noiseless_trial():
    sys = SystemConfig(32, 4, 1.0, float("inf"))
    assert sys.sigma2 == 0
    for i in range(20):
        out = run_trial(sys, PrecoderSpec("zf"), A, C16, trial_rng(1, i))
        assert out.bit_errors == 0 and out.iui < 1e-18


def test_ber_at_very_low_snr():
    r = evaluate_point(SMALL.with_snr(-30), PrecoderSpec("ide2", t_max=5), A, C16, 2000, seed=2)
    assert 0.45 <= r.ber <= 0.55


def test_mse_iui_decomposition_small():
    r = evaluate_point(SMALL, PrecoderSpec("ide2", t_max=10), A, C16, 5000, seed=3)
    assert abs((r.mse_mean - r.iui_mean) / r.noise_term_mean - 1) < 0.05


def test_bits_total_and_stderr():
    r = evaluate_point(SMALL, PrecoderSpec("zf-quant"), A, C16, 37, seed=4)
    assert r.bits_total == 37 * 4 * 4 and r.trials_discarded == 0
    assert 0 <= r.ber <= 1
    assert r.stderr == pytest.approx(np.sqrt(r.ber * (1 - r.ber) / r.bits_total))
    assert trials_for_bits(100_000, SystemConfig(128, 16), C16) == 1563


def test_discarded_trials_counted(monkeypatch):
    monkeypatch.setattr(harness, "sample_channel", lambda sys, rng: np.ones((sys.n_users, sys.n_antennas), complex))
    r = evaluate_point(SMALL, PrecoderSpec("ide2"), A, C16, 5, seed=0)
    assert r.trials_discarded == 5 and r.bits_total == 0 and np.isnan(r.ber)


def test_trial_streams_are_value_independent():
    # the same trial index sees the same channel at every sweep value
    h1 = sample_channel(SMALL, trial_rng(5, 3))
    h2 = sample_channel(SMALL, trial_rng(5, 3))
    assert np.array_equal(h1, h2)
    assert not np.array_equal(h1, sample_channel(SMALL, trial_rng(5, 4)))


def test_run_trial_uses_estimate_for_beta():
    # with eps = 1 the precoder sees an independent channel: BER near one half
    r = evaluate_point(SMALL, PrecoderSpec("ide2", t_max=10), A, C16, 1000, seed=6, epsilon=1.0)
    assert 0.45 <= r.ber <= 0.55


def test_sweep_shapes_and_determinism():
    spec = SweepSpec("layers", [1, 2, 5], 40, SMALL, PrecoderSpec("ide2"), seed=7)
    a = ber_sweep(spec, A, C16, threads=1)
    b = ber_sweep(spec, A, C16, threads=4)
    assert len(a) == 3 and [r.sweep_value for r in a] == [1, 2, 5]
    assert results_to_csv(a) == results_to_csv(b)
    with pytest.raises(ValueError):
        SweepSpec("layers", [], 10)
    with pytest.raises(ValueError):
        SweepSpec("freq", [1], 10)
    with pytest.raises(ValueError):
        SweepSpec("snr", [1], 0)


def test_csv_format(tmp_path):
    r = BerResult(14.0, 1, 3, 0.1, 0.2, 0.0, 1, 0)
    text = results_to_csv([r])
    header, row = text.strip().split("\n")
    assert header == ",".join(harness.CSV_COLUMNS)
    fields = row.split(",")
    assert fields[1] == "0.33333333333333331"  # 17 significant digits
    path = tmp_path / "r.csv"
    path.write_text(text)
    back = read_csv(path)[0]
    assert back["ber"] == 1 / 3 and back["bits_total"] == 3


def test_brute_force_single_antenna():
    rng = np.random.default_rng(8)
    for _ in range(20):
        h = sample_channel(SystemConfig(1, 1), rng)
        s = C16.points[rng.integers(0, 16, 1)]
        b = precoding_factor_beta(h)
        res = [residual(h, s, b, np.array([p])) for p in A.points]
        opt = brute_force_precode(h, s, 1.0, A)
        assert opt.residual == min(res) and opt.candidates == 4
        assert np.array_equal(opt.x, project(zf_precode(h, s).x, A))


def test_brute_force_tie_order():
    # h = [1, 1], s = 0: every x with x_1 = -x_0 is optimal; antenna 0 varies
    # fastest, so (p3, p0) at index 3 comes first
    opt = brute_force_precode(np.array([[1.0, 1.0]], complex), np.array([0j]), 1.0, A)
    assert opt.residual == 0
    assert np.array_equal(opt.x, A.points[[3, 0]])


def test_brute_force_matches_itertools_enumeration():
    rng = np.random.default_rng(9)
    h = sample_channel(SystemConfig(4, 2), rng)
    s = C16.points[rng.integers(0, 16, 2)]
    b = precoding_factor_beta(h)
    best = min(residual(h, s, b, np.array(x)) for x in itertools.product(A.points, repeat=4))
    assert brute_force_precode(h, s, 1.0, A, chunk=7).residual == pytest.approx(best, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_brute_force_is_lower_bound(seed):
    rng = np.random.default_rng(seed)
    h = sample_channel(SystemConfig(2, 2), rng)
    s = C16.points[rng.integers(0, 16, 2)]
    opt = brute_force_precode(h, s, 1.0, A)
    for x in itertools.product(A.points, repeat=2):
        assert opt.residual <= residual(h, s, opt.beta, np.array(x)) + 1e-12
    x_i = ide2(opt.beta * h, s, A, Ide2Config(t_max=50)).x
    assert opt.residual <= residual(h, s, opt.beta, x_i)
    joint = brute_force_precode(h, s, 1.0, A, optimize_beta=True)
    assert joint.residual <= opt.residual + 1e-12 and joint.beta >= 0


def test_brute_force_refuses_large_search():
    h = sample_channel(SystemConfig(20, 2), np.random.default_rng(0))
    with pytest.raises(SearchTooLarge, match="4\\^20"):
        brute_force_precode(h, np.zeros(2, complex), 1.0, A)
    with pytest.raises(SearchTooLarge):
        oracle_batch(SystemConfig(20, 2), A, C16, 1, 0)


def test_oracle_batch_rows():
    rows = oracle_batch(SystemConfig(2, 1), A, qam(4), 100, seed=1)
    assert len(rows) == 100 and all(r.ratio >= 1 for r in rows)
    text = harness.oracle_to_csv(rows)
    assert text.splitlines()[0] == "instance,residual_opt,residual_ide2,ratio"
    assert len(text.splitlines()) == 101


def test_manifest_contents(tmp_path):
    spec = SweepSpec("snr", [10, 14], 5, SMALL, PrecoderSpec("pgd", lam=0.02), seed=9)
    doc = harness.sweep_manifest(spec, {"note": 1})
    assert doc["seed"] == 9 and doc["system"]["n_antennas"] == 32 and doc["precoder"]["lam"] == 0.02
    harness.write_manifest(doc, tmp_path / "m.json")
    assert (tmp_path / "m.json").read_text().endswith("\n")
