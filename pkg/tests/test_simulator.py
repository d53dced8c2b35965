import math
import re

import numpy as np
import pytest

import randamp.simulator as sim
from randamp.protocol import ProtocolParams, deviation_confidence
from randamp.simulator import (
    AdversarialDevice,
    AdversaryModel,
    HonestDevice,
    ProtocolRun,
    ScheduleBlock,
    _wilson_interval,
    attack_suite,
    estimate_output_bias,
    run_protocol,
    transcript_lines,
)
from randamp.sources import parity_sign
from randamp.strategies import DeterministicStrategy, NoiseModel, ghz_mermin_strategy

GHZ = ghz_mermin_strategy()
LINE_SHAPE = re.compile(r"^\d+ [01]{3} [01]{3} [01]$")


def make_params(n_rounds, p_threshold, epsilon=0.3, x=0.01, p_crit=0.97):
    return ProtocolParams(
        epsilon=epsilon, eps_prime_target=0.29, delta=0.9, x=x,
        n_rounds=n_rounds, p_crit=p_crit, p_threshold=p_threshold,
    )


def collect_runs(params, device, runs, seed):
    seeds = np.random.SeedSequence(seed).spawn(runs)
    wins = []
    aborts = 0
    zeros = 0
    emitted = 0
    for s in seeds:
        run = run_protocol(params, device, np.random.default_rng(s))
        wins.append(run.total_wins)
        if run.aborted:
            aborts += 1
        else:
            emitted += 1
            zeros += int(run.output_bit == 0)
    return np.asarray(wins), aborts / runs, zeros, emitted


def test_honest_noiseless_wins_every_round():
    params = make_params(300, 0.99)
    run = run_protocol(params, HonestDevice(GHZ), seed=7)
    assert run.p_est == 1.0
    assert run.total_wins == 300
    assert not run.aborted
    assert all(run.wins)
    assert run.output_bit in (0, 1)
    assert 0 <= run.selected_round < 300
    assert not run.aggregated
    assert np.isclose(run.p_avg, 1.0, atol=1e-12)


def test_single_round_run_selects_round_zero():
    """With one round no selection bits are needed, only the two inputs."""
    params = make_params(1, 0.0)
    run = run_protocol(params, HonestDevice(GHZ), seed=3)
    assert run.selected_round == 0
    assert run.selection_draws == 1
    assert run.source_bits_used == 2


def test_source_bit_accounting_is_exact():
    params = make_params(100, 0.9)
    run = run_protocol(params, HonestDevice(GHZ), seed=11)
    n_bits = (100 - 1).bit_length()
    assert run.source_bits_used == 2 * 100 + run.selection_draws * n_bits
    assert run.selection_draws >= 1


def test_aborted_run_draws_no_selection_bits():
    # honest p_est is exactly 1 and the abort test is p_est <= threshold
    params = make_params(100, 1.0)
    run = run_protocol(params, HonestDevice(GHZ), seed=11)
    assert run.aborted
    assert run.output_bit is None
    assert run.selected_round is None
    assert run.selection_draws == 0
    assert run.source_bits_used == 200


def test_selection_redraws_are_accounted():
    """N=3 uses 2-bit selection; index 3 forces a redraw often enough
    to observe over 50 unbiased runs."""
    params = make_params(3, 0.5, epsilon=0.0, p_crit=0.9)
    draws = []
    for seed in range(50):
        run = run_protocol(params, HonestDevice(GHZ), seed=seed)
        assert run.selected_round < 3
        assert run.source_bits_used == 6 + 2 * run.selection_draws
        draws.append(run.selection_draws)
    assert max(draws) >= 2


def test_runs_are_deterministic_given_seed():
    params = make_params(60, 0.9)
    device = AdversarialDevice(attack_suite()["lambda-mixture"])
    a = run_protocol(params, device, seed=123)
    b = run_protocol(params, device, seed=123)
    assert a == b
    c = run_protocol(params, device, seed=124)
    assert (a.inputs, a.outputs) != (c.inputs, c.outputs)


def test_transcript_lines_shape():
    params = make_params(50, 0.9)
    run = run_protocol(params, HonestDevice(GHZ), seed=5)
    lines = transcript_lines(run)
    assert len(lines) == 50
    for j, line in enumerate(lines):
        assert LINE_SHAPE.match(line)
        assert line.split()[0] == str(j)
    parsed_wins = tuple(bool(int(line.split()[3])) for line in lines)
    assert parsed_wins == run.wins


def test_steered_deterministic_attack_quality():
    """Best classical strategy plus steering that starves its one losing
    input cell: per-round quality is exactly 0.96 at bias 0.3."""
    device = AdversarialDevice(attack_suite()["steered-deterministic"])
    params = make_params(2000, 0.9)
    run = run_protocol(params, device, seed=21)
    assert np.isclose(run.p_avg, 0.96, atol=1e-9)
    assert abs(run.p_est - 0.96) < 0.03
    assert not run.aborted

    strict = make_params(2000, 0.98)
    assert run_protocol(strict, device, seed=21).aborted


def test_all_zeros_attack_wins_only_one_cell():
    device = AdversarialDevice(attack_suite()["all-zeros"])
    params = make_params(500, 0.9)
    run = run_protocol(params, device, seed=2)
    assert np.isclose(run.p_avg, 0.64, atol=1e-9)
    assert run.aborted


def test_round_split_attack_average():
    device = AdversarialDevice(attack_suite()["round-split"])
    params = make_params(1000, 0.9)
    run = run_protocol(params, device, seed=9)
    # 999 perfect rounds and one steered classical round
    assert np.isclose(run.p_avg, (999 + 0.96) / 1000, atol=1e-9)


def test_threshold_riding_needs_planner_scale():
    """At 1e3 rounds the 1e-5 cheating fraction rounds away entirely."""
    device = AdversarialDevice(attack_suite()["threshold-riding"])
    params = make_params(1000, 0.9)
    run = run_protocol(params, device, seed=9)
    assert np.isclose(run.p_avg, 1.0, atol=1e-12)


def test_lambda_mixture_components_are_matched():
    """Both hidden values pair a strategy losing on one cell with
    steering that gives that cell probability 0.04."""
    device = AdversarialDevice(attack_suite()["lambda-mixture"])
    params = make_params(400, 0.9)
    for seed in range(6):
        run = run_protocol(params, device, seed=seed)
        assert np.isclose(run.p_avg, 0.96, atol=1e-9)


def test_zero_visibility_always_aborts():
    params = make_params(400, 0.9)
    device = HonestDevice(GHZ, NoiseModel(0.0))
    estimate = estimate_output_bias(params, device, runs=30, seed=4)
    assert estimate.abort_rate == 1.0
    assert estimate.no_data
    assert estimate.p_zero is None
    assert estimate.bias is None


def test_honest_output_bit_is_unbiased():
    params = make_params(50, 0.9)
    estimate = estimate_output_bias(params, HonestDevice(GHZ), runs=400, seed=8)
    assert estimate.abort_rate == 0.0
    assert estimate.emitted == 400
    lo, hi = estimate.p_zero_interval
    assert lo <= 0.5 <= hi
    assert estimate.bias_interval[0] == 0.0
    assert estimate.bias < 0.06


def test_wilson_interval_edges():
    lo, hi = _wilson_interval(0, 100)
    assert lo == 0.0 and 0.0 < hi < 0.06
    lo, hi = _wilson_interval(100, 100)
    assert hi == pytest.approx(1.0, abs=1e-12) and 0.94 < lo < 1.0
    lo, hi = _wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert np.isclose(lo + hi, 1.0, atol=1e-12)


def test_aggregated_path_matches_materialized_distribution(monkeypatch):
    """Forcing aggregation at a small round count must reproduce the
    materialized win-count and output statistics."""
    params = make_params(200, 0.8)
    device = HonestDevice(GHZ, NoiseModel(0.7))
    runs = 250

    wins_m, abort_m, zeros_m, emitted_m = collect_runs(params, device, runs, seed=31)
    monkeypatch.setattr(sim, "MATERIALIZE_LIMIT", 0)
    wins_a, abort_a, zeros_a, emitted_a = collect_runs(params, device, runs, seed=77)

    check = run_protocol(params, device, seed=0)
    assert check.aggregated
    assert check.inputs == ()

    # per-round success is 0.85; compare means within ~4.5 sigma
    sigma_mean = math.sqrt(200 * 0.85 * 0.15 / runs)
    assert abs(wins_m.mean() - 170.0) < 4.5 * sigma_mean
    assert abs(wins_a.mean() - 170.0) < 4.5 * sigma_mean
    assert abs(abort_m - abort_a) < 0.08
    for zeros, emitted in ((zeros_m, emitted_m), (zeros_a, emitted_a)):
        assert emitted > 0
        assert abs(zeros / emitted - 0.5) < 4.5 * math.sqrt(0.25 / emitted)


def test_aggregated_run_keeps_bit_accounting(monkeypatch):
    monkeypatch.setattr(sim, "MATERIALIZE_LIMIT", 0)
    params = make_params(100, 0.9)
    run = run_protocol(params, HonestDevice(GHZ), seed=13)
    assert run.aggregated
    n_bits = (100 - 1).bit_length()
    assert run.source_bits_used == 200 + run.selection_draws * n_bits
    with pytest.raises(ValueError):
        transcript_lines(run)


def test_aggregation_requires_round_local_steering(monkeypatch):
    monkeypatch.setattr(sim, "MATERIALIZE_LIMIT", 0)
    lose_110 = DeterministicStrategy(((0, 1), (0, 1), (0, 0)))
    adversary = AdversaryModel(
        (1.0,), ((ScheduleBlock(1.0, lose_110),),), (parity_sign(),)
    )
    params = make_params(64, 0.9)
    with pytest.raises(ValueError, match="aggregated"):
        run_protocol(params, AdversarialDevice(adversary), seed=1)


def test_abort_rate_obeys_concentration_bound(monkeypatch):
    """Empirical honest abort rate stays under the planner's deviation
    budget (the bound is loose, the margin is large)."""
    monkeypatch.setattr(sim, "MATERIALIZE_LIMIT", 0)
    params = make_params(2000, 0.75, epsilon=0.0, x=0.1, p_crit=0.9)
    device = HonestDevice(GHZ, NoiseModel(0.7))
    estimate = estimate_output_bias(params, device, runs=1000, seed=17)
    budget = deviation_confidence(0.1, 2000, 0.0)
    assert budget == pytest.approx(math.exp(-0.4), abs=1e-12)
    assert estimate.abort_rate <= budget + 0.05


def test_adversary_model_validation():
    block = (ScheduleBlock(1.0, GHZ),)
    sign = attack_suite()["steered-deterministic"].source_signs[0]
    with pytest.raises(ValueError):
        AdversaryModel((0.6, 0.3), (block, block), (sign, sign))
    with pytest.raises(ValueError):
        AdversaryModel((0.5, 0.5), (block,), (sign, sign))
    with pytest.raises(ValueError):
        AdversaryModel((), (), ())
    with pytest.raises(ValueError):
        AdversaryModel((1.5, -0.5), (block, block), (sign, sign))
    short = (ScheduleBlock(0.5, GHZ), ScheduleBlock(0.4, GHZ))
    with pytest.raises(ValueError):
        AdversaryModel((1.0,), (short,), (sign,))


def test_schedule_block_rejects_bad_fraction():
    with pytest.raises(ValueError):
        ScheduleBlock(1.2, GHZ)
    with pytest.raises(ValueError):
        ScheduleBlock(-0.1, GHZ)


def test_protocol_run_consistency_checks():
    base = dict(
        n_rounds=10, total_wins=10, p_est=1.0, aborted=False,
        selected_round=0, output_bit=1, p_avg=1.0,
        source_bits_used=24, selection_draws=1, aggregated=True,
    )
    ProtocolRun(**base)
    with pytest.raises(ValueError):
        ProtocolRun(**{**base, "total_wins": 9})
    with pytest.raises(ValueError):
        ProtocolRun(**{**base, "output_bit": None})
    with pytest.raises(ValueError):
        ProtocolRun(**{**base, "aborted": True})


def test_attack_suite_names():
    suite = attack_suite()
    assert set(suite) == {
        "steered-deterministic",
        "all-zeros",
        "round-split",
        "threshold-riding",
        "lambda-mixture",
    }
    for adversary in suite.values():
        assert isinstance(adversary, AdversaryModel)
        assert sum(adversary.lambda_weights) == pytest.approx(1.0)
