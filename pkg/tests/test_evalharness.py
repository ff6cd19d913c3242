from __future__ import annotations

import csv
import dataclasses
import io
import math

import numpy as np
import pytest

from acdsim import evalharness, rlcore
from acdsim.evalharness import (
    compare_policies,
    confidence_interval,
    run_episodes,
    summary_csv,
)


# ---------------------------------------------------------------------------
# confidence intervals


def test_t_interval_matches_table_computation():
    """Independent oracle: t_{4, 0.975} = 2.776445105198 from the published
    table, s = sqrt(2.5), so the 95% interval is 3 +/- 2.7764*1.5811/sqrt(5)."""
    lo, hi = confidence_interval([1, 2, 3, 4, 5], 0.95, "t")
    t_table = 2.776445105198
    margin = t_table * math.sqrt(2.5) / math.sqrt(5)
    assert lo == pytest.approx(3 - margin, abs=1e-3)
    assert hi == pytest.approx(3 + margin, abs=1e-3)
    assert (lo, hi) == (pytest.approx(1.036, abs=1e-3), pytest.approx(4.964, abs=1e-3))


def test_identical_samples_zero_width():
    assert confidence_interval([2.5] * 6, 0.95, "t") == (2.5, 2.5)
    lo, hi = confidence_interval([2.5] * 6, 0.95, "bootstrap", seed=1)
    assert lo == hi == 2.5


def test_t_requires_two_samples():
    with pytest.raises(ValueError):
        confidence_interval([1.0], 0.95, "t")


def test_bootstrap_seeded_determinism():
    samples = [1.0, 4.0, 2.0, 8.0, 3.0]
    a = confidence_interval(samples, 0.95, "bootstrap", seed=7)
    b = confidence_interval(samples, 0.95, "bootstrap", seed=7)
    assert a == b
    mean = sum(samples) / len(samples)
    assert a[0] <= mean <= a[1]


def test_ci_monotone_in_level():
    rng = np.random.default_rng(2)
    samples = rng.normal(size=12).tolist()
    for method, kwargs in (("t", {}), ("bootstrap", {"seed": 3})):
        lo95, hi95 = confidence_interval(samples, 0.95, method, **kwargs)
        lo99, hi99 = confidence_interval(samples, 0.99, method, **kwargs)
        assert lo99 <= lo95 and hi99 >= hi95


# ---------------------------------------------------------------------------
# run_episodes


def test_all_pass_no_red_closed_form(no_red_config):
    """Every step pays the pass bonus: return = 0.1 * horizon, CI width 0."""
    policy = rlcore.make_scripted_policy([0] * 30)
    summary = run_episodes(policy, no_red_config, seeds=[1, 2, 3], episodes_per_seed=1)
    horizon = no_red_config.pomdp.horizon.steps
    expected = 0.1 * horizon
    for records in summary.returns_by_seed.values():
        for ret in records:
            assert ret == pytest.approx(expected, abs=1e-9)
    assert summary.ci_low == pytest.approx(summary.ci_high, abs=1e-12)
    assert summary.availability_mean == pytest.approx(1.0)
    assert summary.compromised_step_fraction == 0.0


def test_single_seed_single_episode_degenerate(no_red_config):
    policy = rlcore.make_random_policy()
    summary = run_episodes(policy, no_red_config, seeds=[5], episodes_per_seed=1)
    assert summary.degenerate_ci is True
    assert summary.ci_low == summary.mean_return == summary.ci_high
    assert summary.std_return == 0.0


def test_seed_permutation_yields_same_statistics(mvp_config):
    policy = rlcore.make_random_policy()
    a = run_episodes(policy, mvp_config, seeds=[1, 2, 3], episodes_per_seed=2)
    b = run_episodes(policy, mvp_config, seeds=[3, 1, 2], episodes_per_seed=2)
    assert a.returns_by_seed == b.returns_by_seed
    assert a.mean_return == pytest.approx(b.mean_return)
    assert a.attack_counts == b.attack_counts


def test_run_is_deterministic(mvp_config):
    policy = rlcore.make_random_policy()
    a = run_episodes(policy, mvp_config, seeds=[4, 5], episodes_per_seed=2)
    b = run_episodes(policy, mvp_config, seeds=[4, 5], episodes_per_seed=2)
    assert summary_csv(a) == summary_csv(b)
    assert a.to_json() == b.to_json()


def test_metric_conservation(mvp_config):
    policy = rlcore.make_random_policy()
    summary = run_episodes(policy, mvp_config, seeds=[1, 2], episodes_per_seed=2)
    assert sum(summary.action_distribution.values()) == pytest.approx(1.0)
    counted = sum(sum(kinds.values()) for kinds in summary.attack_counts.values())
    assert counted == sum(rec.red_events for rec in summary.records)
    for rec in summary.records:
        assert 0.0 <= rec.compromised_step_fraction <= 1.0
        assert 0.0 <= rec.availability_mean <= 1.0


def test_csv_schema(no_red_config):
    policy = rlcore.make_random_policy()
    summary = run_episodes(policy, no_red_config, seeds=[1], episodes_per_seed=2)
    rows = list(csv.reader(io.StringIO(summary_csv(summary))))
    assert rows[0] == list(evalharness.CSV_COLUMNS)
    assert len(rows) == 1 + 2
    assert rows[1][0] == "1" and rows[1][1] == "0"


def test_evaluation_never_mutates_policy(mvp_config):
    table = rlcore.QTable(9)
    table.values((0,) * 12)[:] = 1.0
    policy = rlcore.make_greedy_policy(table)
    before = table.serialize()
    run_episodes(policy, mvp_config, seeds=[1], episodes_per_seed=1)
    assert table.serialize() == before


# ---------------------------------------------------------------------------
# compare_policies


def test_compare_self_zero_difference(no_red_config):
    policy = rlcore.make_random_policy()
    summary = run_episodes(policy, no_red_config, seeds=[1, 2, 3], episodes_per_seed=1)
    report = compare_policies(summary, summary, "a", "a")
    assert report.mean_difference == 0.0
    assert report.ci_overlap is True
    assert report.behavioural_divergence is False


def test_compare_rejects_mismatched_scenarios(no_red_config, mvp_config):
    policy = rlcore.make_random_policy()
    a = run_episodes(policy, no_red_config, seeds=[1], episodes_per_seed=1)
    b = run_episodes(policy, mvp_config, seeds=[1], episodes_per_seed=1)
    with pytest.raises(ValueError, match="hash mismatch"):
        compare_policies(a, b)


def test_compare_flags_behavioural_divergence(no_red_config):
    """Identical returns, different action mixes: divergence must be flagged."""
    all_pass = rlcore.make_scripted_policy([0] * 30)
    scan_idx = 1  # scan:ws; scans are free in this scenario
    scanner_script = [0, scan_idx] * 15
    scanner = rlcore.make_scripted_policy(scanner_script)
    a = run_episodes(all_pass, no_red_config, seeds=[1, 2], episodes_per_seed=1)
    b = run_episodes(scanner, no_red_config, seeds=[1, 2], episodes_per_seed=1)
    report = compare_policies(a, b)
    assert report.behavioural_divergence is True
    assert report.action_distribution_distance > 0.5


def test_report_text_and_csv_render(no_red_config):
    policy = rlcore.make_random_policy()
    a = run_episodes(policy, no_red_config, seeds=[1, 2], episodes_per_seed=1)
    report = compare_policies(a, a, "x", "y")
    text = report.to_text()
    assert "policy comparison" in text and "action" in text
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["metric", "key", "x", "y"]
