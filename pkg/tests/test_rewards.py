"""Tests for stepwise rewards, labels, returns and alpha adaptation."""

import pytest

from scasrec.core.errors import ContractError
from scasrec.rewards import (
    AlphaState,
    RewardTrace,
    alpha_update,
    build_label,
    combined_reward,
    discounted_returns,
    eor_reward,
    scr,
)


class TestScr:
    def test_gap_to_best_listed_route(self):
        assert scr(0.9, [0.2, 0.6]) == pytest.approx(0.3)

    def test_zero_once_ground_truth_is_listed(self):
        assert scr(0.8, [0.1, 0.8]) == 0.0

    def test_empty_list(self):
        assert scr(0.7, []) == 0.7

    @pytest.mark.parametrize("gt, listed", [(1.2, [0.1]), (0.5, [-0.1]), (0.5, [1.5])])
    def test_out_of_range(self, gt, listed):
        with pytest.raises(ContractError):
            scr(gt, listed)


class TestEorReward:
    def test_step_after_ground_truth(self):
        assert eor_reward(4, 3, 0.2) == 0.2

    @pytest.mark.parametrize("t", [1, 2, 3, 5])
    def test_other_steps(self, t):
        assert eor_reward(t, 3, 0.2) == 0.0

    def test_ground_truth_never_listed(self):
        assert eor_reward(2, None, 0.2) == 0.0

    def test_zero_alpha(self):
        assert all(eor_reward(t, 1, 0.0) == 0.0 for t in range(1, 5))

    def test_step_must_be_positive(self):
        with pytest.raises(ContractError):
            eor_reward(0, None, 0.1)


class TestBuildLabel:
    def test_before_and_at_ground_truth(self):
        assert build_label(1, 3, gt_index=2, eor_index=5) == 2
        assert build_label(3, 3, gt_index=2, eor_index=5) == 2

    def test_eor_after_ground_truth(self):
        assert build_label(4, 3, gt_index=2, eor_index=5) == 5

    def test_no_label_past_eor(self):
        with pytest.raises(ContractError):
            build_label(5, 3, gt_index=2, eor_index=5)

    def test_ground_truth_not_yet_listed(self):
        assert build_label(7, None, gt_index=1, eor_index=4) == 1


class TestCombinedReward:
    def test_sums(self):
        assert combined_reward(0.3, 0.0) == 0.3
        assert combined_reward(0.0, 0.1) == 0.1
        assert combined_reward(0.0, 0.0) == 0.0

    def test_negative_parts(self):
        with pytest.raises(ContractError):
            combined_reward(-0.1, 0.0)

    def test_trace_counts_zero_weight_steps(self):
        trace = RewardTrace()
        trace.append(0.4, 0.0, 2)
        trace.append(0.0, 0.1, 5)
        trace.append(0.0, 0.0, 5)
        assert len(trace) == 3
        assert trace.combined == [0.4, 0.1, 0.0]
        assert trace.zero_weight_steps == 1


class TestDiscountedReturns:
    def test_hand_evaluated(self):
        assert discounted_returns([0.5, 0.25], 0.5) == [0.625, 0.25]

    def test_single_step(self):
        assert discounted_returns([0.3], 0.1) == [0.3]

    def test_no_discount(self):
        assert discounted_returns([1.0, 2.0, 3.0], 1.0) == [6.0, 5.0, 3.0]

    def test_empty_episode(self):
        assert discounted_returns([], 0.9) == []

    @pytest.mark.parametrize("discount", [0.0, -0.5, 1.5])
    def test_discount_out_of_range(self, discount):
        with pytest.raises(ContractError):
            discounted_returns([1.0], discount)


class TestAlphaUpdate:
    def test_too_few_failures_raise_alpha(self):
        state = alpha_update(AlphaState(alpha=0.1, eta=1e-4, beta=0.04), 0.02)
        assert state.alpha == pytest.approx(0.1001)
        assert state.last_e == 0.02

    def test_too_many_failures_lower_alpha(self):
        state = alpha_update(AlphaState(alpha=0.1, eta=1e-4, beta=0.04), 0.5)
        assert state.alpha == pytest.approx(0.0999)

    def test_clamped_at_zero(self):
        state = alpha_update(AlphaState(alpha=0.0, eta=1e-4, beta=0.04), 1.0)
        assert state.alpha == 0.0

    def test_on_target_is_unchanged(self):
        state = alpha_update(AlphaState(alpha=0.3, eta=1e-4, beta=0.04), 0.04)
        assert state.alpha == 0.3

    def test_input_state_is_not_modified(self):
        before = AlphaState(alpha=0.1)
        alpha_update(before, 0.0)
        assert before.alpha == 0.1

    def test_failure_rate_out_of_range(self):
        with pytest.raises(ContractError):
            alpha_update(AlphaState(), 1.1)
