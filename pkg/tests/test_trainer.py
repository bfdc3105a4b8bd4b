"""Tests for supervised tracing, REINFORCE, the training loop and its log."""

import json

import numpy as np
import pytest

from scasrec.cli.checks import COMPONENTS, run_gradcheck
from scasrec.core.config import TrainConfig
from scasrec.core.errors import (
    ConfigError,
    ContractError,
    DomainError,
    TrainingDivergedError,
)
from scasrec.core.schema import Regime
from scasrec.diffengine import Graph
from scasrec.model.decoding import DecodeState
from scasrec.rewards import AlphaState, alpha_update
from scasrec.trainer import (
    RL_COLUMNS,
    SUPERVISED_COLUMNS,
    TrainingLog,
    ablation_grid,
    frozen_surrogate,
    load_trained,
    reinforce_loss,
    run_ablation,
    run_training,
    step_rewards,
    supervised_batch,
    supervised_loss,
    surrogate,
    trace_sample,
)
from scasrec.trainer.loop import DIVERGENCE_DUMP, FINAL_CHECKPOINT, LAST_CHECKPOINT, LOG_FILE
from scasrec.utils.fingerprint import arrays_fingerprint
from scasrec.utils.tables import read_comments, read_csv_table


def _trace(model, sample, stats, config, alpha=0.1):
    return trace_sample(model, Graph(model.store), sample, stats, alpha, config)


def _expected_loss(model, sample, stats, actions, labels, weights):
    """Independent recomputation of ``-sum_t w_t log P_t[label_t]``."""
    g = Graph(model.store, record=False)
    enc = model.encode_sample(g, sample, stats)
    total = 0.0
    for t, (label, weight) in enumerate(zip(labels, weights)):
        probs = model.decode_step(g, enc, actions[:t]).data[0]
        total -= weight * np.log(probs[label])
    return total


class TestTraceSample:
    def test_labels_follow_ground_truth_then_eor(self, small_model, toy_samples, toy_stats):
        config = TrainConfig(seed=0)
        for sample in toy_samples:
            _, trace = _trace(small_model, sample, toy_stats, config, alpha=0.1)
            labels = trace.rewards.labels
            if trace.t_hat is None:
                assert trace.failed
                assert set(labels) == {sample.gt_index}
                continue
            assert len(labels) == trace.t_hat + 1
            assert labels[:-1] == [sample.gt_index] * trace.t_hat
            assert labels[-1] == sample.n_candidates
            assert trace.rewards.scr[-1] == 0.0
            assert trace.rewards.eor[-1] == 0.1

    def test_actions_never_repeat_or_emit_eor(self, small_model, toy_samples, toy_stats):
        for sample in toy_samples:
            _, trace = _trace(small_model, sample, toy_stats, TrainConfig(seed=0), alpha=0.1)
            assert len(set(trace.actions)) == len(trace.actions)
            assert sample.n_candidates not in trace.actions

    def test_loss_matches_hand_recomputation(self, small_model, toy_samples, toy_stats):
        sample = toy_samples[0]
        g = Graph(small_model.store)
        loss, _ = supervised_loss(small_model, g, [sample], toy_stats, 0.1, TrainConfig(seed=0))
        _, trace = _trace(small_model, sample, toy_stats, TrainConfig(seed=0), alpha=0.1)
        expected = _expected_loss(
            small_model,
            sample,
            toy_stats,
            trace.actions,
            trace.rewards.labels,
            trace.rewards.combined,
        )
        assert loss.item() == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_single_candidate_trace(self, small_model, toy_stats, make_sample):
        sample = make_sample([[1, 2, 3]], [1, 2])
        terms, trace = _trace(small_model, sample, toy_stats, TrainConfig(seed=0), alpha=0.5)
        assert trace.t_hat == 1
        assert trace.rewards.labels == [0, 1]
        assert trace.rewards.scr == [pytest.approx(2 / 3), 0.0]
        assert trace.rewards.eor == [0.0, 0.5]
        # Only EOR is left at step 2, so its term is -0.5 * log(1) = 0.
        assert terms[1].item() == pytest.approx(0.0, abs=1e-12)

    def test_scr_switched_off_gives_unit_weights(self, small_model, toy_samples, toy_stats):
        config = TrainConfig(seed=0, disable_scr=True)
        _, trace = _trace(small_model, toy_samples[1], toy_stats, config, alpha=0.1)
        steps = trace.t_hat if trace.t_hat is not None else len(trace.rewards)
        assert trace.rewards.scr[:steps] == [1.0] * steps

    def test_t_max_caps_the_trace(self, small_model, toy_samples, toy_stats):
        config = TrainConfig(seed=0, t_max=1)
        for sample in toy_samples:
            _, trace = _trace(small_model, sample, toy_stats, config, alpha=0.1)
            assert len(trace.rewards) <= 2
            assert len(trace.actions) == 1


class TestSupervisedBatch:
    def test_alpha_follows_failure_rate(self, small_model, toy_samples, toy_stats):
        state = AlphaState(alpha=0.1, eta=1e-3, beta=0.04)
        outcome, updated = supervised_batch(
            small_model, toy_samples, toy_stats, state, TrainConfig(seed=0)
        )
        assert updated == alpha_update(state, outcome.e)
        assert 0.0 <= outcome.e <= 1.0
        assert outcome.batch_size == len(toy_samples)

    def test_parameters_move(self, small_model, toy_samples, toy_stats):
        before = small_model.store.snapshot()
        supervised_batch(small_model, toy_samples, toy_stats, AlphaState(), TrainConfig(seed=0))
        after = small_model.store.snapshot()
        assert any(not np.array_equal(before[k], after[k]) for k in before)

    def test_empty_batch(self, small_model, toy_stats):
        with pytest.raises(ContractError):
            supervised_loss(
                small_model, Graph(small_model.store), [], toy_stats, 0.1, TrainConfig()
            )


class TestReinforce:
    @pytest.fixture
    def sample(self, make_sample):
        # cr = [1, 2/3, 0], ground truth 0
        return make_sample([[1, 2, 3], [1, 2], [4, 5]], [1, 2, 3])

    def test_rewards_until_ground_truth(self, sample):
        state = DecodeState(n=3, actions=[1, 0, 3], selected=[1, 0], t_hat=2)
        rewards = step_rewards(state, sample, 0.2, TrainConfig())
        assert rewards == [pytest.approx(1.0), pytest.approx(1 / 3), 0.0]

    def test_late_actions_cost_alpha(self, sample):
        state = DecodeState(n=3, actions=[0, 2, 3], selected=[0, 2], t_hat=1)
        rewards = step_rewards(state, sample, 0.2, TrainConfig())
        assert rewards == [1.0, -0.2, 0.0]

    def test_zero_returns_give_no_loss(self):
        g = Graph()
        assert surrogate(g, [g.constant(np.array([-1.0]))], [0.0]) is None

    def test_frozen_surrogate_of_zero_returns(self, small_model, toy_stats, sample):
        g = Graph(small_model.store)
        loss = frozen_surrogate(small_model, g, sample, toy_stats, [0, 3], [0.0, 0.0])
        assert loss.item() == 0.0

    def test_surrogate_length_mismatch(self):
        g = Graph()
        with pytest.raises(ContractError):
            surrogate(g, [g.constant(np.array([-1.0]))], [1.0, 2.0])

    def test_same_seed_same_loss(self, small_model, toy_samples, toy_stats):
        config = TrainConfig(seed=0, rl=True)
        losses = []
        for _ in range(2):
            g = Graph(small_model.store)
            loss, outcome = reinforce_loss(
                small_model, g, toy_samples, toy_stats, 0.1, config, np.random.default_rng(5)
            )
            losses.append(loss.item())
            assert outcome.mean_return is not None
        assert losses[0] == losses[1]


class TestGradientChecks:
    def test_every_component_passes(self):
        checks = run_gradcheck(seeds=1)
        assert [c.component for c in checks] == list(COMPONENTS)
        for check in checks:
            assert check.passed, (check.component, check.result)

    def test_corrupted_component_fails(self):
        checks = run_gradcheck(seeds=1, corrupt="encoder", components=["encoder"])
        assert not checks[0].passed


class TestTrainingLog:
    def test_header_and_rows(self, tmp_path):
        path = tmp_path / "log.csv"
        with TrainingLog(path, Regime.SUPERVISED, ["# scasrec test"]) as log:
            log.write(step=1, epoch=1, loss=0.5, e=0.25, alpha=0.1, mean_list_len=2.0)
        comments = read_comments(path)
        assert comments[0] == "scasrec test"
        assert "regime supervised" in comments
        rows = read_csv_table(path)
        assert list(rows[0]) == list(SUPERVISED_COLUMNS)
        assert rows[0]["loss"] == "0.5"
        assert rows[0]["eval_mrr"] == ""

    def test_rl_log_has_return_column(self, tmp_path):
        path = tmp_path / "log.csv"
        with TrainingLog(path, Regime.RL, []) as log:
            log.write(step=1, mean_return=0.3)
        assert list(read_csv_table(path)[0]) == list(RL_COLUMNS)

    def test_unknown_column(self, tmp_path):
        with TrainingLog(tmp_path / "log.csv", Regime.SUPERVISED, []) as log:
            with pytest.raises(KeyError):
                log.write(step=1, bogus=2)

    def test_resume_drops_later_rows(self, tmp_path):
        path = tmp_path / "log.csv"
        with TrainingLog(path, Regime.SUPERVISED, ["# first"]) as log:
            for step in range(1, 5):
                log.write(step=step)
        with TrainingLog(path, Regime.SUPERVISED, ["# second"], resume_step=2) as log:
            log.write(step=3)
        assert [r["step"] for r in read_csv_table(path)] == ["1", "2", "3"]
        assert read_comments(path)[0] == "first"


class TestRunTraining:
    def test_writes_log_and_checkpoints(self, tmp_path, small_run_config, tiny_dataset):
        result = run_training(small_run_config, tiny_dataset, tiny_dataset[:4], tmp_path)
        assert result.steps == 3
        assert (tmp_path / FINAL_CHECKPOINT).exists()
        assert (tmp_path / LAST_CHECKPOINT).exists()
        rows = read_csv_table(tmp_path / LOG_FILE)
        assert [r["step"] for r in rows] == ["1", "2", "3"]
        # Evaluation every 2 steps plus the final step.
        assert [r["eval_mrr"] != "" for r in rows] == [False, True, True]
        assert result.best_mrr is not None

    def test_checkpoint_restores_model(self, tmp_path, small_run_config, tiny_dataset):
        result = run_training(small_run_config, tiny_dataset, None, tmp_path)
        model, stats, state = load_trained(result.final_checkpoint)
        assert state["step"] == 3.0
        assert state["alpha"] == result.alpha
        snapshot = result.model.store.snapshot()
        for name, value in model.store.snapshot().items():
            assert np.array_equal(value, snapshot[name])
        assert np.array_equal(stats.route.mean, result.stats.route.mean)

    def test_same_seed_same_losses(self, tmp_path, small_run_config, tiny_dataset):
        a = run_training(small_run_config, tiny_dataset, None, tmp_path / "a")
        b = run_training(small_run_config, tiny_dataset, None, tmp_path / "b")
        assert a.losses == b.losses

    def test_resume_continues_exactly(self, tmp_path, small_run_config, tiny_dataset):
        config = small_run_config.with_overrides("train", epochs=2, max_steps=4)
        full = run_training(config, tiny_dataset, None, tmp_path / "full")

        partial = tmp_path / "partial"
        run_training(config.with_overrides("train", max_steps=2), tiny_dataset, None, partial)
        resumed = run_training(config, tiny_dataset, None, partial, resume=True)

        assert resumed.losses == full.losses[2:]
        assert resumed.alpha == full.alpha
        assert arrays_fingerprint(resumed.model.param_tensors()) == arrays_fingerprint(
            full.model.param_tensors()
        )
        assert [r["step"] for r in read_csv_table(partial / LOG_FILE)] == ["1", "2", "3", "4"]

    def test_rl_regime(self, tmp_path, small_run_config, tiny_dataset):
        config = small_run_config.with_overrides("train", rl=True, max_steps=2)
        result = run_training(config, tiny_dataset, None, tmp_path)
        assert result.alpha == config.train.alpha_init
        rows = read_csv_table(tmp_path / LOG_FILE)
        assert all(r["mean_return"] != "" for r in rows)

    def test_no_training_samples(self, tmp_path, small_run_config):
        with pytest.raises(ConfigError):
            run_training(small_run_config, [], None, tmp_path)

    def test_divergence_dumps_batch(self, tmp_path, small_run_config, tiny_dataset, monkeypatch):
        def diverge(model, batch, stats, alpha_state, config, batch_id=0):
            raise TrainingDivergedError(batch_id, [s.sample_id for s in batch], float("nan"))

        monkeypatch.setattr("scasrec.trainer.loop.supervised_batch", diverge)
        with pytest.raises(TrainingDivergedError):
            run_training(small_run_config, tiny_dataset, None, tmp_path)
        dump = json.loads((tmp_path / DIVERGENCE_DUMP).read_text())
        assert dump["batch_id"] == 1
        assert len(dump["sample_ids"]) == small_run_config.train.batch_size


    @pytest.mark.parametrize("rl", [False, True])
    def test_zero_probability_dumps_batch(
        self, tmp_path, small_run_config, tiny_dataset, monkeypatch, rl
    ):
        original = Graph.pick

        def vanishing_pick(self, a, index):
            return self.scale(original(self, a, index), 0.0)

        monkeypatch.setattr(Graph, "pick", vanishing_pick)
        config = small_run_config.with_overrides("train", rl=rl)
        with pytest.raises(TrainingDivergedError) as exc:
            run_training(config, tiny_dataset, None, tmp_path)
        assert isinstance(exc.value.__cause__, DomainError)
        dump = json.loads((tmp_path / DIVERGENCE_DUMP).read_text())
        assert dump["batch_id"] == 1
        assert len(dump["sample_ids"]) == config.train.batch_size


class TestAblation:
    def test_grid(self, small_run_config):
        runs = ablation_grid(small_run_config, betas=(0.02, 0.08))
        assert [r.name for r in runs] == ["full", "no_scr_eor", "beta_0.02", "beta_0.08"]
        assert runs[1].config.train.disable_scr and runs[1].config.train.disable_eor
        assert runs[3].config.train.beta == 0.08

    @pytest.mark.slow
    def test_run_writes_summary(self, tmp_path, small_run_config, tiny_dataset):
        results = run_ablation(
            small_run_config, tiny_dataset, tiny_dataset[:6], tmp_path, betas=(0.04,)
        )
        assert [r.run.name for r in results] == ["full", "no_scr_eor", "beta_0.04"]
        rows = read_csv_table(tmp_path / "ablation.csv")
        assert [r["run"] for r in rows] == ["full", "no_scr_eor", "beta_0.04"]


@pytest.mark.slow
class TestNoiseRatioDirection:
    """A larger assumed noise ratio lets the model stop earlier."""

    def test_higher_beta_shortens_lists(self, tmp_path, tiny_world_config, small_run_config):
        from scasrec.routeworld import generate_dataset

        data = generate_dataset(tiny_world_config.model_copy(update={"samples": 400}), seed=1)
        lengths = {}
        for beta in (0.0, 0.5):
            config = small_run_config.with_overrides(
                "train", beta=beta, eta=0.01, epochs=5, batch_size=32
            )
            result = run_training(config, data, None, tmp_path / str(beta))
            lengths[beta] = np.mean(result.list_lengths[-5:])
        assert lengths[0.5] <= lengths[0.0]
