"""Tests for the autodiff tape, parameters, gradient checking and checkpoints."""

import numpy as np
import pytest

from scasrec.core.errors import (
    CheckpointError,
    ContractError,
    DomainError,
    NumericError,
    ShapeError,
)
from scasrec.diffengine import (
    MASK_VALUE,
    Graph,
    ParamStore,
    adam_step,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)
from scasrec.diffengine.checkpoint import decode_checkpoint, encode_checkpoint


@pytest.fixture
def store():
    rng = np.random.default_rng(0)
    s = ParamStore()
    s.add("W", rng.normal(size=(3, 4)))
    s.add("b", rng.normal(size=(1, 4)))
    s.add("V", rng.normal(size=(4, 2)))
    s.add("row", rng.normal(size=(1, 2)))
    return s


X = np.random.default_rng(1).normal(size=(5, 3))


class TestGraph:
    """Forward values and tape behavior."""

    def test_matmul_and_affine_values(self, store):
        g = Graph(store)
        out = g.affine(g.constant(X), "W", "b")
        assert np.allclose(out.data, X @ store.value("W") + store.value("b"))

    def test_softmax_rows_sum_to_one(self, store):
        g = Graph(store)
        probs = g.softmax(g.constant(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])))
        assert np.allclose(probs.data.sum(axis=1), 1.0)
        assert np.allclose(probs.data[1], 1.0 / 3.0)

    def test_masked_entries_get_no_probability(self, store):
        g = Graph(store)
        mask = np.array([[0.0, MASK_VALUE, 0.0, MASK_VALUE]])
        probs = g.softmax(g.masked_add(g.constant(np.zeros((1, 4))), mask))
        assert probs.data[0, 1] <= 1e-12
        assert probs.data[0, 3] <= 1e-12
        assert np.isclose(probs.data[0, 0], 0.5)

    def test_log_of_non_positive_raises(self, store):
        g = Graph(store)
        with pytest.raises(DomainError):
            g.log(g.constant(np.array([1.0, 0.0])))

    def test_domain_errors_are_numeric_errors(self, store):
        g = Graph(store)
        with pytest.raises(NumericError):
            g.log(g.constant(np.array([0.0])))

    def test_log_sigmoid_is_finite_for_large_inputs(self, store):
        g = Graph(store)
        out = g.log_sigmoid(g.constant(np.array([-800.0, 0.0, 800.0])))
        assert np.allclose(out.data, [-800.0, np.log(0.5), 0.0])

    def test_shape_mismatch_raises(self, store):
        g = Graph(store)
        with pytest.raises(ShapeError):
            g.add(g.constant(np.zeros((2, 3))), g.constant(np.zeros((3, 2))))
        with pytest.raises(ShapeError):
            g.matmul(g.constant(np.zeros((2, 3))), g.constant(np.zeros((2, 3))))

    def test_backward_needs_scalar_loss(self, store):
        g = Graph(store)
        out = g.matmul(g.constant(X), g.param("W"))
        with pytest.raises(ContractError):
            g.backward(out)

    def test_backward_on_non_recording_graph_raises(self, store):
        g = Graph(store, record=False)
        loss = g.sum(g.param("W"))
        with pytest.raises(ContractError):
            g.backward(loss)

    def test_sum_gradient_is_ones(self, store):
        g = Graph(store)
        g.backward(g.sum(g.param("W")))
        assert np.array_equal(store.grad("W"), np.ones((3, 4)))

    def test_shared_parameter_accumulates(self, store):
        g = Graph(store)
        w = g.param("W")
        g.backward(g.sum(g.add(w, w)))
        assert np.array_equal(store.grad("W"), np.full((3, 4), 2.0))

    def test_gather_rows_with_repeats(self, store):
        g = Graph(store)
        rows = g.gather_rows(g.param("W"), [0, 2, 0])
        g.backward(g.sum(rows))
        assert np.array_equal(store.grad("W")[0], np.full(4, 2.0))
        assert np.array_equal(store.grad("W")[1], np.zeros(4))


class TestGradCheck:
    """Central-difference verification of every primitive."""

    @staticmethod
    def composite(g: Graph):
        h = g.tanh(g.affine(g.constant(X), "W", "b"))
        s = g.sigmoid(g.matmul(h, g.param("V")))
        s = g.broadcast_mul(s, g.param("row"))
        s = g.broadcast_add(s, g.param("row"))
        rows = g.reshape(g.gather_rows(h, [1, 3]), (4, 2))
        logits = g.transpose(g.concat([s, rows], axis=0))
        mask = np.zeros((1, 9))
        mask[0, 4] = MASK_VALUE
        probs = g.softmax(g.masked_add(logits, mask))
        picked = g.log(g.pick(probs, (0, 2)))
        logs = g.mean(g.log_sigmoid(g.sub(s, g.scale(s, 0.5))))
        return g.add(picked, g.mul(logs, g.sum(g.param("row"))))

    def test_composite_passes(self, store):
        result = grad_check(self.composite, store)
        assert result.passed, result
        assert result.checked == store.size()

    def test_corrupted_gradient_is_detected(self, store):
        def corrupt(analytic):
            analytic["V"] += 0.5

        result = grad_check(self.composite, store, analytic_hook=corrupt)
        assert not result.passed
        assert result.worst_param == "V"

    def test_parameters_are_restored(self, store):
        before = store.snapshot()
        grad_check(self.composite, store, max_elements=3)
        after = store.snapshot()
        assert all(np.array_equal(before[k], after[k]) for k in before)


class TestParamStore:
    def test_duplicate_name_raises(self):
        store = ParamStore()
        store.add("a", np.zeros(2))
        with pytest.raises(ContractError):
            store.add("a", np.zeros(2))

    def test_load_values_checks_names_and_shapes(self, store):
        values = store.snapshot()
        values["W"] = np.zeros((4, 3))
        with pytest.raises(ShapeError):
            store.load_values(values)
        with pytest.raises(ContractError):
            store.load_values({"W": np.zeros((3, 4))})

    def test_first_adam_step_moves_by_learning_rate(self):
        store = ParamStore()
        store.add("p", np.array([1.0, -1.0]))
        store.accumulate("p", np.array([2.0, -0.5]))
        adam_step(store, learning_rate=1e-3)
        assert np.allclose(store.value("p"), [1.0 - 1e-3, -1.0 + 1e-3], atol=1e-9)
        assert np.array_equal(store.grad("p"), np.zeros(2))

    def test_optimizer_state_round_trip(self):
        store = ParamStore()
        store.add("p", np.array([1.0, 2.0]))
        store.accumulate("p", np.array([0.3, 0.1]))
        adam_step(store)
        state = store.optimizer_state()
        fresh = ParamStore()
        fresh.add("p", store.value("p"))
        fresh.load_optimizer_state(state)
        assert fresh.optimizer_state()["adam/step/p"][0] == 1.0
        assert np.array_equal(fresh.optimizer_state()["adam/m/p"], state["adam/m/p"])


class TestCheckpoint:
    def test_encode_decode_is_exact(self):
        tensors = {
            "param/a": np.random.default_rng(3).normal(size=(2, 3)),
            "state/step": np.array([7.0]),
        }
        decoded = decode_checkpoint(encode_checkpoint(tensors))
        assert list(decoded) == list(tensors)
        for name, value in tensors.items():
            assert np.array_equal(decoded[name], value)

    def test_bad_magic(self):
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"NOT-A-CKPT" + b"\0" * 16)

    def test_truncated(self):
        blob = encode_checkpoint({"x": np.ones((4, 4))})
        with pytest.raises(CheckpointError):
            decode_checkpoint(blob[:-5])

    def test_trailing_bytes(self):
        blob = encode_checkpoint({"x": np.ones(2)})
        with pytest.raises(CheckpointError):
            decode_checkpoint(blob + b"\0")

    def test_save_and_load(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, {"x": np.arange(6.0).reshape(2, 3)})
        assert np.array_equal(load_checkpoint(path)["x"], np.arange(6.0).reshape(2, 3))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.ckpt")
