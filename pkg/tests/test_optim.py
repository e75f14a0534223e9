"""Update-rule contracts: hand-evaluated first steps, invariants, convergence."""

import numpy as np
import pytest

from floraclass.errors import NumericalError, ShapeError
from floraclass.nn.model import GradientSet, ModelWeights
from floraclass.optim import (
    KINDS,
    Optimizer,
    OptimizerConfig,
    OptimizerState,
    optimizer_step,
)


def weights_of(value):
    return ModelWeights(layers=[{"w": np.array([value], dtype=np.float64)}])


def grads_of(value):
    return GradientSet(layers=[{"w": np.array([value], dtype=np.float64)}])


def one_step(kind, w0, g, **cfg):
    w = weights_of(w0)
    Optimizer(OptimizerConfig(kind, **cfg)).step(w, grads_of(g))
    return float(w.layers[0]["w"][0])


class TestFirstSteps:
    def test_sgd(self):
        assert one_step("SGD", 1.0, 0.5, learning_rate=0.1) == pytest.approx(0.95)

    def test_adagrad_hand_formula(self):
        got = one_step("Adagrad", 1.0, 2.0, learning_rate=0.1)
        want = 1.0 - 0.1 * 2.0 / (np.sqrt(2.0**2) + 1e-8)
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.9, abs=1e-6)

    def test_adamax_hand_formula(self):
        got = one_step("Adamax", 1.0, 0.5, learning_rate=0.001, beta1=0.9)
        m1 = (1 - 0.9) * 0.5
        u1 = max(0.0, abs(0.5))
        want = 1.0 - (0.001 / (1 - 0.9)) * m1 / (u1 + 1e-8)
        assert got == pytest.approx(want, abs=1e-15)
        assert got == pytest.approx(0.999, abs=1e-9)

    @pytest.mark.parametrize("g", [1e-6, 0.5, 3.0, -2.0, 1e4])
    def test_adam_first_step_bounded_by_lr(self, g):
        lr = 0.001
        got = one_step("Adam", 1.0, g, learning_rate=lr)
        assert abs(got - 1.0) <= lr * (1 + 1e-6)


class TestInvariants:
    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_gradient_leaves_weights(self, kind):
        w = weights_of(1.2345)
        Optimizer(OptimizerConfig(kind, learning_rate=0.1)).step(w, grads_of(0.0))
        assert float(w.layers[0]["w"][0]) == 1.2345

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic(self, kind):
        def run():
            w = ModelWeights(layers=[{"w": np.linspace(-1, 1, 7)}])
            opt = Optimizer(OptimizerConfig(kind, learning_rate=0.05))
            for s in range(5):
                g = GradientSet(layers=[{"w": np.sin(np.arange(7.0) + s)}])
                opt.step(w, g)
            return w.layers[0]["w"]

        np.testing.assert_array_equal(run(), run())

    @pytest.mark.parametrize("kind", KINDS)
    def test_step_counter_increments(self, kind):
        w = weights_of(1.0)
        opt = Optimizer(OptimizerConfig(kind, learning_rate=0.01))
        for expect in (1, 2, 3):
            opt.step(w, grads_of(0.1))
            assert opt.state.t == expect

    def test_shape_mismatch(self):
        w = ModelWeights(layers=[{"w": np.zeros(3)}])
        g = GradientSet(layers=[{"w": np.zeros(4)}])
        with pytest.raises(ShapeError, match="shape"):
            Optimizer(OptimizerConfig("SGD", learning_rate=0.1)).step(w, g)

    def test_non_finite_gradient_names_parameter(self):
        w = ModelWeights(layers=[{}, {"kernel": np.zeros(2)}])
        g = GradientSet(layers=[{}, {"kernel": np.array([1.0, np.nan])}])
        with pytest.raises(NumericalError, match="layer1.kernel"):
            Optimizer(OptimizerConfig("Adam")).step(w, g)

    def test_functional_wrapper(self):
        w = weights_of(1.0)
        cfg = OptimizerConfig("SGD", learning_rate=0.1)
        w2, state = optimizer_step(cfg, OptimizerState(), w, grads_of(0.5))
        assert float(w2.layers[0]["w"][0]) == pytest.approx(0.95)
        assert state.t == 1


class TestConfigValidation:
    def test_bad_learning_rate(self):
        with pytest.raises(ValueError, match="learning_rate"):
            OptimizerConfig("SGD", learning_rate=0.0)

    def test_bad_beta(self):
        with pytest.raises(ValueError, match="betas"):
            OptimizerConfig("Adam", beta1=1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown optimizer"):
            OptimizerConfig("RMSProp")


class TestQuadraticBowl:
    # rates chosen so each rule reaches |w| < 1e-2 within the 200-step budget;
    # Adam/Adamax move at most ~lr per step, so they need larger rates here
    RATES = {"SGD": 0.1, "Adagrad": 0.1, "Adam": 0.05, "Adamax": 0.05}

    @pytest.mark.parametrize("kind", KINDS)
    def test_converges(self, kind):
        w = weights_of(1.0)
        opt = Optimizer(OptimizerConfig(kind, learning_rate=self.RATES[kind]))
        for _ in range(200):
            g = GradientSet(layers=[{"w": 2 * w.layers[0]["w"]}])
            opt.step(w, g)
        assert abs(float(w.layers[0]["w"][0])) < 1e-2
