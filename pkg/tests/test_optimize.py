"""Packing/transforms, quasi-Newton training, gradient verification."""

import math

import numpy as np
import pytest

from gptraj import kernels, means, modelspec
from gptraj.errors import DimensionMismatch, NoTrainableParams, NumericalBreakdown
from gptraj.gpr import GPModel, nlml, nlml_grad
from gptraj.kernels import Param
from gptraj.optimize import (
    OptConfig,
    PackedParams,
    check_gradients,
    constrained_values,
    minimize,
    pack,
    trainable_params,
    unpack,
)
from gptraj.trajectory import CoordinateDataset

from conftest import DEMO_X, DEMO_Y


def _demo_model(text: str) -> GPModel:
    return modelspec.build(modelspec.parse(text), CoordinateDataset(X=DEMO_X, y=DEMO_Y))


def _trained(text: str, config: OptConfig | None = None) -> GPModel:
    model = _demo_model(text)
    return unpack(model, minimize(model, config).final_params)


def _value(model: GPModel, path: str) -> float:
    return dict(trainable_params(model))[path].value


M1 = "matern32()"
M3 = "matern32() + white(variance=4, trainable=false)"
M5 = "matern32() + white(variance=4, trainable=false); mean=linear(a=1, b=1); likelihood(init=0.0001)"


class TestPack:
    def test_all_fixed_is_empty(self):
        m = GPModel(kernel=kernels.White(Param(1.0, False)), mean=means.Zero(),
                    likelihood=Param(1.0, False), X=np.array([0.0]), y=np.array([1.0]))
        assert pack(m).values.size == 0

    def test_matern_defaults_transform_values(self):
        pv = pack(_demo_model(M1))
        # inverse shifted softplus of 1: ln(e^(1 - 1e-6) - 1)
        expected = math.log(math.expm1(1.0 - 1e-6))
        np.testing.assert_allclose(pv.values, np.full(3, expected), rtol=1e-12)
        assert [d.transform for d in pv.descriptors] == ["softplus_shifted"] * 3

    def test_m5_has_five_entries_in_canonical_order(self):
        pv = pack(_demo_model(M5))
        assert [d.path for d in pv.descriptors] == [
            "kernel.sum.left.matern32.variance",
            "kernel.sum.left.matern32.lengthscale",
            "likelihood.variance",
            "mean.linear.A",
            "mean.linear.b",
        ]
        assert [d.transform for d in pv.descriptors] == ["softplus_shifted"] * 3 + ["identity"] * 2

    def test_constrained_roundtrip(self):
        for text in (M1, M3, M5):
            m = _demo_model(text)
            pv = pack(m)
            expected = [p.value for _, p in trainable_params(m)]
            np.testing.assert_allclose(constrained_values(pv), expected, rtol=1e-12)


class TestUnpack:
    @pytest.mark.parametrize("text", [M1, M3, M5])
    def test_pack_unpack_identity(self, text):
        m = _demo_model(text)
        m2 = unpack(m, pack(m))
        for (p1, a), (p2, b) in zip(trainable_params(m), trainable_params(m2)):
            assert p1 == p2
            np.testing.assert_allclose(b.value, a.value, rtol=1e-12)
            assert a.trainable == b.trainable

    def test_fixed_params_untouched(self):
        m = _demo_model(M3)
        pv = pack(m)
        m2 = unpack(m, PackedParams(pv.values + 0.5, pv.descriptors))
        white = dict(m2.kernel.params())["sum.right.white.variance"]
        assert white.value == 4.0 and white.trainable is False

    def test_descriptor_mismatch(self):
        m1, m5 = _demo_model(M1), _demo_model(M5)
        with pytest.raises(DimensionMismatch):
            unpack(m1, pack(m5))


class TestMinimize:
    def test_m1_reaches_reference_basin(self):
        t = _trained(M1)
        assert abs(_value(t, "kernel.matern32.lengthscale") - 7.35) / 7.35 < 0.05
        assert abs(_value(t, "kernel.matern32.variance") - 1346.36) / 1346.36 < 0.05
        assert abs(t.likelihood.value - 36.4) / 36.4 < 0.05

    def test_m5_reaches_reference_basin(self):
        t = _trained(M5)
        assert abs(_value(t, "mean.linear.A") - 4.84) / 4.84 < 0.10
        assert abs(_value(t, "mean.linear.b") + 42.14) / 42.14 < 0.10

    def test_one_parameter_closed_form_interior(self):
        # fixed white noise w and only the likelihood trainable: the MLE is
        # sigma^2 = mean(y^2) - w
        rng = np.random.default_rng(8)
        y = rng.normal(0.0, 3.0, 40)
        m = GPModel(kernel=kernels.White(Param(2.0, False)), mean=means.Zero(),
                    likelihood=Param(1.0), X=np.arange(40.0), y=y)
        t = unpack(m, minimize(m).final_params)
        target = float(np.mean(y**2)) - 2.0
        assert abs(t.likelihood.value - target) / target < 1e-6

    def test_one_parameter_closed_form_floored(self):
        rng = np.random.default_rng(9)
        y = rng.normal(0.0, 0.05, 40)  # mean(y^2) << fixed noise, optimum at the bound
        m = GPModel(kernel=kernels.White(Param(2.0, False)), mean=means.Zero(),
                    likelihood=Param(1.0), X=np.arange(40.0), y=y)
        t = unpack(m, minimize(m).final_params)
        assert t.likelihood.value <= 1e-3
        assert t.likelihood.value >= 1e-6

    def test_result_fields_and_monotone_path(self):
        m = _demo_model(M1)
        r = minimize(m)
        assert r.converged
        assert r.termination_reason in ("gradient_tol", "f_tol")
        assert r.iterations > 0
        assert r.final_nlml <= r.nlml_path[0] + 1e-12
        assert np.all(np.diff(r.nlml_path) <= 1e-12)

    def test_deterministic(self):
        m = _demo_model(M5)
        r1, r2 = minimize(m), minimize(m)
        np.testing.assert_array_equal(r1.final_params.values, r2.final_params.values)
        assert r1.final_nlml == r2.final_nlml
        assert r1.iterations == r2.iterations

    def test_constrained_values_stay_above_bounds(self):
        for text in (M1, M3, M5):
            m = _demo_model(text)
            r = minimize(m)
            t = unpack(m, r.final_params)
            for _, p in trainable_params(t):
                if p.lower_bound is not None:
                    assert p.value >= p.lower_bound

    def test_noise_split_symmetry(self):
        t = _trained("matern32() + white()")
        white = _value(t, "kernel.sum.right.white.variance")
        lik = t.likelihood.value
        assert white == lik  # identical gradients at every step keep them equal

    def test_no_trainable_params(self):
        m = GPModel(kernel=kernels.White(Param(1.0, False)), mean=means.Zero(),
                    likelihood=Param(1.0, False), X=np.array([0.0]), y=np.array([1.0]))
        with pytest.raises(NoTrainableParams):
            minimize(m)

    def test_breakdown_at_initial_point(self):
        # constant variance so large that every ladder jitter is below half an
        # ulp of the diagonal: the singular matrix cannot be rescued
        m = GPModel(kernel=kernels.Constant(Param(1e17)), mean=means.Zero(),
                    likelihood=Param(1e-6), X=np.arange(5.0), y=np.zeros(5))
        with pytest.raises(NumericalBreakdown):
            minimize(m)

    def test_param_at_bound_packs_finite(self):
        m = GPModel(kernel=kernels.White(Param(1.0)), mean=means.Zero(),
                    likelihood=Param(1e-6), X=np.array([0.0, 1.0]), y=np.array([1.0, 2.0]))
        pv = pack(m)
        assert np.all(np.isfinite(pv.values))
        m2 = unpack(m, pv)
        assert m2.likelihood.value == pytest.approx(1e-6, abs=1e-12)

    def test_max_iter_reached(self):
        m = _demo_model(M1)
        r = minimize(m, OptConfig(max_iter=2))
        assert r.termination_reason == "max_iter"
        assert not r.converged
        assert r.final_nlml <= nlml(m)

    def test_multi_start_is_deterministic_and_no_worse(self):
        m = _demo_model(M1)
        base = minimize(m)
        multi1 = minimize(m, OptConfig(restarts=3, restart_seed=5))
        multi2 = minimize(m, OptConfig(restarts=3, restart_seed=5))
        np.testing.assert_array_equal(multi1.final_params.values, multi2.final_params.values)
        assert multi1.final_nlml <= base.final_nlml + 1e-12


class TestCheckGradients:
    def test_m1_at_init_passes(self):
        report = check_gradients(_demo_model(M1))
        assert len(report.entries) == 3
        assert report.passed

    def test_all_fixed_gives_empty_report(self):
        m = GPModel(kernel=kernels.White(Param(1.0, False)), mean=means.Zero(),
                    likelihood=Param(1.0, False), X=np.array([0.0]), y=np.array([1.0]))
        assert check_gradients(m).entries == ()

    def test_corrupted_gradient_is_flagged(self):
        m = _demo_model(M1)

        def corrupted(model):
            g = nlml_grad(model)
            g[1] += 0.5
            return g

        report = check_gradients(m, grad_fn=corrupted)
        assert not report.passed
        assert [e.path for e in report.flagged()] == ["kernel.matern32.lengthscale"]
