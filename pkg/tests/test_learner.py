"""Numpy network: shapes, backprop against finite differences, training and persistence."""

from dataclasses import replace

import numpy as np
import pytest

import config
from core.errors import ContractError, DomainError, InfeasibleConfigurationError, NumericalFailureError
from core.learner import (
    DnnModel, TrainSettings, TrainingSample, denormalize, forward, gradient_check, load_model,
    nearest_divisor, normalize_targets, online_cost, predict, samples_to_arrays, save_model, train,
)
from core.secrecy_analysis import qvp
from core.system_model import ImageSpec, TxParams
from handlers.training_handler import generate_dataset
from utils.constants import DATASET_INPUT_COLUMNS, DATASET_TARGET_COLUMNS
from utils.run_config import RunConfig


def random_inputs(rng, n):
    return np.column_stack([
        rng.choice([20, 30, 40, 60], size=n),
        rng.integers(20, 61, size=n),
        rng.uniform(2.0, 4.0, size=n),
        rng.uniform(0.85, 0.99, size=n),
    ]).astype(float)


class TestModel:
    def test_initialize_shapes(self, rng):
        model = DnnModel.initialize(rng)
        assert model.layer_sizes == config.DNN_LAYER_SIZES
        assert [W.shape for W in model.weights] == [(32, 4), (16, 32), (16, 16), (8, 16), (5, 8)]
        assert model.n_hidden == 4
        assert len(model.parameters()) == 2 * 5 + 2 * 4

    def test_invalid_sizes(self, rng):
        with pytest.raises(DomainError):
            DnnModel.initialize(rng, (4,))

    def test_forward_shapes(self, rng):
        model = DnnModel.initialize(rng)
        assert forward(model, [40, 30, 2.8, 0.95]).shape == (5,)
        assert forward(model, random_inputs(rng, 7)).shape == (7, 5)
        assert forward(model, random_inputs(rng, 7), mode='train').shape == (7, 5)

    def test_forward_rejects_bad_inputs(self, rng):
        model = DnnModel.initialize(rng)
        with pytest.raises(ContractError):
            forward(model, [1.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            forward(model, [40, np.nan, 2.8, 0.95])
        with pytest.raises(DomainError):
            forward(model, [40, 30, 2.8, 0.95], mode='eval')

    def test_online_cost(self, rng):
        assert online_cost(DnnModel.initialize(rng)) == (1136, 77)

    def test_online_cost_of_linear_model(self, rng):
        assert online_cost(DnnModel.initialize(rng, (4, 5))) == (20, 5)


class TestBackprop:
    def test_gradients_match_finite_differences(self, rng):
        model = DnnModel.initialize(rng, (4, 6, 5, 5))
        X = random_inputs(rng, 8)
        Y = rng.uniform(size=(8, 5))
        errors = gradient_check(model, X, Y)
        assert set(errors) == set(model.parameters())
        assert max(errors.values()) < 1e-4

    @pytest.mark.parametrize("prefix", ["W", "b", "bn_scale", "bn_shift"])
    def test_each_layer_type(self, rng, prefix):
        model = DnnModel.initialize(rng)
        X = random_inputs(rng, 16)
        Y = rng.uniform(size=(16, 5))
        errors = gradient_check(model, X, Y)
        layer_errors = [e for name, e in errors.items() if name.rstrip('0123456789') == prefix]
        assert len(layer_errors) == (5 if prefix in ('W', 'b') else 4)
        assert max(layer_errors) < 1e-4

    def test_linear_model(self, rng):
        model = DnnModel.initialize(rng, (4, 5))
        errors = gradient_check(model, random_inputs(rng, 6), rng.uniform(size=(6, 5)))
        assert set(errors) == {'W0', 'b0'}
        assert max(errors.values()) < 1e-6


class TestSettingsAndSamples:
    def test_rate_schedule(self):
        settings = TrainSettings(learning_rate=0.01, drop_factor=0.5, drop_period=10)
        assert settings.rate_at(0) == 0.01
        assert settings.rate_at(9) == 0.01
        assert settings.rate_at(25) == pytest.approx(0.0025)

    def test_invalid_settings(self):
        with pytest.raises(DomainError):
            TrainSettings(batch_size=1)
        with pytest.raises(DomainError):
            TrainSettings(drop_factor=0.0)
        with pytest.raises(DomainError):
            TrainSettings(split=(1, 0, 0))

    def test_samples(self):
        sample = TrainingSample((40, 30, 2.8, 0.95), (0.5, 1.0, 1.0, 0.2, 0.25))
        X, Y = samples_to_arrays([sample, sample])
        assert X.shape == (2, 4) and Y.shape == (2, 5)
        with pytest.raises(DomainError):
            TrainingSample((40, 30, 2.8, 0.95), (0.5, 1.2, 1.0, 0.2, 0.25))
        with pytest.raises(ContractError):
            TrainingSample((40, 30, 2.8), (0.5, 1.0, 1.0, 0.2, 0.25))

    def test_zero_target_rejected(self):
        with pytest.raises(DomainError):
            TrainingSample((40, 30, 2.8, 0.95), (0.5, 1.0, 1.0, 0.0, 0.25))
        with pytest.raises(DomainError):
            TrainingSample((40, 30, 2.8, 0.95), (0.0, 1.0, 1.0, 0.2, 0.25))


class TestTrain:
    def test_split_larger_than_data(self, rng):
        X = random_inputs(rng, 10)
        with pytest.raises(ContractError):
            train(X, rng.uniform(size=(10, 5)), rng, TrainSettings(split=(8, 2, 2)))

    def test_non_finite_loss(self, rng):
        X = random_inputs(rng, 10)
        Y = np.full((10, 5), np.nan)
        with pytest.raises(NumericalFailureError):
            train(X, Y, rng, TrainSettings(batch_size=5, max_epochs=2, split=(10, 0, 0)))

    def test_report_lengths(self, rng):
        X, Y = random_inputs(rng, 30), rng.uniform(size=(30, 5))
        settings = TrainSettings(batch_size=10, max_epochs=5, split=(20, 5, 5))
        model, report = train(X, Y, rng, settings)
        assert report.epochs == 5
        assert len(report.train_mse) == len(report.val_mse) == len(report.learning_rates) == 5
        assert report.val_mse[report.best_epoch] == min(report.val_mse)
        assert np.isfinite(report.test_mse)

    @pytest.mark.slow
    def test_memorizes_small_set(self, rng):
        X, Y = random_inputs(rng, 20), rng.uniform(size=(20, 5))
        settings = TrainSettings(batch_size=20, max_epochs=2000, learning_rate=0.01,
                                 drop_factor=0.5, drop_period=500, split=(20, 0, 0))
        model, report = train(X, Y, rng, settings)
        assert min(report.train_mse) < 2e-3
        assert min(report.train_mse) < 0.1 * report.train_mse[0]


class TestOnlineUse:
    def test_nearest_divisor_ties_to_smaller(self):
        assert nearest_divisor(60, 8.0) == 6
        assert nearest_divisor(60, 11.0) == 10
        assert nearest_divisor(60, 100.0) == 60

    def test_denormalize_projects_onto_box(self, cfg):
        tx = denormalize(np.array([-1.0, 2.0, 0.5, -3.0, 0.17]), cfg, 60)
        assert tx.zeta == config.ZETA_MIN
        assert tx.P_p == pytest.approx(cfg.gamma_max)
        assert tx.P_s == pytest.approx(0.5 * cfg.gamma_max)
        assert tx.nu == 0.0
        assert tx.L_s == 10

    def test_denormalize_inverts_normalize(self, cfg):
        tx = TxParams(zeta=0.4, P_p=500.0, P_s=800.0, nu=5.0, L_s=12)
        back = denormalize(np.array(normalize_targets(tx, cfg, 60)), cfg, 60)
        assert back.L_s == 12
        assert back.nu == pytest.approx(5.0)
        assert back.P_s == pytest.approx(800.0)

    def test_predict(self, cfg, rng):
        tx = predict(DnnModel.initialize(rng), cfg, 60, 40)
        assert 60 % tx.L_s == 0
        assert cfg.gamma_min <= tx.P_s / cfg.sigma_n <= cfg.gamma_max
        with pytest.raises(ContractError):
            predict(DnnModel.initialize(rng), cfg, 0, 40)


class TestPersistence:
    def test_round_trip_preserves_outputs(self, rng, tmp_path):
        model = DnnModel.initialize(rng)
        model.running_mean[0] += 0.3
        path = str(tmp_path / "model.npz")
        save_model(model, path)
        loaded = load_model(path)
        X = random_inputs(rng, 5)
        np.testing.assert_array_equal(forward(loaded, X), forward(model, X))
        assert loaded.layer_sizes == model.layer_sizes

    def test_version_mismatch(self, tmp_path):
        path = str(tmp_path / "old.npz")
        np.savez(path, format_version=np.array([99]), layer_sizes=np.array([4, 5]))
        with pytest.raises(ContractError):
            load_model(path)


@pytest.mark.slow
class TestLearnsGaLabels:
    def test_predictions_close_to_labels(self):
        run = RunConfig.from_dict({
            'seed': 5,
            'scenario': {'mode': 'nce'},
            'optimizer': {'population': 16, 'generations': 10},
            'dataset': {'samples': 80, 'N_roi_choices': [60], 'N_bg_range': [30, 50],
                        'r_D_range': [2.6, 3.0], 'rho_range': [0.93, 0.97]},
        })
        frame = generate_dataset(run, workers=1)
        frame = frame[frame['feasible'] == 1].reset_index(drop=True)
        assert len(frame) >= 40
        X = frame[DATASET_INPUT_COLUMNS].to_numpy(dtype=float)
        Y = frame[DATASET_TARGET_COLUMNS].to_numpy(dtype=float)
        settings = TrainSettings(batch_size=8, max_epochs=200, split=(len(frame) - 24, 12, 12))
        model, report = train(X, Y, np.random.default_rng(5), settings)
        best = report.best_epoch
        assert report.val_mse[best] <= 1.5 * report.train_mse[best]

        scenario = run.scenarios()[0]
        close = 0
        for row in frame.itertuples():
            cfg = replace(run.system_config(), r_D=row.r_D, rho=row.rho)
            img = ImageSpec(N_roi=int(row.N_roi), N_bg=int(row.N_bg), D_lim=run.image.D_lim)
            try:
                value = qvp(cfg, predict(model, cfg, img.N_roi, img.N_bg), img, scenario).qvp
            except InfeasibleConfigurationError:
                continue
            close += value <= row.qvp + 0.05
        assert close >= 0.9 * len(frame)
