"""End-to-end command runs through cli.main, including exit codes."""

import json

import numpy as np
import pandas as pd
import pytest

import cli
from core.errors import ContractError, DegenerateInputError, DomainError, UnsupportedParameterError
from utils.constants import (
    EXIT_CONFIG_ERROR, EXIT_INFEASIBLE, EXIT_MODEL_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK,
    VALIDATION_METRICS,
)
from utils.reports import read_table

FAST_GA = {'population': 8, 'generations': 3}


def write_config(tmp_path, document, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


class TestAnalysisCommands:
    def test_qvp(self, capsys):
        assert cli.main(['qvp']) == EXIT_OK
        out = capsys.readouterr().out
        assert "QoSec violation probability (NCE)" in out
        assert "Lambda" in out

    def test_qvp_both_scenarios(self, capsys):
        assert cli.main(['qvp', '--scenario', 'both']) == EXIT_OK
        out = capsys.readouterr().out
        assert "(NCE)" in out and "(CE)" in out

    def test_sweep_table(self, tmp_path):
        config_path = write_config(tmp_path, {'sweep': {'values': [10, 20, 40]}})
        out = str(tmp_path / "sweep.csv")
        assert cli.main(['sweep', '--axis', 'D_lim', '--config', config_path, '--out', out]) == EXIT_OK
        table = read_table(out)
        assert list(table['D_lim']) == [10, 20, 40]
        assert {'nce_qvp', 'nce_delay_violation', 'nce_Lambda'} <= set(table.columns)
        values = list(table['nce_qvp'])
        assert values[0] >= values[-1] - 1e-12
        with open(out, encoding='utf-8') as handle:
            assert handle.readline().startswith("# command: sweep D_lim")

    def test_sweep_reruns_identically(self, tmp_path):
        config_path = write_config(tmp_path, {'sweep': {'values': [0.1, 0.5]}})
        first, second = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        for out in (first, second):
            assert cli.main(['sweep', '--axis', 'lambda_E', '--config', config_path, '--out', out]) == EXIT_OK
        assert open(first, 'rb').read() == open(second, 'rb').read()

    def test_min_ls(self, capsys):
        assert cli.main(['min-ls']) == EXIT_OK
        assert "Smallest secure L_s" in capsys.readouterr().out

    @pytest.mark.slow
    def test_validate(self, tmp_path, capsys):
        out = str(tmp_path / "validate.csv")
        config_path = write_config(tmp_path, {'tx': {'nu': 0.0}, 'image': {'N_roi': 60, 'N_bg': 0, 'D_lim': 40}})
        assert cli.main(['validate', '--config', config_path, '--trials', '400', '--out', out]) == EXIT_OK
        table = read_table(out)
        assert tuple(table['metric']) == VALIDATION_METRICS
        assert "agree" in capsys.readouterr().out


class TestExitCodes:
    def test_config_error(self, tmp_path):
        assert cli.main(['qvp', '--config', write_config(tmp_path, {'system': {'bogus': 1}})]) == EXIT_CONFIG_ERROR

    def test_infeasible(self, tmp_path):
        config_path = write_config(tmp_path, {
            'scenario': {'eps_IP': 1e-9}, 'image': {'N_roi': 7, 'N_bg': 10, 'D_lim': 40}})
        assert cli.main(['min-ls', '--config', config_path]) == EXIT_INFEASIBLE

    def test_missing_model(self, tmp_path):
        assert cli.main(['predict', '--model', str(tmp_path / "absent.npz")]) == EXIT_MODEL_ERROR

    def test_numerical_failure(self, tmp_path):
        dataset = tmp_path / "nan.csv"
        rows = pd.DataFrame({
            'N_roi': [60] * 6, 'N_bg': [40] * 6, 'r_D': [2.5] * 6, 'rho': [0.9] * 6,
            'zeta_n': [np.nan] * 6, 'P_p_n': [1.0] * 6, 'P_s_n': [1.0] * 6, 'nu_n': [0.2] * 6,
            'L_s_n': [0.1] * 6, 'feasible': [1] * 6,
        })
        rows.to_csv(dataset, index=False)
        config_path = write_config(tmp_path, {'learner': {'split': [6, 0, 0], 'batch_size': 3, 'max_epochs': 2}})
        code = cli.main(['train', '--config', config_path, '--dataset', str(dataset),
                         '--model', str(tmp_path / "m.npz")])
        assert code == EXIT_NUMERICAL_FAILURE

    def test_gen_dataset_needs_single_scenario(self, tmp_path):
        assert cli.main(['gen-dataset', '--scenario', 'both', '--out', str(tmp_path / "d.csv")]) == EXIT_CONFIG_ERROR

    @pytest.mark.parametrize("error, code", [
        (DomainError("rho must lie in (0, 1]"), EXIT_CONFIG_ERROR),
        (UnsupportedParameterError("n_T = 3 with K_terms = 0"), EXIT_CONFIG_ERROR),
        (ContractError("L_s = 7 does not divide N_roi = 60"), EXIT_MODEL_ERROR),
        (DegenerateInputError("Pr(Psi1) = 0"), EXIT_MODEL_ERROR),
    ])
    def test_error_classes(self, monkeypatch, error, code):
        def fail(args, run):
            raise error
        monkeypatch.setattr(cli, "dispatch", fail)
        assert cli.main(["qvp"]) == code


@pytest.mark.slow
class TestLearningPipeline:
    def test_optimize_with_baselines(self, tmp_path):
        config_path = write_config(tmp_path, {'optimizer': FAST_GA})
        out = str(tmp_path / "opt.csv")
        assert cli.main(['optimize', '--config', config_path, '--out', out]) == EXIT_OK
        assert list(read_table(out)['label']) == ['GA', 'MP', 'EP']

    def test_optimize_mp_baseline(self, tmp_path):
        config_path = write_config(tmp_path, {'optimizer': {**FAST_GA, 'baseline': 'mp'}})
        out = str(tmp_path / "mp.csv")
        assert cli.main(['optimize', '--config', config_path, '--out', out]) == EXIT_OK
        table = read_table(out)
        assert list(table['label']) == ['MP']
        assert table['P_s'][0] == pytest.approx(1000.0)

    def test_dataset_train_predict(self, tmp_path, capsys):
        document = {
            'seed': 3,
            'optimizer': FAST_GA,
            'dataset': {'samples': 6},
            'learner': {'split': [4, 1, 1], 'batch_size': 2, 'max_epochs': 3},
        }
        config_path = write_config(tmp_path, document)
        dataset = str(tmp_path / "dataset.csv")
        db = str(tmp_path / "runs.db")
        model = str(tmp_path / "model.npz")

        assert cli.main(['gen-dataset', '--config', config_path, '--out', dataset, '--db', db]) == EXIT_OK
        first = open(dataset, 'rb').read()
        frame = read_table(dataset)
        assert list(frame['sample']) == list(range(6))
        assert frame[['zeta_n', 'P_p_n', 'P_s_n', 'nu_n', 'L_s_n']].to_numpy().max() <= 1.0

        # Everything is checkpointed, so the rerun only reassembles the table
        assert cli.main(['gen-dataset', '--config', config_path, '--out', dataset, '--db', db]) == EXIT_OK
        assert open(dataset, 'rb').read() == first

        if int(frame['feasible'].sum()) >= 6:
            assert cli.main(['train', '--config', config_path, '--dataset', dataset, '--model', model]) == EXIT_OK
            assert cli.main(['predict', '--config', config_path, '--model', model]) == EXIT_OK
            assert "Predicted:" in capsys.readouterr().out
