"""Tests for the comprint-lab command line: parsing, exit codes and small end-to-end commands."""

import json

import pytest
import yaml

from src.cli.cli_main import ComprintCLI, render_result
from src.evaluation.grid import write_grid
from src.models.dataset import DatasetManifest
from src.utils.logging_config import LoggingConfig


def _score(model, qf, variant):
    bonus = {'HighQF': 0.05, 'WideQF': 0.0, 'HighQFRec': 0.1}[model]
    return 0.2 + qf / 200 + bonus


@pytest.fixture
def cli(tmp_path, monkeypatch, mocker):
    """CLI running in an empty directory, without touching the root logger."""
    monkeypatch.chdir(tmp_path)
    mocker.patch('src.cli.cli_main.setup_application_logging',
                 return_value=LoggingConfig(console_logging=False, file_logging=False))
    return ComprintCLI()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump({
        'dataset': {'train': 4, 'val': 2, 'test': 1, 'train_size': 32, 'test_size': 64, 'recipes': ['highqf']},
        'model': {'patch_size': 16},
        'localization': {'window': 32},
    }), encoding='utf-8')
    return path


class TestExitCodes:

    @pytest.mark.asyncio
    async def test_no_command_prints_help(self, cli, capsys):
        assert await cli.run([]) == 0
        assert "comprint-lab" in capsys.readouterr().out

    @pytest.mark.asyncio
    async def test_invalid_configuration(self, cli, capsys):
        assert await cli.run(['--workers', '0', 'report']) == 1
        assert "Configuration error" in capsys.readouterr().err

    @pytest.mark.asyncio
    async def test_missing_config_file(self, cli, tmp_path):
        assert await cli.run(['--config', str(tmp_path / "nope.yaml"), 'report']) == 1

    @pytest.mark.asyncio
    async def test_unknown_stage(self, cli, tmp_path):
        assert await cli.run(['--out', str(tmp_path / "run"), 'run', 'bogus']) == 1

    @pytest.mark.asyncio
    async def test_missing_upstream_stage(self, cli, tmp_path):
        assert await cli.run(['--out', str(tmp_path / "run"), 'run', 'evaluate']) == 2
        manifest = json.loads((tmp_path / "run" / "MANIFEST").read_text(encoding='utf-8'))
        assert manifest['stages']['evaluate']['status'] == 'pending'

    @pytest.mark.asyncio
    async def test_evaluate_without_manifest(self, cli, tmp_path):
        code = await cli.run(['evaluate', '--heatmaps', str(tmp_path / "h"),
                              '--manifest', str(tmp_path / "manifest_test.json"), '--out', str(tmp_path / "r")])
        assert code == 2

    @pytest.mark.asyncio
    async def test_dataset_without_corpus(self, cli, tmp_path):
        assert await cli.run(['dataset', 'build', '--out', str(tmp_path / "data")]) == 1

    def test_parser_rejects_unknown_recipe(self, cli):
        with pytest.raises(SystemExit):
            cli.create_parser().parse_args(['dataset', 'build', '--recipe', 'lowqf'])


class TestReportAndPlot:

    @pytest.fixture
    def grid_csv(self, tmp_path, full_grid):
        return write_grid(full_grid(_score), tmp_path / "results" / "grid.csv")

    @pytest.mark.asyncio
    async def test_json_report(self, cli, capsys, grid_csv):
        assert await cli.run(['--json', 'report', '--grid', str(grid_csv)]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result['success'] is True
        assert result['status'] == 'ok'
        assert set(result['details']['trends'].values()) == {'pass'}

    @pytest.mark.asyncio
    async def test_report_saves_trends(self, cli, tmp_path, grid_csv):
        assert await cli.run(['report', '--grid', str(grid_csv), '--save', str(tmp_path / "t.yaml")]) == 0
        assert yaml.safe_load((tmp_path / "t.yaml").read_text(encoding='utf-8'))['failed'] == []

    @pytest.mark.asyncio
    async def test_report_missing_grid(self, cli, tmp_path):
        assert await cli.run(['report', '--grid', str(tmp_path / "none.csv")]) == 2

    @pytest.mark.asyncio
    async def test_plot_from_grid(self, cli, tmp_path, grid_csv):
        figures = tmp_path / "figures"
        assert await cli.run(['plot', '--grid', str(grid_csv), '--figures', str(figures), '--model', 'HighQF']) == 0
        assert (figures / "qf_curves.png").is_file()
        assert (figures / "qf_curves.csv").is_file()
        assert (figures / "recompression_highqf.png").is_file()
        assert not (figures / "recompression_wideqf.png").exists()

    @pytest.mark.asyncio
    async def test_plot_unknown_model(self, cli, grid_csv):
        assert await cli.run(['plot', '--grid', str(grid_csv), '--model', 'LowQF']) == 1


class TestDatasetCommand:

    @pytest.mark.asyncio
    async def test_build_and_test_suite(self, cli, capsys, tmp_path, make_corpus, small_config):
        corpus = make_corpus(n=8)
        data = tmp_path / "data"
        code = await cli.run(['--json', '--config', str(small_config), 'dataset', 'build',
                              '--corpus', str(corpus), '--seed', '3', '--out', str(data)])
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result['seed'] == 3
        assert result['statistics']['sources'] == {'train': 4, 'val': 2, 'test': 1}
        assert result['statistics']['highqf'] == {'train': 4, 'val': 2, 'test': 0}
        assert DatasetManifest.load(data / "manifest_highqf.json").seed == 3

        code = await cli.run(['--json', '--config', str(small_config), 'dataset', 'test-suite', '--out', str(data)])
        assert code == 0
        assert json.loads(capsys.readouterr().out)['entries'] == 15 * 8
        assert (data / "manifest_test.json").is_file()


class TestRendering:

    def test_plain_result(self):
        text = render_result({
            'success': True, 'message': "Run r1 finished", 'timestamp': "t", 'status': 'completed',
            'details': {'stages': {'dataset': 'completed'}}, 'outputs': ["a.png", "b.png"],
        })
        lines = text.splitlines()
        assert lines[0] == "Run r1 finished"
        assert "status: completed" in lines
        assert "    dataset: completed" in lines
        assert "outputs: 2 files (--verbose lists them)" in lines
        assert "timestamp" not in text

    def test_verbose_lists_outputs(self):
        text = render_result({'message': "m", 'outputs': ["a.png"]}, verbose=True)
        assert text.splitlines()[-1] == "  a.png"
