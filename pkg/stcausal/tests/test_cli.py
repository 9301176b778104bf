import pytest

from stcausal import cli, pipeline
from stcausal.exceptions import SingularSystemError
from stcausal.utils import get_data


def load(argv):
    return cli._load_config(cli.build_parser().parse_args(argv))


def test_flags_set_the_configuration():
    config = load(
        [
            "--config",
            get_data("example.cfg"),
            "--no-patterns",
            "--no-confounders",
            "--paper-exact-pi",
            "train",
        ]
    )
    assert config.no_patterns
    assert config.n_clusters == [1]
    assert config.pi_update == "scaled"
    assert config.seed == 7


def test_prior_update_defaults_to_normalized():
    assert load(["train"]).pi_update == "normalized"


def test_overrides():
    config = load(["--set", "max_lag=2", "--set", "targets=[PM25, NO2]", "mine"])
    assert config.max_lag == 2
    assert config.targets == ["PM25", "NO2"]


def test_main_success(tmpdir, capsys, monkeypatch):
    monkeypatch.setattr(pipeline, "cmd_train", lambda config, verbose: "trained 0")
    assert cli.main(["--set", f"output_dir={tmpdir}", "train"]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "trained 0"


@pytest.mark.parametrize(
    "argv",
    [
        pytest.param(["--set", "max_lag", "train"], id="override without value"),
        pytest.param(["--set", "sigma=3", "train"], id="invalid value"),
        pytest.param(["--config", "missing.cfg", "train"], id="missing config"),
        pytest.param(["pathway", "PM25@x0"], id="nothing trained"),
    ],
)
def test_main_data_errors(tmpdir, capsys, monkeypatch, argv):
    monkeypatch.chdir(tmpdir)
    assert cli.main(argv) == 2
    assert "stcausal Configuration Error" in capsys.readouterr().err


def test_main_numerical_error(capsys, monkeypatch):
    def fail(config, verbose):
        raise SingularSystemError("the normal equations are singular.")

    monkeypatch.setattr(pipeline, "cmd_train", fail)
    assert cli.main(["train"]) == 3
    assert "singular" in capsys.readouterr().err


def test_main_usage_error(capsys):
    with pytest.raises(SystemExit) as error:
        cli.main(["fit"])
    assert error.value.code == 2
