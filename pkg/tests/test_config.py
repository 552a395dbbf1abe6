import pytest

from nlslab.config import KINDS, ExperimentConfig, parse_config, parse_text, serialize
from nlslab.errors import ConfigurationError


def test_minimal_file_uses_defaults():
    cfg = parse_text("experiment = decay\n")
    assert cfg == ExperimentConfig(experiment="decay")
    assert cfg.n is None and cfg.L is None  # "auto"


def test_comments_and_blank_lines():
    cfg = parse_text("# header\n\nexperiment = simulate  # trailing\np = 3.5\n")
    assert cfg.p == 3.5


@pytest.mark.parametrize("line,msg", [
    ("p = 1.5", "p must exceed 2"),
    ("im_lambda = 0.1", "Imλ ≤ 0"),
    ("alpha = 2.5", "alpha"),
    ("experiment = bogus", "unknown kind"),
])
def test_constraint_violations_name_the_key(line, msg):
    with pytest.raises(ConfigurationError, match=msg):
        parse_text(f"experiment = decay\n{line}\n")


def test_unknown_key_and_type_mismatch_are_collected():
    text = "experiment = decay\nfrobnicate = 3\nn = twelve\np = 1.0\n"
    with pytest.raises(ConfigurationError) as exc:
        parse_text(text, "x.cfg")
    errs = exc.value.errors
    assert len(errs) == 3
    assert "x.cfg:2: unknown key 'frobnicate'" in errs[0]
    assert "x.cfg:3: n:" in errs[1]
    assert "p must exceed 2" in errs[2]


def test_malformed_line():
    with pytest.raises(ConfigurationError, match="expected 'key = value'"):
        parse_text("experiment decay\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "nope.cfg")


@pytest.mark.parametrize("kind", KINDS)
def test_serialize_round_trip(kind):
    cfg = ExperimentConfig(experiment=kind, n=48, L=6.5, heat_times=(0.5, 2.0))
    assert parse_text(serialize(cfg)) == cfg


def test_lambda_is_assembled_from_parts():
    cfg = parse_text("experiment = simulate\nre_lambda = -1\nim_lambda = -0.25\n")
    assert cfg.lam == complex(-1, -0.25)
