import json
import math

import pytest

from nlslab import cli
from nlslab.config import KINDS, parse_text
from nlslab.experiments import (
    INFO,
    RUNNERS,
    ReportRecord,
    Threshold,
    below,
    between,
    emit_plot_data,
    run_experiment,
    verify_all,
)

SMALL = """\
experiment = regular-point
n = 32
L = 8
equivalence.refine_n = 48
equivalence.count = 6
regular.ns = 16, 24, 32
as_bound.ns = 24, 32
strichartz.count = 2
strichartz.T = 1
t_end = 4
decay.window_hi = 4
scattering.times = 2, 3, 4
dispersive.times = 1, 2
"""


@pytest.fixture
def small_cfg():
    return parse_text(SMALL)


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_runners_cover_every_kind():
    assert set(RUNNERS) == set(KINDS)


def test_threshold_semantics():
    assert below(1.0).accepts(1.0) and not below(1.0).accepts(1.1)
    assert between(1.8, 2.2).accepts(2.0) and not between(1.8, 2.2).accepts(1.7)
    assert not below(1.0).accepts(math.nan)
    assert INFO.accepts(math.nan)
    assert Threshold(1.0, 1.0).describe() == "== 1"


def test_report_record_passed_is_derived():
    r = ReportRecord("x", "a", {}, "m", 0.5, below(1.0))
    assert r.passed and r.to_dict()["passed"] is True
    r = ReportRecord("x", "a", {}, "m", 2.0, below(1.0))
    assert not r.passed and r.to_dict()["threshold"] == "<= 1"


@pytest.mark.parametrize("kind", ["regular-point", "linf-interp", "equivalence", "as-bound", "simulate"])
def test_small_runs_pass_and_write_reports(small_cfg, tmp_path, kind):
    res = run_experiment(small_cfg.with_overrides(experiment=kind), tmp_path)
    assert res.error is None
    assert res.exit_code == 0, [r.to_dict() for r in res.records if not r.passed]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["exit_code"] == 0 and len(summary["records"]) == len(res.records)
    matrix = (tmp_path / "verification_matrix.txt").read_text()
    assert matrix.count("PASS") == len(res.records)
    assert (tmp_path / "config.txt").exists()


def _bodies(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_reruns_are_byte_identical(small_cfg, tmp_path):
    cfg = small_cfg.with_overrides(experiment="equivalence")
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    a, b = _bodies(tmp_path / "a"), _bodies(tmp_path / "b")
    assert a and a == b


def test_verify_all_subset(small_cfg, tmp_path):
    results, code = verify_all(small_cfg, tmp_path, kinds=("regular-point", "linf-interp"))
    assert code == 0 and len(results) == 2
    assert (tmp_path / "regular-point" / "summary.json").exists()
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert set(doc["experiments"]) == {"regular-point", "linf-interp"}


def test_precondition_error_maps_to_exit_two(small_cfg, tmp_path):
    res = run_experiment(small_cfg.with_overrides(experiment="regular-point", potential="zero"), tmp_path)
    assert res.exit_code == 2
    assert res.error["type"] == "PreconditionError"
    assert "ERROR" in (tmp_path / "verification_matrix.txt").read_text()


def test_cli_exit_codes(cfg_file, tmp_path, capsys):
    assert cli.main(["regular-point", "--config", str(cfg_file), "--out", str(tmp_path / "o")]) == 0
    assert "regular-point: PASS" in capsys.readouterr().out
    assert cli.main(["regular-point", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("p = 1.5\nim_lambda = 1\n")
    assert cli.main(["decay", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "p must exceed 2" in err and "Imλ ≤ 0" in err
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-kind"])
    assert exc.value.code == 2


def test_plot_data_on_empty_directory(tmp_path):
    with pytest.warns(UserWarning, match="nothing written"):
        written, skipped = emit_plot_data(tmp_path)
    assert written == [] and skipped == []
    with pytest.warns(UserWarning, match="does not exist"):
        emit_plot_data(tmp_path / "absent")


def test_plot_data_from_reports(small_cfg, tmp_path):
    run_experiment(small_cfg.with_overrides(experiment="simulate"), tmp_path / "simulate")
    run_experiment(small_cfg.with_overrides(experiment="linf-interp"), tmp_path / "linf-interp")
    written, skipped = emit_plot_data(tmp_path)
    names = {p.name for p in written}
    assert "simulate_decay_loglog.dat" in names
    decay = (tmp_path / "plot_data" / "simulate_decay_loglog.dat").read_text().split("\n")
    xs = [float(ln.split()[0]) for ln in decay if ln]
    assert xs == sorted(xs) and len(set(xs)) == len(xs)
    surveys = sorted((tmp_path / "linf-interp").glob("*.csv"))
    survey_csvs = [p for p in surveys if p.read_text().splitlines()[1] == "sample_id,x,ratio"]
    assert survey_csvs
    assert sum(n.startswith("linf-interp_") for n in names) == len(survey_csvs)
