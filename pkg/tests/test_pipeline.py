"""End-to-end runs of the staged driver and the command line."""
import os
import sys

import pytest
import yaml

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import run
from topology.errors import InputError
from z2forms.flatmodel import DEGENERATE_A
from z2forms.pipeline import FAILURE, SUCCESS, PipelineConfig, run_pipeline

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data", "s2_two_points")


def load_config(name):
    with open(os.path.join(ROOT, "configs", name + ".yaml")) as f:
        return PipelineConfig.from_dict(yaml.load(f, Loader=yaml.FullLoader))


def test_config_validation():
    with pytest.raises(InputError):
        PipelineConfig(preset="pillowcase", tol=-1.0)
    with pytest.raises(InputError):
        PipelineConfig(complex_path=os.path.join(DATA, "complex.json"))
    with pytest.raises(InputError):
        PipelineConfig.from_dict({"input_config": {"preset": "pillowcase"}, "hodge_config": {"tolerance": 1.0}})


def test_config_sections_flatten():
    config = load_config("star_tree")
    assert config.preset == "star_tree"
    assert config.symbolic_tiebreak
    assert config.prune
    assert config.pair_labels() is None
    assert PipelineConfig(preset="star_tree", pair="1,2").pair_labels() == ("S1", "S2")


def test_hopf_link_is_obstructed():
    report = run_pipeline(PipelineConfig(preset="s3_hopf"))
    assert report.stages["cover"].status == SUCCESS
    assert report.stages["obstruction"].status == FAILURE
    assert report.verdicts["obstruction"] is False
    assert report.exit_code == 5
    assert "harmonic" not in report.stages


def test_malformed_complex_file():
    config = PipelineConfig(complex_path=os.path.join(DATA, "malformed.json"),
                            locus_path=os.path.join(DATA, "locus.json"))
    report = run_pipeline(config)
    assert report.stages["cover"].status == FAILURE
    assert report.exit_code == 2


def test_pillowcase_report(tmp_path):
    report = run_pipeline(load_config("pillowcase"), str(tmp_path))
    assert report.exit_code == 0
    assert report.verdicts["obstruction"]
    assert report.verdicts["tree"]
    assert report.verdicts["commensurable"] is True
    assert report.stages["fit"].status == SUCCESS
    assert set(report.verdicts["nondegeneracy"].values()) == {DEGENERATE_A}
    for name in ("report.json", "timings.json", "leaf_graph.json", "leaf_graph.dot", "coefficients.txt"):
        assert (tmp_path / name).exists()


def test_reports_are_deterministic(tmp_path):
    texts = []
    for name in ("first", "second"):
        out = tmp_path / name
        out.mkdir()
        run_pipeline(load_config("pillowcase"), str(out))
        texts.append((out / "report.json").read_text())
    assert texts[0] == texts[1]


def test_until_stops_after_the_stage():
    report = run_pipeline(PipelineConfig(preset="flat_torus"), until="harmonic")
    assert list(report.stages) == ["cover", "obstruction", "harmonic"]
    assert report.exit_code == 0


def test_command_line(tmp_path, capsys):
    assert run.main(["presets"]) == 0
    assert "pillowcase" in capsys.readouterr().out.split()
    assert run.main(["--out", str(tmp_path), "cover", "--preset", "s3_hopf"]) == 5
    assert run.main(["--out", str(tmp_path), "cover"]) == 3


def test_unknown_preset_is_a_precondition_failure():
    report = run_pipeline(PipelineConfig(preset="no_such_preset"))
    assert report.stages["cover"].status == FAILURE
    assert report.exit_code == 3


def test_star_tree_prunes_end_to_end(tmp_path):
    report = run_pipeline(load_config("star_tree"), str(tmp_path))
    assert report.stages["cover"].status == SUCCESS
    assert "fit" not in report.stages
    assert report.stages["prune"].status == SUCCESS
    assert report.stages["prune"].data["pair"] == ["S1", "S2"]
    assert report.verdicts["pruned_interval"]
    assert report.exit_code == 0
    assert (tmp_path / "prune.json").exists()


def test_lens_space_without_locus_is_obstructed():
    report = run_pipeline(load_config("lens_space_21"))
    assert report.stages["obstruction"].status == FAILURE
    assert report.stages["obstruction"].data == {}
    assert report.exit_code == 5
