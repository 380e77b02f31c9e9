import json

import pytest

from skelmatch.cli import main
from skelmatch.config import load_config
from skelmatch.errors import ConfigError
from skelmatch.pyramid import save_pyramid_dir
from skelmatch.tensorio import write_tensor

from conftest import consistent_pyramid, ntu_text, random_fmap


@pytest.fixture
def synth(tmp_path):
    out = tmp_path / "syn"
    assert main(["synth", str(out), "--classes", "4", "--per-class", "4", "--channels", "6", "--frames", "8"]) == 0
    return out


def test_convert(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    (src / "S001C001P001R001A002.skeleton").write_text(ntu_text(n_frames=6))
    assert main(["convert", str(src), "--out", str(tmp_path / "out"), "--frames", "8"]) == 0
    doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert doc["entries"] == [{"id": "S001C001P001R001A002", "label": 2, "path": "S001C001P001R001A002.stsk"}]
    assert (tmp_path / "out" / "S001C001P001R001A002.stsk").exists()


def test_convert_empty_dir(tmp_path):
    (tmp_path / "in").mkdir()
    assert main(["convert", str(tmp_path / "in"), "--out", str(tmp_path / "out")]) == 0
    assert json.loads((tmp_path / "out" / "manifest.json").read_text()) == {"entries": []}


def test_convert_partial_failure(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    for k in range(3):
        (src / f"S001C001P001R001A00{k + 1}.skeleton").write_text(ntu_text(n_frames=4, seed=k))
    bad = src / "S001C001P001R001A002.skeleton"
    bad.write_text("3\n1\nbroken")
    code = main(["convert", str(src), "--out", str(tmp_path / "out"), "--frames", "4"])
    assert code == 1
    assert len(json.loads((tmp_path / "out" / "manifest.json").read_text())["entries"]) == 2
    assert "S001C001P001R001A002.skeleton" in capsys.readouterr().err


def test_match_self_and_mc(tmp_path, capsys):
    p = tmp_path / "a.skeleton"
    p.write_text(ntu_text(n_frames=8))
    base = ["match", str(p), str(p), "--strategy", "S", "--frames", "8"]
    assert main(base + ["--solver", "exact", "--exact-limit", "40000"]) == 0
    # centred spine-base joints are zero vectors: cost 1 on their floor mass, 25*8 nodes of which 8 are zero
    assert abs(json.loads(capsys.readouterr().out)["total"] - 1.0) < 8 * 2e-6
    assert main(base + ["--solver", "exact"]) == 4
    write_tensor(random_fmap(C=3, T=8), tmp_path / "a.stsk")
    a = str(tmp_path / "a.stsk")
    assert main(["match", a, a, "--strategy", "S", "--solver", "exact", "--exact-limit", "40000"]) == 0
    assert abs(json.loads(capsys.readouterr().out)["total"] - 1.0) < 1e-9
    d = tmp_path / "pyr"
    save_pyramid_dir(consistent_pyramid(C=4, T=8), d)
    assert main(["match", str(d), str(d), "--strategy", "MC", "--solver", "exact", "--exact-limit", "40000"]) == 0
    assert abs(json.loads(capsys.readouterr().out)["total"] - 4.5) < 1e-9


def test_match_exit_codes(tmp_path):
    write_tensor(random_fmap(C=3), tmp_path / "a.stsk")
    write_tensor(random_fmap(C=4), tmp_path / "b.stsk")
    assert main(["match", str(tmp_path / "a.stsk"), str(tmp_path / "b.stsk")]) == 3
    assert main(["match", str(tmp_path / "nope.stsk"), str(tmp_path / "b.stsk")]) == 2
    (tmp_path / "c.stsk").write_bytes(b"junk")
    assert main(["match", str(tmp_path / "c.stsk"), str(tmp_path / "b.stsk")]) == 2


def test_match_solver_failure_exit_4(tmp_path, monkeypatch):
    from skelmatch import ot
    from skelmatch.errors import SolverError

    def boom(*a, **k):
        raise SolverError("forced", "no-convergence")

    monkeypatch.setattr(ot, "solve", boom)
    write_tensor(random_fmap(C=3), tmp_path / "a.stsk")
    assert main(["match", str(tmp_path / "a.stsk"), str(tmp_path / "a.stsk"), "--strategy", "S"]) == 4


def test_splits(capsys):
    assert main(["splits", "ntu120"]) == 0
    assert len(json.loads(capsys.readouterr().out)["test_classes"]) == 20
    assert main(["splits", "ntu60"]) == 0
    assert len(json.loads(capsys.readouterr().out)["exemplar_ids"]) == 10
    assert main(["splits", "bogus"]) == 2
    assert "ntu120" in capsys.readouterr().err
    assert main(["splits", "ntu120", "--reduced", "20,40", "--seed", "1"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 2


def test_eval_protocol1_and_rerun(synth, tmp_path, capsys):
    args = ["eval", "--manifest", str(synth / "manifest.json"), "--split", str(synth / "split.json"),
            "--protocol", "1", "--episodes", "10", "--seed", "5", "--n-way", "3", "--n-query", "2"]
    assert main(args + ["--out", str(tmp_path / "r1")]) == 0
    assert "accuracy" in capsys.readouterr().out
    rep = json.loads((tmp_path / "r1" / "report_p1_MC.json").read_text())
    assert len(rep["episodes"]) == 10
    assert rep["config"]["seed"] == 5
    first = (tmp_path / "r1" / "report_p1_MC.json").read_bytes()
    assert main(args + ["--out", str(tmp_path / "r1")]) == 0
    assert (tmp_path / "r1" / "report_p1_MC.json").read_bytes() == first
    assert (tmp_path / "r1" / "report_p1_MC.csv").read_text().startswith("strategy,protocol")


def test_eval_config_file_and_override(synth, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f'manifest = "{synth / "manifest.json"}"\nsplit = "{synth / "split.json"}"\n'
        f'protocol = 2\nstrategy = "M"\nout = "rep"\n[solver]\nsolver = "auto"\nepsilon = 0.05\n'
    )
    assert main(["eval", "--config", str(cfg), "--strategy", "S"]) == 0
    rep = json.loads((tmp_path / "rep" / "report_p2_S.json").read_text())
    assert rep["config"]["strategy"] == "S" and rep["protocol"] == 2


def test_eval_protocol2_without_exemplars(synth, tmp_path, capsys):
    doc = json.loads((synth / "split.json").read_text())
    doc["exemplar_ids"] = None
    (tmp_path / "s.json").write_text(json.dumps(doc))
    code = main(["eval", "--manifest", str(synth / "manifest.json"), "--split", str(tmp_path / "s.json"),
                 "--protocol", "2", "--out", str(tmp_path / "r")])
    assert code == 3
    assert "config-invalid" in capsys.readouterr().err


def test_eval_unknown_split(synth, tmp_path):
    assert main(["eval", "--manifest", str(synth / "manifest.json"), "--split", "nope",
                 "--out", str(tmp_path)]) == 2


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError) as ei:
        load_config(None, {"frames": 30}).validate(check_paths=False)
    assert "frames" in str(ei.value)
    with pytest.raises(ConfigError) as ei:
        load_config(None, {"epsilon": 0.0}).validate(check_paths=False)
    assert "epsilon" in str(ei.value)
    with pytest.raises(ConfigError) as ei:
        load_config(None, {"manifest": str(tmp_path / "none.json"), "split": "ntu60"}).validate()
    assert "manifest" in str(ei.value)
    (tmp_path / "c.toml").write_text("colour = 1\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.toml")
    (tmp_path / "c.toml").write_text("episodes = 'many'\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.toml")
