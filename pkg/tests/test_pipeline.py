import json
import math

import pytest
from pydantic import ValidationError

from src.errors import InputError
from src.orlicz import OrliczFunction, pareto_p_orlicz
from src.pipeline import build_config, resolve_distribution, resolve_orlicz, run
from src.schemas import RunConfig


def test_norm_command_writes_summary(tmp_path):
    res = run(build_config({"command": "norm", "orlicz": "power:2", "vector": [3, 4], "out_dir": str(tmp_path)}))
    assert res.exit_code == 0
    assert res.summary["norm"] == pytest.approx(5.0)
    assert json.loads((tmp_path / "norm.json").read_text())["norm"] == pytest.approx(5.0)


def test_config_json_reproduces_the_run(tmp_path):
    cfg = build_config({"command": "norm", "orlicz": "linearized:1.7", "vector": [1, 2], "out_dir": str(tmp_path)})
    res = run(cfg)
    again = RunConfig.model_validate(json.loads((tmp_path / "config.json").read_text()))
    assert again == cfg
    assert run(again).summary == res.summary


def test_make_dist_reports_atom(tmp_path):
    cfg = build_config({"command": "make-dist", "orlicz": "linearized:1.5", "p": 2, "out_dir": str(tmp_path)})
    res = run(cfg)
    assert res.exit_code == 0
    (loc, mass), = res.summary["atoms"]
    assert loc == pytest.approx(2.0 ** (-2.0 / 3.0))
    assert mass == pytest.approx(0.75, rel=1e-9)
    assert (tmp_path / "survival.csv").exists()
    assert (tmp_path / "distribution.json").exists()


def test_make_dist_samples_are_byte_identical(tmp_path):
    base = {"command": "make-dist", "orlicz": "linearized:1.7", "p": 3, "samples": 500, "mc": {"seed": 9}}
    run(build_config(base, {"out_dir": str(tmp_path / "a")}))
    run(build_config(base, {"out_dir": str(tmp_path / "b")}))
    for name in ("samples.csv", "survival.csv", "summary.json", "distribution.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_make_orlicz_from_pareto(tmp_path):
    cfg = build_config({"command": "make-orlicz", "distribution": "pareto:1.5", "map": "pnorm", "p": 3,
                        "out_dir": str(tmp_path)})
    res = run(cfg)
    assert res.exit_code == 0
    M = OrliczFunction.from_spec(json.loads((tmp_path / "orlicz.json").read_text()))
    assert M(0.7) == pytest.approx(pareto_p_orlicz(3.0, 1.5)(0.7), rel=1e-9)
    assert res.summary["normalized"] is True


def test_conditions_exit_codes(tmp_path):
    ok = run(build_config({"command": "conditions", "orlicz": "power:1.7", "q": 1.5, "out_dir": str(tmp_path / "ok")}))
    assert ok.exit_code == 0
    assert ok.summary["C"] == pytest.approx(5.0, rel=1e-9)
    assert (tmp_path / "ok" / "integral_curve.csv").exists()
    assert ok.summary["qpower_coefficient"] == pytest.approx(5.25, rel=1e-9)
    saved = json.loads((tmp_path / "ok" / "conditions.json").read_text())
    assert saved["qpower_bound"]["passed"] is True
    assert saved["qpower_bound"]["constants"]["max_ratio"] == pytest.approx(5.25, rel=1e-9)
    bad = run(build_config({"command": "conditions", "orlicz": "power:1.5", "q": 1.5, "out_dir": str(tmp_path / "bad")}))
    assert bad.exit_code == 1
    assert "qpower_coefficient" not in bad.summary
    assert "qpower_bound" not in json.loads((tmp_path / "bad" / "conditions.json").read_text())


def test_roundtrip_command(tmp_path):
    res = run(build_config({"command": "roundtrip", "orlicz": "linearized:1.7", "p": 2, "q": 1.5,
                            "out_dir": str(tmp_path)}))
    assert res.exit_code == 0
    assert res.summary == {"roundtrip": True, "qpower": True, "passed": True}


def test_roundtrip_command_rebuilds_a_density(tmp_path):
    res = run(build_config({"command": "roundtrip", "orlicz": "linearized:1.7", "p": 3, "distribution": "uniform:0.5,2",
                            "out_dir": str(tmp_path)}))
    assert res.summary["density"] is True
    saved = json.loads((tmp_path / "roundtrip.json").read_text())
    assert saved["density"]["max_rel_err"] <= 1e-6
    assert saved["density"]["mass"] == pytest.approx(1.0, abs=1e-6)


def test_verify_needs_seed():
    with pytest.raises(ValidationError):
        build_config({"command": "verify", "theorem": "max", "distribution": "uniform"})


def test_verify_max_theorem(tmp_path):
    cfg = build_config({
        "command": "verify", "theorem": "max", "distribution": "pareto:2.5", "n_list": [4, 16],
        "mc": {"seed": 1, "replicates": 3000}, "out_dir": str(tmp_path),
    })
    res = run(cfg)
    assert res.exit_code == 0
    lines = (tmp_path / "ratios.csv").read_text().splitlines()
    assert lines[0] == "n,estimate,dispersion,predicted,ratio"
    assert len(lines) == 3


def test_verify_reports_missing_inputs(tmp_path):
    cfg = build_config({"command": "verify", "theorem": "pnorm", "distribution": "uniform",
                        "mc": {"seed": 1}, "out_dir": str(tmp_path)})
    with pytest.raises(InputError):
        run(cfg)


def test_config_validation():
    with pytest.raises(ValidationError):
        build_config({"command": "norm", "p": 2, "q": 3})
    with pytest.raises(ValidationError):
        build_config({"command": "frobnicate"})
    assert build_config({"command": "norm", "p": "inf"}).p == math.inf


def test_overrides_merge_nested_sections():
    cfg = build_config({"command": "verify", "theorem": "max", "mc": {"seed": 3, "replicates": 10}},
                       {"mc": {"replicates": 20}, "q": None})
    assert cfg.mc.seed == 3 and cfg.mc.replicates == 20


def test_shorthand_resolution(tmp_path):
    assert resolve_orlicz("power:2")(3.0) == pytest.approx(9.0)
    assert resolve_orlicz("pareto-p:inf,1.5").linear_tail
    assert resolve_distribution("uniform:0,2").hi == 2.0
    d = resolve_distribution("orlicz:linearized:1.5@2")
    assert d.atoms[0][1] == pytest.approx(0.75, rel=1e-9)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(resolve_orlicz("linearized:1.7").to_spec().model_dump(mode="json")))
    assert resolve_orlicz(str(path)).kink == pytest.approx(resolve_orlicz("linearized:1.7").kink)
    spec = {"kind": "from_orlicz", "params": {"orlicz": "linearized:1.5", "p": 2}}
    assert resolve_distribution(spec).atoms[0][1] == pytest.approx(0.75, rel=1e-9)
    with pytest.raises(InputError):
        resolve_orlicz("banana:3")
    with pytest.raises(InputError):
        resolve_distribution("pareto:x")
