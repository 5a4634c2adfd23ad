import csv

import orjson
import pytest

from grslab.core.exceptions import EXIT_BUILD, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK
from grslab.main import build_parser, main, overrides_from


def error_payload(stderr: str) -> dict:
    lines = [line for line in stderr.splitlines() if line.startswith('{"error"')]
    return orjson.loads(lines[-1])


def run_json(argv: list[str], path) -> tuple[int, dict]:
    code = main(argv + ["--out", str(path)])
    return code, orjson.loads(path.read_bytes())


def test_parser_maps_flags_to_config_keys():
    args = build_parser().parse_args(["spectrum", "--model", "sphere:n=2", "--res", "16x32", "--L", "2",
                                      "--seed", "3"])
    assert args.command == "spectrum"
    assert overrides_from(args) == {
        "model.spec": "sphere:n=2",
        "grid.res": "16x32",
        "basis.L": 2,
        "run.seed": 3,
        "out.json": None,
    }


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_verify_round_sphere(tmp_path):
    code, report = run_json(["verify", "--model", "sphere:n=2,r=1", "--res", "16x32,32x64", "--seed", "1"],
                            tmp_path / "verify.json")
    assert code == EXIT_OK
    assert report["tool_version"] == "1.0.0"
    assert report["config_echo"]["model"] == "sphere:n=2,r=1"
    kinds = [result["kind"] for result in report["results"]]
    assert kinds[0] == "entropy"
    assert "convergence" in kinds
    entropy = report["results"][0]
    assert entropy["w_entropy"] == pytest.approx(-0.306852819440, abs=1e-10)
    suites = {result["suite"] for result in report["results"] if result["kind"] == "identities"}
    assert suites == {"entropy", "conventions", "useful_identities", "commutators", "image_kernel",
                      "weighted_structure"}
    kernel = next(result for result in report["results"] if result.get("suite") == "image_kernel")
    assert {entry["status"] for entry in kernel["entries"]} == {"passed"}
    studies = {result["quantity"]: result for result in report["results"] if result["kind"] == "convergence"}
    assert set(studies) == {"mass_defect", "divergence_theorem"}
    assert [row["resolution"] for row in studies["divergence_theorem"]["rows"]] == ["16x32", "32x64"]
    assert studies["divergence_theorem"]["status"] == "passed"


def test_verify_writes_json_to_stdout(capsys):
    assert main(["verify", "--model", "sphere:n=2", "--res", "16x32", "--seed", "2"]) == EXIT_OK
    report = orjson.loads(capsys.readouterr().out)
    assert report["verdict"] is None
    assert report["grid"][0]["resolution"] == [16, 32]


def test_malformed_model_is_a_config_error(capsys):
    assert main(["verify", "--model", "sphere:n=two"]) == EXIT_CONFIG
    payload = error_payload(capsys.readouterr().err)
    assert payload["error"]["code"] == "CONFIG_PARSE_ERROR"


def test_unsupported_dimension_is_a_build_error(capsys):
    assert main(["spectrum", "--model", "sphere:n=5"]) == EXIT_BUILD
    payload = error_payload(capsys.readouterr().err)
    assert payload["error"]["code"].startswith("BUILD_")
    assert payload["error"]["details"]["n"] == 5


def test_aliasing_grid_is_a_config_error(capsys):
    assert main(["spectrum", "--model", "sphere:n=2", "--res", "8x16", "--L", "4"]) == EXIT_CONFIG
    assert error_payload(capsys.readouterr().err)["error"]["code"] == "CONFIG_ALIASING"


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("model.spec = sphere:n=3\ngrid.res = 16x32\nbasis.L = 1\n", encoding="utf-8")
    code, report = run_json(["spectrum", "--config", str(config), "--model", "sphere:n=2"], tmp_path / "s.json")
    assert code == EXIT_OK
    assert report["config_echo"]["model"] == "sphere:n=2,r=1"
    assert report["config_echo"]["degree"] == 1


def test_spectrum_outputs_are_reproducible(tmp_path):
    argv = ["spectrum", "--model", "sphere:n=2,r=1", "--res", "16x32", "--L", "2", "--seed", "5"]
    assert main(argv + ["--out", str(tmp_path / "a.json")]) == EXIT_OK
    assert main(argv + ["--out", str(tmp_path / "b.json")]) == EXIT_OK
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    with open(tmp_path / "a.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["index", "eigenvalue", "residual", "tags"]
    assert [row[0] for row in rows[1:]] == [str(k) for k in range(len(rows) - 1)]

    report = orjson.loads((tmp_path / "a.json").read_bytes())
    gap = next(result for result in report["results"] if result["kind"] == "spectral_gap")
    assert gap["lambda_1"] == pytest.approx(-2.0, abs=1e-9)
    scalar = report["results"][0]
    assert scalar["multiplicities"] == [
        {"eigenvalue": pytest.approx(0.0, abs=1e-9), "multiplicity": 1},
        {"eigenvalue": pytest.approx(-2.0, abs=1e-9), "multiplicity": 3},
        {"eigenvalue": pytest.approx(-6.0, abs=1e-9), "multiplicity": 5},
    ]


def test_stability_round_three_sphere(tmp_path):
    code, report = run_json(["stability", "--model", "sphere:n=3", "--L", "1"], tmp_path / "stab.json")
    assert code == EXIT_OK
    assert report["verdict"] == "stable (sufficient, L=1)"


@pytest.mark.slow
def test_stability_product_of_spheres(tmp_path):
    code, report = run_json(["stability", "--model", "product:n1=2,r1=1,n2=2,r2=1", "--L", "1"],
                            tmp_path / "stab.json")
    assert code == EXIT_OK
    assert report["verdict"] == "unstable"
    witness = report["results"][0]["witness"]
    assert witness["second_variation"] == pytest.approx(4.0, abs=1e-6)


def test_stability_refuses_approximate_models(capsys):
    code = main(["stability", "--model", "generic:round", "--res", "16x32", "--L", "1"])
    assert code == EXIT_FAILURE
    payload = error_payload(capsys.readouterr().err)
    assert payload["error"]["code"] == "ANALYSIS_APPROXIMATE_SOLITON"


@pytest.mark.slow
def test_verify_ellipsoid_reports_stencil_convergence(tmp_path):
    code, report = run_json(["verify", "--model", "generic:ellipsoid", "--res", "64x128"], tmp_path / "verify.json")
    assert code == EXIT_OK
    kernel = next(result for result in report["results"] if result.get("suite") == "image_kernel")
    assert {entry["status"] for entry in kernel["entries"]} == {"skipped"}
    studies = {result["quantity"]: result for result in report["results"] if result["kind"] == "convergence"}
    assert set(studies) == {"general_identities", "riemann"}
    for study in studies.values():
        assert study["status"] == "passed"
        assert study["min_order"] >= 1.8
        assert [row["resolution"] for row in study["rows"]] == ["32", "64"]
    assert studies["general_identities"]["rows"][-1]["error"] < 1e-4


@pytest.mark.slow
def test_stability_round_two_sphere_at_degree_two(tmp_path):
    code, report = run_json(["stability", "--model", "sphere:n=2", "--L", "2"], tmp_path / "stab.json")
    assert code == EXIT_OK
    assert report["verdict"] == "stable (sufficient, L=2)"
    stability = report["results"][0]
    assert stability["relation"]
    for row in stability["relation"]:
        assert row["status"] == "passed"
        assert row["relation_residual"] < 1e-10
    assert stability["sufficient"]["status"] == "passed"


@pytest.mark.slow
def test_spectrum_product_of_spheres_has_two_lichnerowicz_zero_modes(tmp_path):
    code, report = run_json(["spectrum", "--model", "product:n1=2,r1=1,n2=2,r2=1", "--L", "1"],
                            tmp_path / "spectrum.json")
    assert code == EXIT_OK
    tensor = report["results"][1]
    assert tensor["zero_multiplicity"] == 2
    assert tensor["multiplicities"][0] == {"eigenvalue": pytest.approx(0.0, abs=1e-8), "multiplicity": 2}
