import pytest
from pydantic import ValidationError

from grslab.config import Settings
from grslab.core.exceptions import EXIT_CONFIG, ConfigParseError, UnknownModelError
from grslab.schemas.common import ModelKind
from grslab.schemas.config import GridResolution, ModelSpec, RunConfig, ToleranceTable


class TestModelSpec:
    @pytest.mark.parametrize(
        "text, kind, family, params",
        [
            ("sphere:n=2,r=1", ModelKind.SPHERE, "sphere", {"n": 2, "r": 1.0}),
            ("sphere:n=3", ModelKind.SPHERE, "sphere", {"n": 3, "r": 1.0}),
            ("product:n1=2,r1=1,n2=2,r2=1", ModelKind.PRODUCT, "product", {"n1": 2, "r1": 1.0, "n2": 2, "r2": 1.0}),
            ("generic:ellipsoid,c=1.5", ModelKind.GENERIC, "ellipsoid",
             {"a": 1.0, "b": 1.0, "c": 1.5, "f": 0.3, "tau": 0.5}),
            ("generic:round", ModelKind.GENERIC, "round", {"n": 2, "r": 1.0}),
        ],
    )
    def test_parse(self, text, kind, family, params):
        spec = ModelSpec.parse(text)
        assert spec.kind == kind
        assert spec.family == family
        assert spec.params == params

    def test_text_round_trips_through_parse(self):
        for text in ("sphere:n=2,r=1", "generic:ellipsoid,a=1,b=1,c=1.2,f=0.3,tau=0.5"):
            assert ModelSpec.parse(ModelSpec.parse(text).text()) == ModelSpec.parse(text)

    @pytest.mark.parametrize("text", ["torus:n=2", "generic:sphere", "generic:", "ellipsoid:c=1", "sphere2"])
    def test_unknown_models(self, text):
        with pytest.raises(UnknownModelError) as excinfo:
            ModelSpec.parse(text)
        assert excinfo.value.exit_code == EXIT_CONFIG

    @pytest.mark.parametrize("text", ["sphere:n=two", "sphere:n", "sphere:n=2.5", "sphere:r=-1", "sphere:q=1"])
    def test_malformed_parameters(self, text):
        with pytest.raises(ConfigParseError) as excinfo:
            ModelSpec.parse(text)
        assert excinfo.value.error_code == "CONFIG_PARSE_ERROR"


class TestGridResolution:
    def test_parse_and_text(self):
        resolution = GridResolution.parse("32x64")
        assert (resolution.polar, resolution.periodic) == (32, 64)
        assert resolution.text() == "32x64"
        assert resolution.refined().text() == "64x128"

    def test_periodic_defaults_to_twice_polar(self):
        assert GridResolution.parse("12").periodic == 24

    @pytest.mark.parametrize("text", ["axb", "0x8", "32x"])
    def test_malformed(self, text):
        with pytest.raises(ConfigParseError):
            GridResolution.parse(text)


class TestTolerances:
    def test_defaults_come_from_settings(self):
        table = ToleranceTable.from_settings()
        assert table.closed_form == 1e-8
        assert table.finite_difference == 1e-4
        assert table.relation == 1e-5
        assert table.identity(finite_difference=True) == 1e-4
        assert table.identity(finite_difference=False) == 1e-8

    def test_overrides_and_validation(self):
        assert ToleranceTable.from_settings({"spectrum": 1e-7}).spectrum == 1e-7
        with pytest.raises(ValidationError):
            ToleranceTable.from_settings({"spectrum": -1.0})
        with pytest.raises(ValidationError):
            ToleranceTable.from_settings({"no_such_tolerance": 1.0})

    def test_environment_overrides_settings(self, monkeypatch):
        monkeypatch.setenv("TOL_CLOSED_FORM", "1e-9")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        fresh = Settings()
        assert fresh.TOL_CLOSED_FORM == 1e-9
        assert fresh.LOG_LEVEL == "DEBUG"

    @pytest.mark.parametrize("name, value", [("LOG_FORMAT", "xml"), ("ENVIRONMENT", "staging"), ("FD_COLLAR", "0.5")])
    def test_bad_environment_values_are_rejected(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValidationError):
            Settings()

    def test_choices_are_normalized(self, monkeypatch):
        monkeypatch.setenv("LOG_FORMAT", " JSON")
        monkeypatch.setenv("ENVIRONMENT", "CI")
        fresh = Settings()
        assert (fresh.LOG_FORMAT, fresh.ENVIRONMENT) == ("json", "ci")


def test_run_config_rejects_duplicate_resolutions():
    with pytest.raises(ValidationError):
        RunConfig(model=ModelSpec.parse("sphere:n=2"),
                  resolutions=[GridResolution.parse("8x16"), GridResolution.parse("8x16")])


def test_run_config_echo():
    config = RunConfig(model=ModelSpec.parse("sphere:n=2"), resolutions=[GridResolution.parse("16x32")], degree=2,
                       seed=5)
    echo = config.echo()
    assert echo["model"] == "sphere:n=2,r=1"
    assert echo["resolutions"] == ["16x32"]
    assert echo["degree"] == 2
    assert echo["seed"] == 5
    assert echo["tolerances"]["closed_form"] == 1e-8
