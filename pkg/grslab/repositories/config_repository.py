"""
Run config files: flat `key = value` text with section prefixes.

    # comment
    model.spec = sphere:n=2,r=1
    grid.res = 16x32, 32x64
    basis.L = 2
    run.seed = 7
    out.json = report.json
    out.csv = spectrum.csv
    tol.closed_form = 1e-9
"""
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from grslab.config import settings
from grslab.core.exceptions import ConfigParseError, ConfigValueError
from grslab.core.logging_config import get_logger
from grslab.schemas.config import GridResolution, ModelSpec, RunConfig, ToleranceTable

logger = get_logger(__name__)

KNOWN_KEYS = ("model.spec", "grid.res", "basis.L", "run.seed", "out.json", "out.csv")
TOLERANCE_PREFIX = "tol."


def parse_resolutions(text: str) -> list[GridResolution]:
    return [GridResolution.parse(item) for item in text.split(",") if item.strip()]


def _integer(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigParseError(f"'{key}' expects an integer, got '{value}'", {"key": key})


class ConfigRepository:
    """Reads run config files and merges them with command-line overrides."""

    def parse_text(self, text: str, source: str = "<string>") -> dict[str, str]:
        entries: dict[str, str] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigParseError(f"{source}:{number}: expected 'key = value'", {"line": raw})
            if key not in KNOWN_KEYS and not key.startswith(TOLERANCE_PREFIX):
                raise ConfigParseError(f"{source}:{number}: unknown key '{key}'", {"key": key})
            entries[key] = value
        return entries

    def read(self, path: Path) -> dict[str, str]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"Cannot read config file '{path}'", {"reason": str(exc)}) from exc
        entries = self.parse_text(text, str(path))
        logger.debug("config_file_read", path=str(path), keys=sorted(entries))
        return entries

    def build(self, entries: dict[str, str], overrides: dict[str, Any] | None = None) -> RunConfig:
        """RunConfig from file entries; non-None overrides (model, res, L, seed, out) win."""
        merged = dict(entries)
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = str(value)
        if "model.spec" not in merged:
            raise ConfigValueError("model.spec", "a model is required (config file or --model)")

        tolerances: dict[str, float] = {}
        for key, value in merged.items():
            if key.startswith(TOLERANCE_PREFIX):
                try:
                    tolerances[key[len(TOLERANCE_PREFIX):]] = float(value)
                except ValueError:
                    raise ConfigParseError(f"'{key}' expects a number, got '{value}'", {"key": key})

        try:
            return RunConfig(
                model=ModelSpec.parse(merged["model.spec"]),
                resolutions=parse_resolutions(merged.get("grid.res", "")),
                degree=_integer("basis.L", merged["basis.L"]) if "basis.L" in merged else None,
                seed=_integer("run.seed", merged["run.seed"]) if "run.seed" in merged else settings.DEFAULT_SEED,
                tolerances=ToleranceTable.from_settings(tolerances),
                out_json=Path(merged["out.json"]) if merged.get("out.json") else None,
                out_csv=Path(merged["out.csv"]) if merged.get("out.csv") else None,
            )
        except ValidationError as exc:
            error = exc.errors()[0]
            field = ".".join(str(part) for part in error["loc"]) or "config"
            raise ConfigValueError(field, error["msg"]) from exc

    def load(self, path: Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
        entries = self.read(path) if path is not None else {}
        return self.build(entries, overrides)


def get_config_repository() -> ConfigRepository:
    return ConfigRepository()
