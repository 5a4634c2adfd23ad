"""Shared plumbing of the CLI subcommands: model, grid and report assembly."""
from dataclasses import dataclass
from typing import Any

from grslab.config import settings
from grslab.models.manifold import ManifoldModel
from grslab.models.quadrature import QuadratureGrid
from grslab.schemas.common import CheckStatus, CurvatureSource
from grslab.schemas.config import GridResolution, RunConfig
from grslab.schemas.reports import RunReport
from grslab.services.model_manifolds import ModelService, get_model_service


@dataclass
class RunSetup:
    """Model and grid of one run; `resolution` is the finest requested resolution."""

    config: RunConfig
    models: ModelService
    model: ManifoldModel
    resolution: GridResolution
    grid: QuadratureGrid

    @property
    def finite_difference(self) -> bool:
        return self.model.curvature_source == CurvatureSource.FINITE_DIFFERENCE

    @property
    def degree(self) -> int:
        return self.config.degree if self.config.degree is not None else self.models.default_degree(self.model)


def finest(resolutions: list[GridResolution]) -> GridResolution:
    return max(resolutions, key=lambda r: (r.polar * r.periodic, r.polar))


def prepare_run(config: RunConfig, galerkin: bool = False) -> RunSetup:
    """Build the model and its grid at the finest resolution; Galerkin runs also check aliasing at degree L."""
    models = get_model_service(config.tolerances)
    requested = finest(config.resolutions) if config.resolutions else None
    model = models.build_from_spec(config.model, resolution=requested)
    resolution = requested or models.default_resolution(model)
    degree = config.degree if config.degree is not None else models.default_degree(model)
    grid = models.quadrature_grid(model, resolution, degree=max(degree, 1) if galerkin else None)
    return RunSetup(config=config, models=models, model=model, resolution=resolution, grid=grid)


def build_run_report(setup: RunSetup, results: list[dict[str, Any]], grids: list[QuadratureGrid] | None = None,
                     verdict: str | None = None) -> RunReport:
    return RunReport(
        tool_version=settings.TOOL_VERSION,
        config_echo=setup.config.echo(),
        model=setup.model.describe(),
        grid=[grid.describe() for grid in (grids or [setup.grid])],
        results=results,
        verdict=verdict,
    )


def has_failures(results: list[dict[str, Any]]) -> bool:
    """True if any nested `status` field in the result dicts is `failed`."""
    def walk(node) -> bool:
        if isinstance(node, dict):
            if node.get("status") == CheckStatus.FAILED.value:
                return True
            return any(walk(value) for value in node.values())
        if isinstance(node, list):
            return any(walk(value) for value in node)
        return False

    return walk(results)
