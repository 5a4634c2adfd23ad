"""`grslab spectrum`: drift-Laplacian and Lichnerowicz spectra, gap check and commutation trend."""
import numpy as np

from grslab.commands.base import build_run_report, has_failures, prepare_run
from grslab.core.exceptions import EXIT_FAILURE, EXIT_OK
from grslab.core.logging_config import get_logger
from grslab.repositories.report_repository import ReportRepository
from grslab.schemas.common import Operator
from grslab.schemas.config import RunConfig
from grslab.services.spectral_galerkin import get_galerkin_service

logger = get_logger(__name__)


def multiplicities(eigenvalues: list[float], tolerance: float) -> list[dict]:
    """Distinct eigenvalues (descending) with their multiplicities."""
    groups: list[dict] = []
    for value in eigenvalues:
        if groups and abs(groups[-1]["eigenvalue"] - value) <= tolerance * max(1.0, abs(value)):
            groups[-1]["multiplicity"] += 1
        else:
            groups.append({"eigenvalue": value, "multiplicity": 1})
    return groups


def run_spectrum(config: RunConfig, reports: ReportRepository) -> int:
    setup = prepare_run(config, galerkin=True)
    degree = setup.degree
    model, grid, tolerances = setup.model, setup.grid, config.tolerances
    galerkin = get_galerkin_service(model, grid, tolerances)

    scalar = galerkin.scalar_basis(max(degree, 1))
    assembled, result = galerkin.spectrum(scalar, Operator.LAPLACE_F)
    scalar_summary = galerkin.summarize(scalar, assembled, result)

    tensor = galerkin.tensor_basis(degree)
    assembled, result = galerkin.spectrum(tensor, Operator.LICHNEROWICZ_F)
    tensor_summary = galerkin.summarize(tensor, assembled, result)
    zero_multiplicity = int(np.sum(np.abs(result.eigenvalues) <= tolerances.spectrum))

    gap = galerkin.spectral_gap_check(max(degree, 1))
    trend = galerkin.commutation_trend(list(range(degree + 1)))

    results = [
        {"kind": "spectrum", "basis": scalar.describe(), **scalar_summary.model_dump(mode="json"),
         "multiplicities": multiplicities(scalar_summary.eigenvalues, tolerances.cluster)},
        {"kind": "spectrum", "basis": tensor.describe(), **tensor_summary.model_dump(mode="json"),
         "multiplicities": multiplicities(tensor_summary.eigenvalues, tolerances.cluster),
         "zero_multiplicity": zero_multiplicity},
        {"kind": "spectral_gap", **gap.model_dump(mode="json")},
        {"kind": "commutation_trend", **trend.model_dump(mode="json")},
    ]
    failed = has_failures(results)
    csv_path = config.out_csv or (config.out_json.with_suffix(".csv") if config.out_json else None)
    if csv_path is not None:
        reports.write_csv(tensor_summary, csv_path)
    reports.write_json(build_run_report(setup, results), config.out_json)
    logger.info("spectrum_completed", model=model.name, degree=degree, lambda_1=gap.lambda_1,
                zero_multiplicity=zero_multiplicity, failed=failed)
    return EXIT_FAILURE if failed else EXIT_OK
