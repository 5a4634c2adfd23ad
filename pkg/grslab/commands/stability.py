"""
`grslab stability`: necessary and sufficient linear-stability criteria at truncation degree L.

The verdict itself never fails a run; exit 1 means a supporting check
(gap check, kernel residuals, joint classification, scanned directions or the
eigentensor relation) missed its tolerance.
"""
from grslab.commands.base import build_run_report, has_failures, prepare_run
from grslab.core.exceptions import EXIT_FAILURE, EXIT_OK
from grslab.core.logging_config import get_logger
from grslab.repositories.report_repository import ReportRepository
from grslab.schemas.config import RunConfig
from grslab.services.stability_analysis import get_stability_service

logger = get_logger(__name__)


def run_stability(config: RunConfig, reports: ReportRepository) -> int:
    setup = prepare_run(config, galerkin=True)
    service = get_stability_service(setup.model, setup.grid, setup.degree, config.tolerances)
    report = service.build_stability_report()

    results = [{"kind": "stability", **report.model_dump(mode="json")}]
    failed = has_failures(results)
    reports.write_json(build_run_report(setup, results, verdict=report.verdict_label), config.out_json)
    logger.info("stability_completed", model=setup.model.name, degree=setup.degree, verdict=report.verdict_label,
                failed=failed, scanned=len(report.necessary))
    return EXIT_FAILURE if failed else EXIT_OK
