import numpy as np
import pytest

from grslab.schemas.config import GridResolution
from grslab.services.model_manifolds import get_model_service
from grslab.services.weighted_calculus import WeightedCalculusService


@pytest.fixture(scope="session")
def model_service():
    return get_model_service()


# --- soliton fixtures ---------------------------------------------------


@pytest.fixture(scope="session")
def sphere2(model_service):
    return model_service.build_round_sphere(2)


@pytest.fixture(scope="session")
def sphere2_grid(model_service, sphere2):
    return model_service.quadrature_grid(sphere2)


@pytest.fixture(scope="session")
def sphere3(model_service):
    return model_service.build_round_sphere(3)


@pytest.fixture(scope="session")
def sphere3_grid(model_service, sphere3):
    return model_service.quadrature_grid(sphere3)


@pytest.fixture(scope="session")
def product(model_service, sphere2):
    return model_service.build_product(sphere2, sphere2)


@pytest.fixture(scope="session")
def product_grid(model_service, product):
    return model_service.quadrature_grid(product)


@pytest.fixture(scope="session")
def sphere2_radius2(model_service):
    return model_service.build_round_sphere(2, radius=2.0)


@pytest.fixture(scope="session")
def sphere2_radius2_grid(model_service, sphere2_radius2):
    return model_service.quadrature_grid(sphere2_radius2)


# --- finite-difference fixtures ----------------------------------------


@pytest.fixture(scope="session")
def ellipsoid(model_service):
    return model_service.build_ellipsoid(a=1.0, b=1.0, c=1.2, amplitude=0.3, tau=0.5)


@pytest.fixture(scope="session")
def ellipsoid_grid(model_service, ellipsoid):
    return model_service.quadrature_grid(ellipsoid)


@pytest.fixture(scope="session")
def ellipsoid_flat_potential(model_service):
    return model_service.build_ellipsoid(a=1.0, b=1.0, c=1.2, amplitude=0.0, tau=0.5)


@pytest.fixture(scope="session")
def round_generic(model_service):
    return model_service.build_round_generic(2)


@pytest.fixture(scope="session")
def round_generic_grid(model_service, round_generic):
    return model_service.quadrature_grid(round_generic)


@pytest.fixture(scope="session")
def flat_torus(model_service):
    return model_service.build_flat_torus(2)


@pytest.fixture(scope="session")
def flat_torus_grid(model_service, flat_torus):
    return model_service.quadrature_grid(flat_torus)


# --- helpers ------------------------------------------------------------


@pytest.fixture(scope="session")
def calculus():
    """Calculus service factory, one per model."""
    services = {}

    def make(model):
        if model not in services:
            services[model] = WeightedCalculusService(model)
        return services[model]

    return make


@pytest.fixture
def coarse_resolution():
    return GridResolution(polar=16, periodic=32)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)
