import pathlib

import numpy as np
import pytest

from corel_lqg import LqgModel, load_model, reference_model_path

REF_PATH = pathlib.Path(reference_model_path())

ACCEPTANCE_LINES = []


def random_stable(rng, n, radius=0.9):
    A = rng.standard_normal((n, n))
    return A * (radius / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12))


def random_model(rng, dx=3, dy=2, du=2, radius=0.85):
    def pd(k, scale=1.0):
        G = rng.standard_normal((k, k))
        return scale * (G @ G.T / k + 0.5 * np.eye(k))

    return LqgModel(A=random_stable(rng, dx, radius), B=rng.standard_normal((dx, du)),
                    C=rng.standard_normal((dy, dx)), Q=pd(dx), R=pd(du), Sigma_w=pd(dx, 0.1),
                    Sigma_v=pd(dy, 0.1), Sigma_0=pd(dx, 0.1))


@pytest.fixture(scope="session")
def ref_model():
    return load_model(REF_PATH)


@pytest.fixture(scope="session")
def ref_path():
    return str(REF_PATH)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
