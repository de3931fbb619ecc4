import numpy as np
import pytest

from spatialsir import model as M
from spatialsir import measures


def make_standard_spec(theta=0.3, beta=8.0, radius=0.1, alpha=0.3, p=0.3,
                       drift=0.0):
    coeffs = tuple(M.constant_field(a, [drift], [[theta]]) for a in (0, 1, 2))
    kernel = M.constant_beta_kernel(beta, support_radius=radius)
    init = M.InitialLaw(M.UniformBox([-1.5], [1.5]),
                        M.BoxRegion([-0.25], [0.25]), p, 3.0)
    return M.ModelSpec(1, coeffs, kernel, alpha, init)


def make_spec_2d(theta=0.25, beta=2.0, radius=0.3, alpha=0.4, p=0.4):
    coeffs = tuple(M.constant_field(a, [0.0, 0.0], np.eye(2) * theta)
                   for a in (0, 1, 2))
    kernel = M.constant_beta_kernel(beta, support_radius=radius)
    init = M.InitialLaw(M.UniformBox([-1.0, -1.0], [1.0, 1.0]),
                        M.BoxRegion([-0.3, -0.3], [0.3, 0.3]), p, 2.0)
    return M.ModelSpec(2, coeffs, kernel, alpha, init)


@pytest.fixture(scope="session")
def standard_spec():
    return make_standard_spec()


@pytest.fixture(scope="session")
def standard_dict():
    return measures.basis_build("hermite", 10, 2, 3.0, dim=1, scale=[0.75],
                                plateau=4.0, support=6.0)
