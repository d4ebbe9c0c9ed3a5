import numpy as np
import pytest

from mfbm import MfbmParams, validate


def random_admissible_params(rng, p=None, eta_scale=0.1, max_tries=50):
    """Draw an admissible parameter set with H sums kept away from 1."""
    for _ in range(max_tries):
        pp = int(rng.choice([1, 2, 3, 5])) if p is None else p
        H = rng.uniform(0.1, 0.9, pp)
        if np.any(np.abs((H[:, None] + H[None, :]) - 1.0) < 5e-3):
            continue
        sigma = rng.uniform(0.5, 2.0, pp)
        rho = np.eye(pp)
        eta = np.zeros((pp, pp))
        for i in range(pp):
            for j in range(i + 1, pp):
                rho[i, j] = rho[j, i] = rng.uniform(-0.3, 0.3)
                eta[i, j] = rng.uniform(-eta_scale, eta_scale)
                eta[j, i] = -eta[i, j]
        params = MfbmParams(H=H, sigma=sigma, rho=rho, eta=eta)
        if validate(params).admissible:
            return params
    raise RuntimeError("could not draw admissible parameters")


@pytest.fixture
def two_component_params():
    return MfbmParams(H=[0.3, 0.8], sigma=[2.0, 1.0],
                      rho=[[1.0, 0.4], [0.4, 1.0]],
                      eta=[[0.0, 0.1], [-0.1, 0.0]])


@pytest.fixture
def well_balanced_params():
    return MfbmParams(H=[0.3, 0.8], sigma=[2.0, 1.0],
                      rho=[[1.0, 0.4], [0.4, 1.0]])
