import numpy as np
import pytest

from offtersim.terrain import RandomizationRanges, sample_terrain


def pinned_ranges(*, b=0.0, c=0.0, d=0.0, width=8.0, alpha=0.0,
                  grid_size=257, resolution=0.5, sigma_trail=0.0,
                  sigma_nontrail=0.0, gamma_max=0.0, beta_max=0.0,
                  tree_density=0.0, rock_density=0.0, n_modes=4):
    """Ranges collapsed to points so every parameter is exact."""
    return RandomizationRanges(
        b=(b, b), c=(c, c), d=(d, d), width=(width, width),
        alpha=(alpha, alpha), beta_max=beta_max, gamma_max=gamma_max,
        sigma_trail=(sigma_trail, sigma_trail),
        sigma_nontrail=(sigma_nontrail, sigma_nontrail),
        n_modes=n_modes, grid_size=grid_size, resolution=resolution,
        tree_density=tree_density, rock_density=rock_density)


def make_flat_terrain(**kw):
    """Dead-flat straight trail on the grid midline."""
    return sample_terrain(0, pinned_ranges(**kw))


@pytest.fixture(scope="session")
def flat_terrain():
    return make_flat_terrain()


@pytest.fixture(scope="session")
def incline_terrain():
    # constant 0.1 rad grade in both x and y, no other structure
    return sample_terrain(0, pinned_ranges(alpha=0.1))
