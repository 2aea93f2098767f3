import pytest

from spectralstrip.lattice import make_uniform_grid, square_well

# Frozen oracle values (generated by tests/oracles.py, verified in
# test_oracles.py before anything else relies on them).
LAM1_DEPTH1 = 0.4537531658603282
LAM1_DEPTH05 = 0.15396079635180632
DEPTH10_LEVELS = (8.592785275229838, 4.624194086329781, 0.004019262453327954)
DEPTH100_LEVELS = (
    97.96209591894605,
    91.86414571716486,
    81.75774461684804,
    67.7465988062817,
    50.03077667462003,
    29.049635513866775,
    6.31920415665266,
)
# sum lam^{3/2} / ((3/16) * 2a * V0^2) for depths 1, 10, 100 (a = 1)
SHARPNESS_RATIOS = (0.8150762421426228, 0.9368670528548426, 0.9795379094876021)


@pytest.fixture(scope="session")
def fast_grid():
    return make_uniform_grid(-12.0, 12.0, 6001)  # h = 4e-3


@pytest.fixture(scope="session")
def mid_grid():
    return make_uniform_grid(-15.0, 15.0, 30001)  # h = 1e-3


@pytest.fixture(scope="session")
def fine_grid():
    return make_uniform_grid(-15.0, 15.0, 60001)  # h = 5e-4


@pytest.fixture(scope="session")
def well1(mid_grid):
    return square_well(1.0, 1.0, 1, mid_grid)


@pytest.fixture(scope="session")
def well1_gs(well1):
    from spectralstrip.darboux import shoot_ground_state

    return shoot_ground_state(well1, (0.1, 1.0))
