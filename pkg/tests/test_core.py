"""Grid geometry, scaling constants, and vehicle seeding."""
import math

import numpy as np
import pytest

from mstraffic.core import (
    Grid1D,
    ScalingParams,
    SimState,
    cell_index,
    seed_vehicles_from_density,
    total_mass,
    vehicles_for_density,
)
from mstraffic.errors import ConfigError, OutOfDomainError
from mstraffic.macro import VelocityLaw


def make_grid(n=10, dx=0.2, mode="periodic"):
    return Grid1D(x_min=dx / 2, n_cells=n, dx=dx, boundary_mode=mode)


class TestGrid:
    def test_centers_and_edges(self):
        g = make_grid()
        assert g.left_edge == 0.0
        assert g.right_edge == pytest.approx(2.0)
        assert np.allclose(g.centers(), 0.1 + 0.2 * np.arange(10))
        assert g.cell_left_edge(3) == pytest.approx(0.6)

    def test_length(self):
        assert make_grid().length == pytest.approx(2.0)

    def test_wrap(self):
        g = make_grid()
        assert g.wrap(2.3) == pytest.approx(0.3)
        assert g.wrap(-0.1) == pytest.approx(1.9)
        assert g.wrap(0.5) == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ConfigError):
            Grid1D(x_min=0.0, n_cells=2, dx=0.1)
        with pytest.raises(ConfigError):
            Grid1D(x_min=0.0, n_cells=10, dx=-1.0)
        with pytest.raises(ConfigError):
            Grid1D(x_min=0.0, n_cells=10, dx=0.1, boundary_mode="reflect")


class TestCellIndex:
    def test_half_open_convention(self):
        g = make_grid()
        # interior of cell 0 is [0, 0.2)
        assert cell_index(0.0, g) == 0
        assert cell_index(0.19999, g) == 0
        assert cell_index(0.2, g) == 1

    def test_interface_snap(self):
        g = make_grid()
        # a position an epsilon left of the interface still lands right of it
        assert cell_index(0.2 - 1e-12, g) == 1

    def test_periodic_wraps(self):
        g = make_grid()
        assert cell_index(2.05, g) == 0
        assert cell_index(-0.05, g) == 9

    def test_free_rejects_outside(self):
        g = make_grid(mode="free")
        with pytest.raises(OutOfDomainError):
            cell_index(2.0, g)
        with pytest.raises(OutOfDomainError):
            cell_index(-0.01, g)


class TestScaling:
    def test_derived_quantities(self):
        s = ScalingParams(dx=0.2, dt=0.01, gamma_max=20)
        assert s.ell_n == pytest.approx(0.01)
        assert s.lam == pytest.approx(0.05)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ScalingParams(dx=0.2, dt=0.01, gamma_max=0)
        with pytest.raises(ConfigError):
            ScalingParams(dx=-0.2, dt=0.01, gamma_max=20)


class TestVehicleCount:
    def test_floor(self):
        assert vehicles_for_density(0.45, 1.0, 20) == 9
        assert vehicles_for_density(0.449, 1.0, 20) == 8
        assert vehicles_for_density(0.0, 1.0, 20) == 0

    def test_float_snap(self):
        # 0.3 * 20 is 6.000000000000001 in binary; must still give 6, not 5
        assert vehicles_for_density(0.3, 1.0, 20) == 6
        # the classic 0.1 + 0.2 artifact, scaled
        assert vehicles_for_density(0.1 + 0.2, 1.0, 10) == 3


class TestSeeding:
    def test_equispaced_at_equilibrium(self):
        g = make_grid()
        law = VelocityLaw()
        sc = ScalingParams(dx=0.2, dt=0.01, gamma_max=20)
        rho = np.full(10, 0.4)
        state = SimState(grid=g, rho=rho)
        created = seed_vehicles_from_density(rho, [3], g, sc, law, state)
        assert len(created) == 8
        left = g.cell_left_edge(3)
        expect = left + (np.arange(8) + 0.5) * (0.2 / 8)
        assert np.allclose([v.pos for v in created], expect)
        assert all(v.vel == pytest.approx(0.6) for v in created)
        assert all(v.activated_at == 0 for v in created)
        assert state.vehicles == created

    def test_empty_cell_seeds_nothing(self):
        g = make_grid()
        law = VelocityLaw()
        sc = ScalingParams(dx=0.2, dt=0.01, gamma_max=20)
        rho = np.zeros(10)
        state = SimState(grid=g, rho=rho)
        assert seed_vehicles_from_density(rho, [0, 5], g, sc, law, state) == []

    def test_unique_ids(self):
        g = make_grid()
        law = VelocityLaw()
        sc = ScalingParams(dx=0.2, dt=0.01, gamma_max=20)
        rho = np.full(10, 0.5)
        state = SimState(grid=g, rho=rho)
        seed_vehicles_from_density(rho, [0, 1, 2], g, sc, law, state)
        ids = [v.vid for v in state.vehicles]
        assert len(ids) == len(set(ids)) == 30


def test_total_mass_matches_sum():
    g = make_grid()
    rho = np.linspace(0, 1, 10)
    assert total_mass(rho, g) == pytest.approx(rho.sum() * 0.2)


def test_total_mass_reorder_invariant():
    g = make_grid(n=1000, dx=0.001)
    rng = np.random.default_rng(7)
    rho = rng.uniform(0, 1, 1000)
    assert total_mass(rho, g) == total_mass(rho[::-1].copy(), g)
