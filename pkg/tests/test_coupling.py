"""Hybrid engine: activation, labeling, deactivation, counted fluxes, and the
conservative density update."""
import numpy as np
import pytest

from mstraffic.core import (
    Grid1D,
    ScalingParams,
    SimState,
    Vehicle,
    cell_index,
    total_mass,
)
from mstraffic.coupling import (
    ActivationParams,
    MultiscaleParams,
    activate,
    activation_cells,
    count_vehicles_per_cell,
    complete_info_step,
    deactivate_followers,
    deactivate_lonely_leaders,
    label_next,
    micro_flux,
    multiscale_step,
    update_density,
)
from mstraffic.errors import CflError, ConfigError
from mstraffic.macro import VelocityLaw, interface_godunov_fluxes, lwr_step
from mstraffic.micro import ArzMicroParams

LAW = VelocityLaw()


def make_grid(n=20, dx=0.2, mode="periodic"):
    return Grid1D(x_min=dx / 2, n_cells=n, dx=dx, boundary_mode=mode)


def make_params(dt=0.01, gamma_max=20, delta_v=0.1, delta_t_steps=5,
                delta_big_v=0.3, tau=0.5, dx=0.2):
    return MultiscaleParams(
        scaling=ScalingParams(dx=dx, dt=dt, gamma_max=gamma_max),
        law=LAW,
        activation=ActivationParams(delta_v, delta_t_steps, delta_big_v),
        model=ArzMicroParams(tau=tau),
    )


def put_vehicle(state, pos, vel, vid=None, activated_at=0, next_id=None):
    v = Vehicle(vid=state.new_vid() if vid is None else vid, pos=pos, vel=vel,
                activated_at=activated_at, next_id=next_id)
    state.vehicles.append(v)
    return v


class TestActivationCells:
    def test_window_around_jump(self):
        g = make_grid(mode="free")
        rho = np.full(20, 0.2)
        rho[10:] = 0.5  # jump between cells 9 and 10
        gamma = np.zeros(20, dtype=int)
        cells = activation_cells(rho, gamma, g, LAW, delta_v=0.1)
        assert cells == {8, 9, 10, 11}

    def test_threshold_is_strict(self):
        g = make_grid()
        rho = np.full(20, 0.5)
        rho[10:] = 0.625  # velocity jump exactly 0.125 (binary-exact)
        cells = activation_cells(rho, np.zeros(20, int), g, LAW, delta_v=0.125)
        assert cells == set()

    def test_occupied_cells_untouched(self):
        g = make_grid(mode="free")
        rho = np.full(20, 0.2)
        rho[10:] = 0.5
        gamma = np.zeros(20, dtype=int)
        gamma[9] = 3
        cells = activation_cells(rho, gamma, g, LAW, delta_v=0.1)
        assert cells == {8, 10, 11}

    def test_periodic_wraps_window(self):
        g = make_grid()
        rho = np.full(20, 0.2)
        rho[0] = 0.6  # jumps at interfaces 19|0 and 0|1
        cells = activation_cells(rho, np.zeros(20, int), g, LAW, delta_v=0.1)
        assert cells == {18, 19, 0, 1, 2}

    def test_free_boundary_clips_window(self):
        g = make_grid(mode="free")
        rho = np.full(20, 0.2)
        rho[0] = 0.6
        cells = activation_cells(rho, np.zeros(20, int), g, LAW, delta_v=0.1)
        assert cells == {0, 1, 2}  # no cell -1

    def test_overlapping_windows_union(self):
        g = make_grid()
        rho = np.full(20, 0.2)
        rho[10] = 0.5
        rho[11:] = 0.2
        cells = activation_cells(rho, np.zeros(20, int), g, LAW, delta_v=0.1)
        assert cells == {8, 9, 10, 11, 12}


class TestActivate:
    def test_seeds_floor_count_at_equilibrium(self):
        g = make_grid(mode="free")
        params = make_params()
        rho = np.full(20, 0.2)
        rho[10:] = 0.47
        state = SimState(grid=g, rho=rho)
        added = activate(state, params, np.zeros(20, int))
        # cells 8, 9 get floor(0.2*20) = 4; cells 10, 11 get floor(0.47*20) = 9
        assert added == 4 + 4 + 9 + 9
        gamma = count_vehicles_per_cell(state)
        assert gamma[8] == gamma[9] == 4 and gamma[10] == gamma[11] == 9
        for v in state.vehicles:
            j = cell_index(v.pos, g)
            assert v.vel == pytest.approx(float(LAW.v(rho[j])))

    def test_records_events_for_next_step(self):
        g = make_grid(mode="free")
        params = make_params()
        rho = np.full(20, 0.2)
        rho[10:] = 0.5
        state = SimState(grid=g, rho=rho, step=7)
        events = []
        activate(state, params, np.zeros(20, int), events)
        assert {e.cell for e in events} == {8, 9, 10, 11}
        assert all(e.step == 8 and e.kind == "activation" for e in events)

    def test_no_jump_no_vehicles(self):
        g = make_grid()
        params = make_params()
        state = SimState(grid=g, rho=np.full(20, 0.4))
        assert activate(state, params, np.zeros(20, int)) == 0
        assert state.vehicles == []


class TestLabeling:
    def test_rightmost_is_leader_on_open_road(self):
        g = make_grid(mode="free")
        state = SimState(grid=g, rho=np.zeros(20))
        a = put_vehicle(state, 1.0, 0.5)
        b = put_vehicle(state, 1.1, 0.5)
        label_next(state)
        assert a.next_id == b.vid
        assert b.next_id is None

    def test_wide_gap_makes_leader(self):
        g = make_grid(mode="free")
        state = SimState(grid=g, rho=np.zeros(20))
        a = put_vehicle(state, 1.0, 0.5)
        b = put_vehicle(state, 1.0 + 0.2 + 1e-6, 0.5)  # gap just over dx
        put_vehicle(state, 3.0, 0.5)
        label_next(state)
        assert a.next_id is None
        assert b.next_id is None

    def test_ring_wraps_the_chain(self):
        g = make_grid()  # length 4.0
        state = SimState(grid=g, rho=np.zeros(20))
        a = put_vehicle(state, 3.95, 0.5)
        b = put_vehicle(state, 0.05, 0.5)
        label_next(state)
        assert a.next_id == b.vid  # wrap gap 0.1 <= dx


class TestDeactivation:
    def setup_pair(self, age_steps, vel, gap=0.05, step=20):
        g = make_grid(mode="free")
        params = make_params(delta_t_steps=5, delta_big_v=0.3)
        state = SimState(grid=g, rho=np.zeros(20), step=step)
        follower = put_vehicle(state, 1.0, vel,
                               activated_at=step - age_steps)
        put_vehicle(state, 1.0 + gap, 0.5, activated_at=0)
        label_next(state)
        return state, params, follower

    def test_equilibrated_old_follower_removed(self):
        # ell/gap = 0.01/0.05 -> equilibrium velocity 0.8
        state, params, follower = self.setup_pair(age_steps=6, vel=0.8)
        assert deactivate_followers(state, params) == 1
        assert follower not in state.vehicles

    def test_age_guard_is_strict(self):
        # active for exactly delta_t steps: must survive
        state, params, follower = self.setup_pair(age_steps=5, vel=0.8)
        assert deactivate_followers(state, params) == 0
        assert follower in state.vehicles

    def test_off_equilibrium_follower_survives(self):
        state, params, follower = self.setup_pair(age_steps=10, vel=0.2)
        assert deactivate_followers(state, params) == 0

    def test_leader_never_deactivated_as_follower(self):
        g = make_grid(mode="free")
        params = make_params()
        state = SimState(grid=g, rho=np.zeros(20), step=50)
        put_vehicle(state, 1.0, 0.5, activated_at=0)
        label_next(state)
        assert deactivate_followers(state, params) == 0

    def test_lonely_leader_removed(self):
        g = make_grid(mode="free")
        state = SimState(grid=g, rho=np.zeros(20))
        put_vehicle(state, 1.0, 0.5)
        label_next(state)
        assert deactivate_lonely_leaders(state) == 1
        assert state.vehicles == []

    def test_followed_leader_survives(self):
        g = make_grid(mode="free")
        state = SimState(grid=g, rho=np.zeros(20))
        put_vehicle(state, 1.0, 0.5)
        leader = put_vehicle(state, 1.1, 0.5)
        label_next(state)
        assert deactivate_lonely_leaders(state) == 0
        assert leader in state.vehicles


class TestMicroFlux:
    sc = ScalingParams(dx=0.2, dt=0.01, gamma_max=20)

    def test_no_crossing(self):
        g = make_grid()
        f, counts = micro_flux([0.30], [0.35], g, self.sc)
        assert counts.sum() == 0 and np.all(f == 0.0)

    def test_single_crossing(self):
        g = make_grid()
        f, counts = micro_flux([0.39], [0.41], g, self.sc)
        assert counts[2] == 1 and counts.sum() == 1
        assert f[2] == pytest.approx(self.sc.ell_n / self.sc.dt)

    def test_double_crossing_raises(self):
        g = make_grid()
        with pytest.raises(CflError):
            micro_flux([0.30], [0.75], g, self.sc)

    def test_exit_counts_last_interface(self):
        g = make_grid(mode="free")
        f, counts = micro_flux([3.95], [4.05], g, self.sc)
        assert counts[20] == 1

    def test_periodic_wrap_crossing(self):
        g = make_grid()
        f, counts = micro_flux([3.95], [0.01], g, self.sc)
        assert counts[0] == 1


class TestUpdateDensity:
    def test_blend_only_where_both_sides_occupied(self):
        g = make_grid()
        params = make_params()
        rng = np.random.default_rng(5)
        rho = rng.uniform(0.1, 0.9, 20)
        state = SimState(grid=g, rho=rho.copy(), theta=0.25)
        gamma = np.zeros(20, dtype=int)
        gamma[[4, 5, 6, 12]] = 1
        f = rng.uniform(0, 0.3, 20)
        out = update_density(state, f, gamma, params)
        gd = interface_godunov_fluxes(rho, g, LAW)
        h = gd.copy()
        for i in range(20):  # interface i sits between cells i-1 and i
            if gamma[i - 1] > 0 and gamma[i] > 0:
                h[i] = 0.25 * gd[i] + 0.75 * f[i]
        lam = params.scaling.lam
        expect = rho + lam * (h - np.roll(h, -1))
        assert np.allclose(out, expect)
        # only interfaces 4|5 and 5|6 blend for this occupancy pattern
        assert not np.array_equal(h, gd)
        assert np.array_equal(np.flatnonzero(h != gd), [5, 6])

    def test_conserves_mass(self):
        g = make_grid()
        params = make_params()
        rng = np.random.default_rng(6)
        rho = rng.uniform(0.1, 0.9, 20)
        state = SimState(grid=g, rho=rho.copy(), theta=0.0)
        gamma = rng.integers(0, 2, 20)
        f = rng.uniform(0, 0.3, 20)
        out = update_density(state, f, gamma, params)
        assert total_mass(out, g) == pytest.approx(total_mass(rho, g), rel=1e-14)

    def test_free_boundary_balance_accumulates(self):
        g = make_grid(mode="free")
        params = make_params()
        rho = np.full(20, 0.3)
        state = SimState(grid=g, rho=rho.copy())
        out = update_density(state, np.zeros(21), np.zeros(20, int), params)
        # uniform state: inflow equals outflow, so the balance nets to zero
        assert state.boundary_balance == pytest.approx(0.0)
        mass_plus_balance = total_mass(out, g) + state.boundary_balance
        assert mass_plus_balance == pytest.approx(total_mass(rho, g), rel=1e-14)


class TestMultiscaleStep:
    def random_state(self, seed, mode="periodic"):
        g = make_grid(n=40, mode=mode)
        rng = np.random.default_rng(seed)
        rho = np.round(rng.uniform(0.0, 1.0, 40), 2)
        return SimState(grid=g, rho=rho), make_params(tau=0.1)

    def test_theta_one_reduces_to_pure_continuum(self):
        state, params = self.random_state(1)
        state.theta = 1.0
        ref = state.rho.copy()
        for _ in range(60):
            multiscale_step(state, params)
            ref = lwr_step(ref, state.grid, params.scaling, params.law)
            assert np.array_equal(state.rho, ref)

    def test_huge_threshold_means_no_vehicles(self):
        state, params = self.random_state(2)
        quiet = MultiscaleParams(
            scaling=params.scaling, law=params.law,
            activation=ActivationParams(1e9, 5, 0.3), model=params.model,
        )
        ref = state.rho.copy()
        for _ in range(60):
            multiscale_step(state, quiet)
            ref = lwr_step(ref, state.grid, params.scaling, params.law)
        assert state.vehicles == []
        assert np.array_equal(state.rho, ref)

    def test_mass_conserved_with_active_vehicles(self):
        state, params = self.random_state(3)
        m0 = total_mass(state.rho, state.grid)
        saw_vehicles = False
        for _ in range(150):
            multiscale_step(state, params)
            saw_vehicles = saw_vehicles or bool(state.vehicles)
            assert total_mass(state.rho, state.grid) == pytest.approx(m0, rel=1e-12)
        assert saw_vehicles

    def test_free_road_mass_accounting(self):
        state, params = self.random_state(4, mode="free")
        m0 = total_mass(state.rho, state.grid)
        for _ in range(150):
            multiscale_step(state, params)
            total = total_mass(state.rho, state.grid) + state.boundary_balance
            assert total == pytest.approx(m0, rel=1e-12)

    def test_cfl_guard(self):
        state, _ = self.random_state(5)
        bad = make_params(dt=0.5)  # lam = 2.5
        with pytest.raises(CflError):
            multiscale_step(state, bad)

    def test_step_counter_advances(self):
        state, params = self.random_state(6)
        multiscale_step(state, params)
        assert state.step == 1


class TestCompleteInfoStep:
    def test_mass_conserved_on_ring(self):
        g = make_grid(n=40)
        params = make_params(tau=0.1)
        rng = np.random.default_rng(9)
        rho = np.round(rng.uniform(0.1, 0.9, 40), 2)
        state = SimState(grid=g, rho=rho)
        from mstraffic.core import seed_vehicles_from_density
        seed_vehicles_from_density(rho, range(40), g, params.scaling, LAW, state)
        label_next(state)
        m0 = total_mass(state.rho, g)
        for _ in range(100):
            complete_info_step(state, params)
            assert total_mass(state.rho, g) == pytest.approx(m0, rel=1e-12)


def test_activation_params_validation():
    with pytest.raises(ConfigError):
        ActivationParams(0.0, 5, 0.3)
    with pytest.raises(ConfigError):
        ActivationParams(0.1, 0, 0.3)


def test_activation_params_from_time():
    p = ActivationParams.from_time(0.1, delta_t=0.15, delta_big_v=0.3, dt=0.01)
    assert p.delta_t_steps == 15
