from __future__ import annotations

import math

import numpy as np
import pytest

from mkpkit.conservation_laws import RectBoundary, conservation_law
from mkpkit.model import CaseParams
from mkpkit.numeric_verify import (
    BlowUpError,
    EvolutionConfig,
    Field2D,
    Grid2D,
    ResolutionError,
    TrackingError,
    Trajectory,
    UnsupportedJetError,
    advected_trajectory,
    anchored_antiderivative,
    charge_balance,
    evolve,
    exact_flux,
    inverse_dx,
    pde_residual_fields,
    pde_residual_grid,
    soliton_field,
    spectral_derivative,
    track_speed,
)
from mkpkit.solitons import LineSolitonParams

from test_solitons import REGIMES, draws

MKP = CaseParams(1, -1, 2)
SECH = LineSolitonParams(0.0, 1.0, MKP)
OBLIQUE = LineSolitonParams(0.5, 1.0, MKP)
SIM_GRID = Grid2D(32.0, 8.0, 256, 64)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(10, 10, 96, 64)
    with pytest.raises(ValueError):
        Grid2D(10, 10, 32, 64)
    g = Grid2D(10, 5, 64, 128)
    assert g.x[0] == -10 and g.x[1] - g.x[0] == pytest.approx(g.dx)
    assert g.mesh()[0].shape == (128, 64)


def test_field_rejects_non_finite():
    g = Grid2D(10, 10, 64, 64)
    bad = np.zeros((64, 64))
    bad[3, 4] = np.nan
    with pytest.raises(ValueError):
        Field2D(g, bad)
    with pytest.raises(ValueError):
        Field2D(g, np.zeros((64, 32)))


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(0.01, 1.0, dealias=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(1.0, 1.0).validate(SIM_GRID)  # dt above dx^2
    with pytest.raises(ValueError):
        EvolutionConfig(0.003, 1.0).validate(SIM_GRID)  # not a whole number of steps
    with pytest.raises(ValueError):
        EvolutionConfig(0.005, 1.0, integrating_factor=False).validate(SIM_GRID)


@pytest.mark.parametrize("m", [1, 3, 17, 40])
def test_spectral_derivative_of_sine(m):
    g = Grid2D(7.0, 3.0, 128, 64)
    X, Y = g.mesh()
    k = math.pi * m / g.Lx
    assert np.max(np.abs(spectral_derivative(np.sin(k * X), g, 1, "x") - k * np.cos(k * X))) < 1e-12 * max(1, k)
    ky = math.pi * 5 / g.Ly
    assert np.max(np.abs(spectral_derivative(np.sin(ky * Y), g, 1, "y") - ky * np.cos(ky * Y))) < 1e-12 * ky


def test_inverse_and_anchored_antiderivatives():
    g = Grid2D(5.0, 5.0, 64, 64)
    X, _ = g.mesh()
    k = math.pi * 2 / g.Lx
    assert np.max(np.abs(inverse_dx(np.cos(k * X), g) - np.sin(k * X) / k)) < 1e-13
    f = 0.7 + np.cos(k * X)
    prim = anchored_antiderivative(f, g, 10)
    exact = 0.7 * (X - g.x[10]) + (np.sin(k * X) - np.sin(k * g.x[10])) / k
    assert np.max(np.abs(prim - exact)) < 1e-12


# ---------------------------------------------------------------- residual


def test_sech_residual_converges():
    res = [pde_residual_grid(SECH, Grid2D(32.0, 8.0, n, 64)) for n in (128, 256, 512)]
    assert res[0] > res[1] > res[2]
    assert res[2] < 1e-6


def test_oblique_residual():
    assert pde_residual_grid(OBLIQUE, Grid2D(32.0, 8.0, 512, 64)) < 1e-8


def test_zero_field_residual():
    g = Grid2D(10.0, 10.0, 64, 64)
    z = np.zeros((64, 64))
    assert pde_residual_fields(z, z, z, MKP, g) == 0.0


def test_unresolved_soliton_is_rejected():
    with pytest.raises(ResolutionError):
        pde_residual_grid(SECH, Grid2D(200.0, 8.0, 64, 64))


@pytest.mark.parametrize("regime", REGIMES, ids=lambda r: f"s1={r[0]},s1s2={r[1]}")
def test_residual_tends_to_zero(regime):
    for p in draws(regime, 3, seed=9):
        half = 36 / math.sqrt(p.a_sq)
        res = [pde_residual_grid(p, Grid2D(half, 8.0, n, 64)) for n in (128, 256, 512, 1024)]
        assert min(res) < 1e-7, res
        assert res[-1] < 1e-6 and res[-1] < res[0], res


# ---------------------------------------------------------------- evolution


@pytest.fixture(scope="module")
def simulations():
    cfg = EvolutionConfig(0.005, 5.0, save_every=50)
    out = {}
    for ksq in (2, "19/10"):
        case = CaseParams(1, -1, ksq)
        p = LineSolitonParams(0.0, 1.0, case)
        out[ksq] = evolve(soliton_field(p, SIM_GRID), case, cfg)
    return out


def _amplitude_drift(traj):
    peaks = np.array([u.max() for u in traj.snapshots])
    return float(np.max(np.abs(peaks - peaks[0])) / peaks[0])


def test_zero_initial_data_stays_zero():
    g = Grid2D(10.0, 10.0, 64, 64)
    traj = evolve(Field2D(g, np.zeros((64, 64))), MKP, EvolutionConfig(0.01, 0.1, save_every=5))
    assert len(traj) == 3
    assert all(np.all(u == 0) for u in traj.snapshots)


def test_simulated_soliton_keeps_shape_and_speed(simulations):
    traj = simulations[2]
    assert traj.times[-1] == pytest.approx(5.0)
    assert _amplitude_drift(traj) < 0.02
    assert 0.98 <= track_speed(traj).nu <= 1.02
    exact = soliton_field(SECH, SIM_GRID, 5.0).u
    assert np.max(np.abs(traj.final - exact)) < 0.02 * math.sqrt(6)


def test_nearby_non_integrable_case_is_indistinguishable(simulations):
    a, b = simulations[2], simulations["19/10"]
    tol = 2 * 0.02
    assert abs(track_speed(a).nu - track_speed(b).nu) < tol
    assert abs(_amplitude_drift(a) - _amplitude_drift(b)) < tol
    assert abs(a.final.max() - b.final.max()) / a.final.max() < tol


def test_self_convergence_in_time():
    g = Grid2D(24.0, 8.0, 128, 64)
    u0 = soliton_field(LineSolitonParams(0.0, 1.5, MKP), g)
    finals = [evolve(u0, MKP, EvolutionConfig(dt, 0.5, save_every=10_000)).final for dt in (0.05, 0.025, 0.0125)]
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert e2 < e1
    assert math.log2(e1 / e2) >= 2.0


def test_explicit_linear_stepping_agrees():
    g = Grid2D(24.0, 8.0, 64, 64)
    u0 = soliton_field(SECH, g)
    dt = 2.5e-3
    a = evolve(u0, MKP, EvolutionConfig(dt, 0.05, save_every=100)).final
    b = evolve(u0, MKP, EvolutionConfig(dt, 0.05, integrating_factor=False, save_every=100)).final
    # both schemes are fourth order; they differ only by their error constants
    assert np.max(np.abs(a - b)) < 1e-6


def test_blow_up_is_reported_with_time():
    g = Grid2D(10.0, 10.0, 64, 64)
    X, _ = g.mesh()
    u0 = Field2D(g, 1e40 * np.exp(-X**2))
    with pytest.raises(BlowUpError) as err:
        evolve(u0, CaseParams(-1, 1, 2), EvolutionConfig(0.01, 1.0, save_every=1))
    assert 0 < err.value.t <= 1.0
    assert len(err.value.trajectory) >= 1


def test_row_means_must_agree():
    g = Grid2D(10.0, 10.0, 64, 64)
    X, Y = g.mesh()
    with pytest.raises(ValueError):
        evolve(Field2D(g, np.exp(-X**2) * (1 + 0.5 * np.cos(math.pi * Y / 10))), MKP,
               EvolutionConfig(0.01, 0.1))


# ---------------------------------------------------------------- tracking


def test_tracker_on_advected_soliton():
    traj = advected_trajectory(SECH, SIM_GRID, np.linspace(0, 4, 21))
    m = track_speed(traj)
    assert abs(m.nu - 1.0) < 1e-3
    assert abs(m.mu) < 1e-9


def test_tracker_recovers_direction():
    p = LineSolitonParams(0.25, 1.2, MKP)
    traj = advected_trajectory(p, Grid2D(32.0, 4.0, 256, 64), np.linspace(0, 3, 16))
    m = track_speed(traj)
    assert abs(m.nu - p.nu) < 1e-3
    assert abs(m.mu - p.mu) < 1e-3


def test_tracker_on_stationary_field():
    g = SIM_GRID
    X, _ = g.mesh()
    u = np.exp(-X**2)
    traj = Trajectory(g, MKP, [0.0, 1.0, 2.0], [u, u, u])
    assert track_speed(traj).nu == pytest.approx(0.0, abs=1e-12)


def test_tracker_loses_peak():
    g = SIM_GRID
    X, _ = g.mesh()
    traj = Trajectory(g, MKP, [0.0, 1.0], [np.exp(-X**2), np.zeros_like(X)])
    with pytest.raises(TrackingError):
        track_speed(traj)
    with pytest.raises(TrackingError):
        track_speed(Trajectory(g, MKP, [0.0], [np.exp(-X**2)]))


# ---------------------------------------------------------------- charge balance


def test_charge_balance_of_zero_field():
    g = SIM_GRID
    z = np.zeros((g.Ny, g.Nx))
    traj = Trajectory(g, MKP, [0.0, 1.0], [z, z])
    series = charge_balance(traj, conservation_law("CL1", MKP), 16.0, 4.0)
    assert np.all(series[:, 1] == 0)
    assert list(series[:, 0]) == [0.0, 1.0]


def test_charge_balance_of_simulation(simulations):
    series = charge_balance(simulations[2], conservation_law("CL1", MKP), 16.0, 4.0)
    assert np.max(np.abs(series[:, 1])) < 1e-5


def test_charge_balance_needs_reconstructible_jets():
    traj = Trajectory(SIM_GRID, MKP, [0.0], [soliton_field(SECH, SIM_GRID).u])
    with pytest.raises(UnsupportedJetError):
        charge_balance(traj, conservation_law("CL2", MKP), 16.0, 4.0)


def test_box_near_seam_warns():
    z = np.zeros((SIM_GRID.Ny, SIM_GRID.Nx))
    traj = Trajectory(SIM_GRID, MKP, [0.0], [z])
    with pytest.warns(RuntimeWarning):
        charge_balance(traj, conservation_law("CL1", MKP), 31.0, 4.0)
    with pytest.raises(ValueError):
        charge_balance(traj, conservation_law("CL1", MKP), 40.0, 4.0)


def test_exact_flux_of_normal_soliton_vanishes():
    law = conservation_law("CL1", MKP)
    for half in (8.0, 16.0, 24.0):
        assert abs(exact_flux(SECH, law, RectBoundary.centered(half), 0.3)) < 1e-10


def test_exact_flux_of_oblique_soliton_decays():
    law = conservation_law("CL1", MKP)
    fluxes = [abs(exact_flux(OBLIQUE, law, RectBoundary.centered(h), 0.0)) for h in (8.0, 16.0, 24.0)]
    assert fluxes[0] > fluxes[1] > fluxes[2]
    assert fluxes[2] < 1e-3


def test_flux_ratio_for_time_weighted_law():
    law = conservation_law("CL1", MKP)
    box = RectBoundary.centered(8.0)
    t0 = 1.7
    plain = exact_flux(OBLIQUE, law, box, t0)
    weighted = exact_flux(OBLIQUE, law, box, t0, f={1: [0, 1]})
    assert weighted / plain == pytest.approx(t0, rel=1e-12)


def test_grid_and_exact_fluxes_agree():
    p = LineSolitonParams(0.0, 1.3, CaseParams(1, 1, 3))
    g = Grid2D(32.0, 8.0, 256, 64)
    law = conservation_law("CL1", p.case)
    traj = Trajectory(g, p.case, [0.0], [soliton_field(p, g).u])
    grid_flux = charge_balance(traj, law, 12.0, 4.0)[0, 1]
    assert abs(grid_flux) < 1e-8
