import numpy as np
import pytest

from linwave.constraints import InitialDataPair
from linwave.decomposition import gauge_producing_data
from linwave.evolution import (
    build_cauchy_jet,
    diagnostics,
    evolve,
    evolve_state,
    extract_induced_data,
    lie_trajectory,
    recover_gauge_vector,
    trajectory_difference,
    wave_energies,
)
from linwave.fields import ModeLattice, SpectralField, random_field, zero_field
from linwave.slices import apply_slice_operator, slice_geometry
from linwave.spacetime import family_matrices, nu_jet_conversion, spacetime_background

KASNER_P = (2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)
MINK = spacetime_background("minkowski-torus", n=3)
KAS = spacetime_background("kasner", p=KASNER_P)
TORUS = slice_geometry("flat-torus", n=3)
KSLICE = slice_geometry("kasner", p=KASNER_P, t0=1.0)
LAT = ModeLattice(3, 2)


def hermitian_pair(lat, rng, comps):
    arr = rng.standard_normal((lat.num_modes, comps)) + 1j * rng.standard_normal(
        (lat.num_modes, comps)
    )
    perm = lat.negation_permutation()
    return 0.5 * (arr + np.conj(arr[perm]))


def standing_wave_pair(lat):
    # h~ = cos x^1 (dx^2 dx^2 - dx^3 dx^3), m~ = 0: a TT standing wave
    h = zero_field(lat, "sym2")
    for i, s in [(lat.mode_index((1, 0, 0)), 0.5), (lat.mode_index((-1, 0, 0)), 0.5)]:
        h.coeffs[i, 3] = s
        h.coeffs[i, 5] = -s
    return InitialDataPair(h, zero_field(lat, "sym2"), TORUS)


def gauge_residual_norm(bg, lat, t, U, Ud):
    D0, D1 = family_matrices(bg, "div_trace_reversed", t, lat.modes)
    G = np.einsum("kij,kj->ki", D0, U) + np.einsum("kij,kj->ki", D1, Ud)
    return float(np.max(np.abs(G)))


def test_build_cauchy_jet_zero_and_mismatch():
    z = InitialDataPair(zero_field(LAT, "sym2"), zero_field(LAT, "sym2"), TORUS)
    jet = build_cauchy_jet(z, MINK)
    assert all(
        np.max(np.abs(getattr(jet, b).coeffs)) == 0.0
        for b in ("h_nn", "h_n", "h_sp", "dh_nn", "dh_n", "dh_sp")
    )
    zk = InitialDataPair(zero_field(LAT, "sym2"), zero_field(LAT, "sym2"), KSLICE)
    with pytest.raises(ValueError):
        build_cauchy_jet(zk, MINK)  # Kasner slice on a Minkowski background


def test_jet_normal_velocity_is_divergence_of_trace_reversal():
    rng = np.random.default_rng(0)
    h = random_field(LAT, "sym2", rng)
    pair = InitialDataPair(h, zero_field(LAT, "sym2"), TORUS)
    jet = build_cauchy_jet(pair, MINK)
    hbar = apply_slice_operator(TORUS, "trace_reverse", h)
    div = apply_slice_operator(TORUS, "divergence", hbar)
    assert np.max(np.abs(jet.dh_n.coeffs - div.coeffs)) < 1e-13
    U, Ud = nu_jet_conversion(jet)
    assert gauge_residual_norm(MINK, LAT, 0.0, U, Ud) < 1e-12


def test_jet_gauge_residual_vanishes_on_kasner():
    # the slice gauge residual vanishes for ANY pair, including all k~ terms
    rng = np.random.default_rng(1)
    pair = InitialDataPair(
        random_field(LAT, "sym2", rng), random_field(LAT, "sym2", rng), KSLICE
    )
    jet = build_cauchy_jet(pair, KAS)
    U, Ud = nu_jet_conversion(jet)
    assert gauge_residual_norm(KAS, LAT, 1.0, U, Ud) < 1e-10


def test_evolve_zero_and_validation():
    z = InitialDataPair(zero_field(LAT, "sym2"), zero_field(LAT, "sym2"), TORUS)
    traj = evolve(build_cauchy_jet(z, MINK), 3.0)
    assert np.max(np.abs(traj.states)) == 0.0
    zk = InitialDataPair(zero_field(LAT, "sym2"), zero_field(LAT, "sym2"), KSLICE)
    jet = build_cauchy_jet(zk, KAS)
    with pytest.raises(ValueError):
        evolve(jet, 2.0)  # Kasner needs dt
    with pytest.raises(ValueError):
        evolve(jet, 2.0, dt=-0.1)
    with pytest.raises(ValueError):
        evolve(jet, -1.0, dt=0.1)  # would cross the singularity


def test_minkowski_standing_wave_period():
    jet = build_cauchy_jet(standing_wave_pair(LAT), MINK)
    traj = evolve(jet, 2 * np.pi, sample_times=[0.0, np.pi, 2 * np.pi])
    assert np.max(np.abs(traj.states[-1] - traj.states[0])) < 1e-12
    assert np.max(np.abs(traj.states[1] + traj.states[0])) < 1e-12  # half period flips


def test_kasner_integrator_is_fourth_order():
    rng = np.random.default_rng(2)
    lat = ModeLattice(3, 1)
    pair = InitialDataPair(
        random_field(lat, "sym2", rng), random_field(lat, "sym2", rng), KSLICE
    )
    jet = build_cauchy_jet(pair, KAS)
    ref = evolve(jet, 1.5, dt=1e-3 / 8, sample_times=[1.0, 1.5])
    d = {}
    for dt in (2e-3, 1e-3):
        got = evolve(jet, 1.5, dt=dt, sample_times=[1.0, 1.5])
        d[dt] = np.max(np.abs(got.states[-1] - ref.states[-1]))
    assert d[2e-3] / d[1e-3] >= 14.0


def test_minkowski_diagnostics_on_gauge_data():
    rng = np.random.default_rng(3)
    N = SpectralField(LAT, "scalar", hermitian_pair(LAT, rng, 1))
    beta = SpectralField(LAT, "one-form", hermitian_pair(LAT, rng, 3))
    gp = gauge_producing_data(N, beta, TORUS)
    traj = evolve(build_cauchy_jet(gp, MINK), 10.0, sample_times=np.linspace(0, 10, 6))
    diag = diagnostics(traj)
    assert diag.gauge_residual.max() < 1e-12
    assert diag.dphi1_residual.max() < 1e-12
    assert diag.dphi2_residual.max() < 1e-12
    # the wave energy is constant under the exact propagator
    assert np.ptp(diag.energies[:, 0]) < 1e-12 * diag.energies[0, 0]


def test_constraint_violating_data_break_gauge_propagation():
    # nonzero div(m~ - (tr m~) g~) means nonzero nabla_nu (div hbar) on the
    # slice: the residual starts at zero and grows
    lat = ModeLattice(3, 1)
    m = zero_field(lat, "sym2")
    m.coeffs[lat.mode_index((1, 0, 0)), 3] = 0.5
    m.coeffs[lat.mode_index((-1, 0, 0)), 3] = 0.5  # cos x^1 dx^2 dx^2
    pair = InitialDataPair(zero_field(lat, "sym2"), m, TORUS)
    traj = evolve(build_cauchy_jet(pair, MINK), 1.0, sample_times=[0.0, 1.0])
    diag = diagnostics(traj)
    assert diag.gauge_residual[0] < 1e-13
    assert diag.gauge_residual[1] > 1e2 * max(diag.gauge_residual[0], 1e-15)


def test_kasner_gauge_and_constraint_propagation():
    rng = np.random.default_rng(4)
    lat = ModeLattice(3, 1)
    N = SpectralField(lat, "scalar", hermitian_pair(lat, rng, 1))
    beta = SpectralField(lat, "one-form", hermitian_pair(lat, rng, 3))
    gp = gauge_producing_data(N, beta, KSLICE)
    traj = evolve(
        build_cauchy_jet(gp, KAS), 1.5, dt=1e-3, sample_times=np.linspace(1.0, 1.5, 3)
    )
    diag = diagnostics(traj)
    assert diag.gauge_residual.max() < 1e-8
    assert diag.dphi1_residual.max() < 1e-8
    assert diag.dphi2_residual.max() < 1e-8


def test_extract_round_trip_and_errors():
    rng = np.random.default_rng(5)
    pair = InitialDataPair(
        random_field(LAT, "sym2", rng), random_field(LAT, "sym2", rng), TORUS
    )
    traj = evolve(build_cauchy_jet(pair, MINK), 2.0, sample_times=[0.0, 1.0, 2.0])
    back = extract_induced_data(traj, 0.0)
    assert np.max(np.abs(back.h.coeffs - pair.h.coeffs)) < 1e-13
    assert np.max(np.abs(back.m.coeffs - pair.m.coeffs)) < 1e-13
    with pytest.raises(ValueError):
        extract_induced_data(traj, 5.0)
    mid = extract_induced_data(traj, 0.5)  # dense output between samples
    assert np.isfinite(mid.h.coeffs).all()


def test_gauge_recovery_on_difference_trajectory():
    # h = evolved gauge data minus the exact Lie_W g trajectory has zero
    # induced data; the theorem's V must reproduce it
    rng = np.random.default_rng(6)
    W0 = hermitian_pair(LAT, rng, 4)
    Wd0 = hermitian_pair(LAT, rng, 4)
    N = SpectralField(LAT, "scalar", -W0[:, :1])
    beta = SpectralField(LAT, "one-form", W0[:, 1:])
    gp = gauge_producing_data(N, beta, TORUS)
    times = np.linspace(0.0, 10.0, 6)
    trh = evolve(build_cauchy_jet(gp, MINK), 10.0, sample_times=times)
    trg = lie_trajectory(MINK, LAT, times, W0, Wd0)
    w = trajectory_difference(trh, trg)
    rec = recover_gauge_vector(w)
    assert rec.relative_deviation.max() < 1e-10


def test_gauge_recovery_on_kasner():
    rng = np.random.default_rng(7)
    lat = ModeLattice(3, 1)
    W0 = hermitian_pair(lat, rng, 4)
    Wd0 = hermitian_pair(lat, rng, 4)
    N = SpectralField(lat, "scalar", -W0[:, :1])
    beta = SpectralField(lat, "one-form", W0[:, 1:])
    gp = gauge_producing_data(N, beta, KSLICE)
    times = np.linspace(1.0, 1.5, 3)
    trh = evolve(build_cauchy_jet(gp, KAS), 1.5, dt=2e-3, sample_times=times)
    trg = lie_trajectory(KAS, lat, times, W0, Wd0, dt=2e-3)
    w = trajectory_difference(trh, trg)
    rec = recover_gauge_vector(w)
    assert rec.relative_deviation.max() < 1e-8


def test_tt_wave_is_not_gauge():
    jet = build_cauchy_jet(standing_wave_pair(LAT), MINK)
    traj = evolve(jet, 2.0, sample_times=[0.0, 1.0, 2.0])
    rec = recover_gauge_vector(traj)
    assert rec.relative_deviation.min() >= 0.9


def test_zero_recovery():
    z = InitialDataPair(zero_field(LAT, "sym2"), zero_field(LAT, "sym2"), TORUS)
    traj = evolve(build_cauchy_jet(z, MINK), 1.0, sample_times=[0.0, 1.0])
    rec = recover_gauge_vector(traj)
    assert np.max(np.abs(rec.V)) == 0.0 and rec.deviation.max() == 0.0


def test_time_symmetry():
    rng = np.random.default_rng(8)
    pair = InitialDataPair(
        random_field(LAT, "sym2", rng), random_field(LAT, "sym2", rng), TORUS
    )
    jet = build_cauchy_jet(pair, MINK)
    U0, Ud0 = nu_jet_conversion(jet)
    fwd = evolve(jet, 7.3, sample_times=[0.0, 7.3])
    back = evolve_state(
        MINK, LAT, 7.3, fwd.states[-1], fwd.derivs[-1], 0.0, sample_times=[7.3, 0.0]
    )
    assert np.max(np.abs(back.states[-1] - U0)) < 1e-12
    assert np.max(np.abs(back.derivs[-1] - Ud0)) < 1e-12
    lat = ModeLattice(3, 1)
    pk = InitialDataPair(
        random_field(lat, "sym2", rng), random_field(lat, "sym2", rng), KSLICE
    )
    jk = build_cauchy_jet(pk, KAS)
    Uk, Udk = nu_jet_conversion(jk)
    fk = evolve(jk, 1.4, dt=2e-3, sample_times=[1.0, 1.4])
    bk = evolve_state(
        KAS, lat, 1.4, fk.states[-1], fk.derivs[-1], 1.0, dt=2e-3,
        sample_times=[1.4, 1.0],
    )
    assert np.max(np.abs(bk.states[-1] - Uk)) < 1e-9


def test_pipeline_linearity():
    rng = np.random.default_rng(9)
    lat = ModeLattice(3, 1)
    pairs = [
        InitialDataPair(
            random_field(lat, "sym2", rng), random_field(lat, "sym2", rng), TORUS
        )
        for _ in range(2)
    ]
    combo = InitialDataPair(
        SpectralField(lat, "sym2", 2.0 * pairs[0].h.coeffs - 0.5 * pairs[1].h.coeffs),
        SpectralField(lat, "sym2", 2.0 * pairs[0].m.coeffs - 0.5 * pairs[1].m.coeffs),
        TORUS,
    )
    ts = [0.0, 1.7]
    t0 = evolve(build_cauchy_jet(pairs[0], MINK), 1.7, sample_times=ts)
    t1 = evolve(build_cauchy_jet(pairs[1], MINK), 1.7, sample_times=ts)
    tc = evolve(build_cauchy_jet(combo, MINK), 1.7, sample_times=ts)
    assert np.max(np.abs(tc.states - 2.0 * t0.states + 0.5 * t1.states)) < 1e-12


def test_energy_rejects_large_j():
    with pytest.raises(ValueError):
        wave_energies(MINK, LAT, 0.0, np.zeros((LAT.num_modes, 10)),
                      np.zeros((LAT.num_modes, 10)), J=3)
