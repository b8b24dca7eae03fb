import numpy as np
import pytest

from linwave.fields import ModeLattice, random_field
from linwave.spacetime import (
    CauchyJet,
    assemble_mode_operator,
    fd_d_ric,
    fd_lichnerowicz,
    fd_ricci,
    jet_add,
    jet_d_ric,
    jet_div_trace_reversed,
    jet_lichnerowicz,
    jet_lie_of_g,
    jet_matrices,
    nu_jet_conversion,
    spacetime_background,
    st_pairs,
    state_to_nu_jet,
    unknown_jet,
)

KASNER_P = (2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0)
MINK = spacetime_background("minkowski-torus", n=3)
KAS = spacetime_background("kasner", p=KASNER_P)
K = np.array([2.0, -1.0, 3.0])
PAIRS = st_pairs(4)


def quadratic_mode(rng, t0, k):
    """An exact quadratic-in-t mode solution candidate and its callable."""
    u = [rng.standard_normal(10) + 1j * rng.standard_normal(10) for _ in range(3)]

    def h_fn(x):
        dt = x[0] - t0
        vec = u[0] + u[1] * dt + 0.5 * u[2] * dt * dt
        full = np.zeros((4, 4), complex)
        for c, (a, b) in enumerate(PAIRS):
            full[a, b] = vec[c]
            full[b, a] = vec[c]
        return full * np.exp(1j * (k @ x[1:]))

    return u, h_fn


def test_background_validation():
    with pytest.raises(ValueError):
        spacetime_background("kasner", p=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        KAS.metric_derivs(0.0, 1)


def test_backgrounds_are_vacuum():
    rng = np.random.default_rng(0)
    assert np.max(np.abs(MINK.ricci(3.0))) == 0.0
    for t in 0.2 + 3 * rng.random(20):
        assert np.max(np.abs(KAS.ricci(t))) < 1e-10


def test_fd_ricci_on_known_curved_metric():
    # flat FLRW with a(t) = t: Ric = diag(0, 2, 2, 2) by hand
    flrw = lambda x: np.diag([-1.0, x[0] ** 2, x[0] ** 2, x[0] ** 2])
    ric = fd_ricci(flrw, np.array([1.3, 0.2, 0.5, -0.1]))
    assert np.max(np.abs(ric - np.diag([0.0, 2.0, 2.0, 2.0]))) < 1e-8


def test_fd_ricci_kasner_vacuum():
    for x in [np.array([1.2, 0.1, 0.2, 0.3]), np.array([0.7, -0.4, 0.0, 1.0])]:
        assert np.max(np.abs(fd_ricci(KAS.metric_fn, x))) < 1e-8


def test_minkowski_lichnerowicz_is_flat_wave_symbol():
    op = assemble_mode_operator(MINK, "lichnerowicz", K)
    M0, M1, M2 = op.matrices(0.0)
    assert np.max(np.abs(M2 - np.eye(10))) == 0.0
    assert np.max(np.abs(M1)) == 0.0
    assert np.max(np.abs(M0 - np.sum(K ** 2) * np.eye(10))) == 0.0


def test_minkowski_zero_mode_is_second_derivative_only():
    op = assemble_mode_operator(MINK, "lichnerowicz", np.zeros(3))
    M0, M1, M2 = op.matrices(0.0)
    assert np.max(np.abs(M0)) == 0.0 and np.max(np.abs(M1)) == 0.0
    assert np.max(np.abs(M2 - np.eye(10))) == 0.0


def test_minkowski_lie_matches_hand_formula():
    rng = np.random.default_rng(1)
    op = assemble_mode_operator(MINK, "lie_of_g", K)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    vd = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    res = op.apply(0.0, [v, vd])
    kx = np.r_[0.0, K]
    hand = np.array([1j * kx[a] * v[b] + 1j * kx[b] * v[a] for a, b in PAIRS])
    hand += np.array(
        [(vd[b] if a == 0 else 0) + (vd[a] if b == 0 else 0) for a, b in PAIRS]
    )
    assert np.max(np.abs(res - hand)) < 1e-14


def test_kasner_lichnerowicz_against_fd_oracle():
    rng = np.random.default_rng(2)
    t0 = 1.2
    x = np.array([t0, 0.1, 0.2, 0.3])
    u, h_fn = quadratic_mode(rng, t0, K)
    ph = np.exp(1j * (K @ x[1:]))
    op = assemble_mode_operator(KAS, "lichnerowicz", K)
    got = op.apply(t0, [ui * ph for ui in u])
    fd = fd_lichnerowicz(KAS.metric_fn, h_fn, x)
    want = np.array([fd[a, b] for a, b in PAIRS])
    assert np.max(np.abs(got - want)) < 1e-6 * np.max(np.abs(want))


def test_kasner_d_ric_against_fd_oracle():
    rng = np.random.default_rng(3)
    t0 = 1.2
    x = np.array([t0, -0.2, 0.4, 0.1])
    u, h_fn = quadratic_mode(rng, t0, K)
    ph = np.exp(1j * (K @ x[1:]))
    op = assemble_mode_operator(KAS, "d_ric", K)
    got = op.apply(t0, [ui * ph for ui in u])
    fd = fd_d_ric(KAS.metric_fn, h_fn, x)
    want = np.array([fd[a, b] for a, b in PAIRS])
    assert np.max(np.abs(got - want)) < 1e-6 * np.max(np.abs(want))


def test_gauge_solutions_in_kernel_of_d_ric():
    for bg, t in [(MINK, 0.0), (KAS, 1.4)]:
        V = unknown_jet(bg, t, K, "one-form", 5)
        mats = jet_matrices(jet_d_ric(jet_lie_of_g(V)))
        assert max(np.max(np.abs(m)) for m in mats) < 1e-12


def test_d_ric_decomposes_into_lichnerowicz_plus_lie():
    # DRic h = (1/2)(box_L h + Lie_{(div hbar)#} g) for arbitrary h
    for bg, t in [(MINK, 0.0), (KAS, 1.4)]:
        H = unknown_jet(bg, t, K, "sym2", 5)
        lie = jet_lie_of_g(jet_div_trace_reversed(H))
        rhs = jet_add(jet_lichnerowicz(H), lie, 0.5, 0.5)
        resid = jet_add(jet_d_ric(H), rhs, 1.0, -1.0)
        assert np.max(np.abs(resid.data[0])) < 1e-12


def test_killing_wave_identity():
    for bg, t in [(MINK, 0.0), (KAS, 1.4)]:
        op = assemble_mode_operator(bg, "killing_wave", K)
        assert max(np.max(np.abs(m)) for m in op.matrices(t)) < 1e-12


def test_nu_jet_round_trip():
    rng = np.random.default_rng(4)
    lat = ModeLattice(3, 2)
    jet = CauchyJet(
        KAS, 1.2,
        random_field(lat, "scalar", rng), random_field(lat, "one-form", rng),
        random_field(lat, "sym2", rng), random_field(lat, "scalar", rng),
        random_field(lat, "one-form", rng), random_field(lat, "sym2", rng),
    )
    U, Ud = nu_jet_conversion(jet)
    back = state_to_nu_jet(KAS, 1.2, lat, U, Ud)
    for name in ("h_nn", "h_n", "h_sp", "dh_nn", "dh_n", "dh_sp"):
        a, b = getattr(back, name), getattr(jet, name)
        assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13


def test_nu_conversion_is_identity_on_minkowski():
    rng = np.random.default_rng(5)
    lat = ModeLattice(3, 1)
    jet = CauchyJet(
        MINK, 0.0,
        random_field(lat, "scalar", rng), random_field(lat, "one-form", rng),
        random_field(lat, "sym2", rng), random_field(lat, "scalar", rng),
        random_field(lat, "one-form", rng), random_field(lat, "sym2", rng),
    )
    U, Ud = nu_jet_conversion(jet)
    sp = jet.h_sp.coeffs
    assert np.max(np.abs(U[:, -6:] - sp)) == 0.0  # tangential block copied
    # with zero Christoffels, dU/dt equals the nabla_nu blocks verbatim
    assert np.max(np.abs(Ud[:, 0] - jet.dh_nn.coeffs[:, 0])) == 0.0


def test_mode_operator_rejects_unknown_kind():
    with pytest.raises(ValueError):
        assemble_mode_operator(MINK, "bogus", K)
