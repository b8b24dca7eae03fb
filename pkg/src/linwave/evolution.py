"""Cauchy evolution of the gauge-fixed linearised Einstein equation.

Given slice data (h~, m~), the gauge choice

    h(X,Y) = h~(X,Y),  h(nu,X) = 0,  h(nu,nu) = 0,
    nabla_nu h(X,Y)  = 2 m~(X,Y) - (h~ o k~ + k~ o h~)(X,Y),
    nabla_nu h(nu,X) = div(h~ - 1/2 (tr h~) g~)(X),
    nabla_nu h(nu,nu) = -2 tr m~,

produces a jet with vanishing harmonic-gauge residual on the slice; the
wave equation box_L h = 0 then propagates both the gauge condition and the
linearised constraints.  Each Fourier mode evolves independently: in
closed form on the Minkowski torus, by a classical 4th-order one-step
integrator on Kasner.  Diagnostics track the gauge residual, the
constraint residuals of the induced data, and per-mode wave energies;
the gauge vector field of a pure-gauge solution is recovered by solving
the connection wave equation nabla*nabla V = -div(hbar).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .constraints import InitialDataPair, dphi
from .fields import SpectralField, component_weights, sym2_index_pairs, zero_field
from .slices import _full_from_sym2, _sym2_from_full
from .spacetime import (
    CauchyJet,
    FamilyAction,
    SpacetimeBackground,
    family_matrices,
    induced_data_state,
    nu_jet_conversion,
    st_ncomp,
    st_pairs,
)

SLICE_MATCH_TOL = 1e-12


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass
class ModeTrajectory:
    """Samples of one Fourier mode of the solution and its t-derivative."""

    background: SpacetimeBackground
    k: tuple
    times: np.ndarray
    states: np.ndarray  # (T, ncomp)
    derivs: np.ndarray  # (T, ncomp)


@dataclass
class Trajectory:
    """Per-mode solution samples for a whole lattice of modes."""

    background: SpacetimeBackground
    lattice: object
    times: np.ndarray
    states: np.ndarray  # (T, num_modes, ncomp)
    derivs: np.ndarray
    dt: float | None = None  # None marks the exact (Minkowski) propagator

    def mode(self, k) -> ModeTrajectory:
        i = self.lattice.mode_index(tuple(k))
        return ModeTrajectory(
            self.background, tuple(k), self.times, self.states[:, i], self.derivs[:, i]
        )

    def state_at(self, tau: float):
        """Dense output: exact formula on Minkowski, re-integration on Kasner."""
        lo, hi = min(self.times[0], self.times[-1]), max(self.times[0], self.times[-1])
        if not lo - 1e-12 <= tau <= hi + 1e-12:
            raise ValueError(f"time {tau} outside trajectory range [{lo}, {hi}]")
        hit = np.nonzero(np.isclose(self.times, tau, rtol=0, atol=1e-12))[0]
        if len(hit):
            i = hit[0]
            return self.states[i].copy(), self.derivs[i].copy()
        if self.dt is None:
            return _minkowski_state(
                self.lattice, self.states[0], self.derivs[0], tau - self.times[0]
            )
        direction = np.sign(self.times[-1] - self.times[0]) or 1.0
        behind = (tau - self.times) * direction >= 0
        i = int(np.argmin(np.where(behind, np.abs(tau - self.times), np.inf)))
        return _integrate_segment(
            self.background, self.lattice, self.times[i],
            self.states[i], self.derivs[i], tau, self.dt,
        )


@dataclass
class DiagnosticsSeries:
    """Gauge residual, constraint residuals, and energies along a run."""

    times: np.ndarray
    gauge_residual: np.ndarray
    dphi1_residual: np.ndarray
    dphi2_residual: np.ndarray
    energies: np.ndarray  # (T, J+1)


@dataclass
class GaugeRecovery:
    """Recovered gauge one-form V and the deviation ||h - Lie_V g||."""

    times: np.ndarray
    V: np.ndarray  # (T, num_modes, dim)
    Vdot: np.ndarray
    deviation: np.ndarray
    relative_deviation: np.ndarray
    report: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# Building the Cauchy jet from slice data
# ---------------------------------------------------------------------------


def build_cauchy_jet(pair: InitialDataPair, background: SpacetimeBackground,
                     t0: float | None = None) -> CauchyJet:
    """Gauge-choice jet for slice data (h~, m~); see the module docstring."""
    geom = pair.geom
    if not geom.is_torus:
        raise ValueError("evolution operates on torus backgrounds")
    if t0 is None:
        t0 = float(geom.params.get("t0", 0.0)) if geom.kind == "kasner" else 0.0
    ref = background.slice_at(t0)
    if (
        np.max(np.abs(ref.metric - geom.metric)) > SLICE_MATCH_TOL
        or np.max(np.abs(ref.extrinsic - geom.extrinsic)) > SLICE_MATCH_TOL
    ):
        raise ValueError("initial-data slice does not match the background slice")
    lat = pair.h.lattice
    n = geom.n
    gi = geom.metric_inv
    K = geom.extrinsic
    h = _full_from_sym2(pair.h.coeffs, n)
    m = _full_from_sym2(pair.m.coeffs, n)
    tr_h = np.einsum("ab,kab->k", gi, h)
    tr_m = np.einsum("ab,kab->k", gi, m)
    kup = lat.modes.astype(float) @ gi.T
    hbar = h - 0.5 * tr_h[:, None, None] * geom.metric[None]
    div_hbar = 1j * np.einsum("ka,kab->kb", kup, hbar)
    hk = np.einsum("kab,bc,cd->kad", h, gi, K)
    mix = hk + np.transpose(hk, (0, 2, 1))  # h~ o k~ + k~ o h~
    return CauchyJet(
        background,
        t0,
        zero_field(lat, "scalar"),
        zero_field(lat, "one-form"),
        SpectralField(lat, "sym2", pair.h.coeffs.copy()),
        SpectralField(lat, "scalar", -2.0 * tr_m[:, None]),
        SpectralField(lat, "one-form", div_hbar),
        SpectralField(lat, "sym2", _sym2_from_full(2.0 * m - mix, n)),
    )


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def _minkowski_state(lattice, U0, Ud0, s):
    """Closed-form wave propagation: each component is a harmonic oscillator
    with frequency |k| (A + B s on the zero mode)."""
    k2 = np.einsum("ma,ma->m", lattice.modes.astype(float), lattice.modes.astype(float))
    w = np.sqrt(k2)
    nz = w > 0
    c = np.cos(w * s)[:, None]
    U = c * U0
    Ud = c * Ud0
    sinc = np.zeros_like(w)
    sinc[nz] = np.sin(w[nz] * s) / w[nz]
    U += sinc[:, None] * Ud0
    U[~nz] += s * Ud0[~nz]
    Ud[nz] += -(w[nz] * np.sin(w[nz] * s))[:, None] * U0[nz]
    return U, Ud


def _wave_matrices(bg: SpacetimeBackground, lattice, t: float):
    W0, W1, W2 = family_matrices(bg, "lichnerowicz", t, lattice.modes)
    eye = np.eye(W2.shape[1])
    if np.max(np.abs(W2 - eye[None])) > 1e-12:
        raise ValueError("wave operator is not monic in d/dt")
    return W0, W1


def _integrate_segment(bg, lattice, t0, U0, Ud0, t1, dt):
    """Classical RK4 on the first-order mode system from t0 to t1."""
    span = t1 - t0
    steps = max(1, int(np.ceil(abs(span) / dt - 1e-12)))
    h = span / steps
    U, Ud = U0.copy(), Ud0.copy()
    t = t0
    cache: dict[float, tuple] = {}

    def mats(tt):
        key = round(tt, 14)
        if key not in cache:
            if len(cache) > 6:
                cache.clear()
            act = FamilyAction(bg, "lichnerowicz", tt, lattice.modes)
            if not act.is_monic():
                raise ValueError("wave operator is not monic in d/dt")
            cache[key] = act
        return cache[key]

    def acc(tt, u, ud):
        act = mats(tt)
        return -(act.apply(1, ud) + act.apply(0, u))

    for _ in range(steps):
        k1u, k1v = Ud, acc(t, U, Ud)
        k2u, k2v = Ud + 0.5 * h * k1v, acc(t + 0.5 * h, U + 0.5 * h * k1u, Ud + 0.5 * h * k1v)
        k3u, k3v = Ud + 0.5 * h * k2v, acc(t + 0.5 * h, U + 0.5 * h * k2u, Ud + 0.5 * h * k2v)
        k4u, k4v = Ud + h * k3v, acc(t + h, U + h * k3u, Ud + h * k3v)
        U = U + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        Ud = Ud + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        t += h
    return U, Ud


def evolve_state(bg: SpacetimeBackground, lattice, t0: float, U0, Ud0,
                 t_end: float, dt: float | None = None,
                 sample_times=None) -> Trajectory:
    """Evolve a per-mode state of box_L h = 0 from t0 to t_end."""
    if sample_times is None:
        sample_times = np.linspace(t0, t_end, 11)
    sample_times = np.asarray(sample_times, float)
    if bg.kind == "minkowski-torus" and dt is None:
        states, derivs = [], []
        for tau in sample_times:
            U, Ud = _minkowski_state(lattice, U0, Ud0, tau - t0)
            states.append(U)
            derivs.append(Ud)
        return Trajectory(bg, lattice, sample_times, np.array(states), np.array(derivs))
    if dt is None or dt <= 0:
        raise ValueError("time-dependent backgrounds need a positive dt")
    if bg.kind == "kasner" and (min(t0, t_end) <= 0 or np.min(sample_times) <= 0):
        raise ValueError("Kasner evolution cannot reach the singularity t <= 0")
    states, derivs = [], []
    U, Ud, t = U0.copy(), Ud0.copy(), t0
    for tau in sample_times:
        if not np.isclose(tau, t, rtol=0, atol=1e-14):
            U, Ud = _integrate_segment(bg, lattice, t, U, Ud, tau, dt)
            t = tau
        states.append(U.copy())
        derivs.append(Ud.copy())
    return Trajectory(bg, lattice, sample_times, np.array(states), np.array(derivs), dt=dt)


def evolve(jet: CauchyJet, t_end: float, dt: float | None = None,
           sample_times=None) -> Trajectory:
    """Evolve a Cauchy jet; exact per-mode formula on Minkowski when dt is
    omitted, fixed-step 4th-order integration otherwise."""
    U0, Ud0 = nu_jet_conversion(jet)
    return evolve_state(
        jet.background, jet.lattice, jet.t0, U0, Ud0, t_end, dt, sample_times
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def _st_weights(dim: int) -> np.ndarray:
    return component_weights("sym2", dim)


def _coeff_norm(arr: np.ndarray, weights=None) -> float:
    """Coefficient l2 norm with component multiplicities; np.sum uses
    pairwise summation, which keeps the reduction deterministic."""
    sq = np.abs(arr) ** 2
    if weights is not None:
        sq = sq * weights
    return float(np.sqrt(np.sum(sq)))


def wave_energies(bg: SpacetimeBackground, lattice, t: float, U, Ud,
                  sobolev_order: float = 0.0, J: int = 1) -> np.ndarray:
    """Conserved-type wave energies

        E_j^2 = sum_k (1+|k|^2)^(s-j) sum_c w_c (|k|^2 |u_k^(j)|^2 + |u_k^(j+1)|^2)

    for j = 0..J (J <= 1); on the Minkowski torus each mode term is the
    exact harmonic-oscillator energy and E_j is constant in time.
    """
    if J not in (0, 1):
        raise ValueError("energies are available for J in {0, 1}")
    k = lattice.modes.astype(float)
    k2 = np.einsum("ma,ma->m", k, k)
    w = _st_weights(bg.dim)
    stack = [U, Ud]
    if J >= 1:
        W0, W1 = _wave_matrices(bg, lattice, t)
        Udd = -(np.einsum("kij,kj->ki", W1, Ud) + np.einsum("kij,kj->ki", W0, U))
        stack.append(Udd)
    out = []
    for j in range(J + 1):
        mult = (1.0 + k2) ** (sobolev_order - j)
        dens = np.einsum(
            "c,kc->k", w, k2[:, None] * np.abs(stack[j]) ** 2 + np.abs(stack[j + 1]) ** 2
        )
        out.append(float(np.sqrt(np.sum(mult * dens))))
    return np.array(out)


def diagnostics(traj: Trajectory, sobolev_order: float = 0.0,
                J: int = 1) -> DiagnosticsSeries:
    """Gauge residual ||div hbar||, constraint residuals of the induced data,
    and wave energies at every stored sample time."""
    bg = traj.background
    lat = traj.lattice
    gauge, d1, d2, en = [], [], [], []
    for i, t in enumerate(traj.times):
        U, Ud = traj.states[i], traj.derivs[i]
        D0, D1 = family_matrices(bg, "div_trace_reversed", t, lat.modes)
        G = np.einsum("kij,kj->ki", D0, U) + np.einsum("kij,kj->ki", D1, Ud)
        gauge.append(_coeff_norm(G))
        htilde, mtilde = induced_data_state(bg, t, lat, U, Ud)
        res = dphi(InitialDataPair(htilde, mtilde, bg.slice_at(t)))
        d1.append(res.norms["dphi1_H0"])
        d2.append(res.norms["dphi2_H1"])
        en.append(wave_energies(bg, lat, t, U, Ud, sobolev_order, J))
    return DiagnosticsSeries(
        traj.times.copy(), np.array(gauge), np.array(d1), np.array(d2), np.array(en)
    )


def extract_induced_data(traj: Trajectory, tau: float) -> InitialDataPair:
    """Induced slice data (h~(tau), m~(tau)) of an evolved solution."""
    U, Ud = traj.state_at(tau)
    bg = traj.background
    htilde, mtilde = induced_data_state(bg, tau, traj.lattice, U, Ud)
    return InitialDataPair(htilde, mtilde, bg.slice_at(tau))


# ---------------------------------------------------------------------------
# Gauge-vector recovery
# ---------------------------------------------------------------------------


def _gauge_initial_state(bg: SpacetimeBackground, lattice, t0, U0):
    """V|_Sigma = 0 and nabla_nu V|_Sigma = 1/2 h(nu,nu) nu + h(nu,.)#,
    written as the coordinate one-form state (V, dV/dt)."""
    dim = bg.dim
    pairs = st_pairs(dim)
    num = U0.shape[0]
    V0 = np.zeros((num, dim), complex)
    Vd0 = np.zeros((num, dim), complex)
    h00 = U0[:, pairs.index((0, 0))]
    Vd0[:, 0] = 0.5 * h00  # (1/2 h(nu,nu) nu)^flat_0 + h_00 = -1/2 h00 + h00
    for i in range(1, dim):
        Vd0[:, i] = U0[:, pairs.index((0, i))]
    # V = 0 on the slice, so the Christoffel correction to dV/dt vanishes
    return V0, Vd0


def recover_gauge_vector(traj: Trajectory) -> GaugeRecovery:
    """Solve nabla*nabla V = -div(hbar), V|_Sigma = 0, with the slice
    velocity above, and report ||h - Lie_V g|| along the trajectory."""
    bg = traj.background
    lat = traj.lattice
    times = traj.times
    t0 = times[0]
    V, Vd = _gauge_initial_state(bg, lat, t0, traj.states[0])
    wsym = _st_weights(bg.dim)
    if traj.dt is None:
        Vs, Vds = _recover_minkowski(bg, lat, traj, V, Vd)
    else:
        Vs, Vds = _recover_kasner(bg, lat, traj, V, Vd)
    dev, rel = [], []
    for i, t in enumerate(times):
        L0, L1 = family_matrices(bg, "lie_of_g", t, lat.modes)
        lie = np.einsum("kij,kj->ki", L0, Vs[i]) + np.einsum("kij,kj->ki", L1, Vds[i])
        diff = traj.states[i] - lie
        d = _coeff_norm(diff, wsym)
        s = _coeff_norm(traj.states[i], wsym)
        dev.append(d)
        rel.append(d / max(s, 1e-30))
    return GaugeRecovery(
        times.copy(), np.array(Vs), np.array(Vds), np.array(dev), np.array(rel)
    )


def _recover_minkowski(bg, lat, traj, V0, Vd0):
    """Exact solve on Minkowski: the source -div(hbar) per mode is itself a
    frequency-|k| oscillation, so the resonant Duhamel integral is explicit."""
    k = lat.modes.astype(float)
    k2 = np.einsum("ma,ma->m", k, k)
    w = np.sqrt(k2)
    nz = w > 0
    U0, Ud0 = traj.states[0], traj.derivs[0]
    D0, D1 = family_matrices(bg, "div_trace_reversed", traj.times[0], lat.modes)
    # S(t) = A cos(w s) + B sin(w s) with the harmonic evolution of (U, Ud)
    A = -(np.einsum("kij,kj->ki", D0, U0) + np.einsum("kij,kj->ki", D1, Ud0))
    B = np.zeros_like(A)
    B[nz] = -(
        np.einsum("kij,kj->ki", D0[nz], Ud0[nz]) / w[nz][:, None]
        - w[nz][:, None] * np.einsum("kij,kj->ki", D1[nz], U0[nz])
    )
    S1 = -np.einsum("kij,kj->ki", D0[~nz], Ud0[~nz])  # zero mode: S = A + S1 s
    Vs, Vds = [], []
    for tau in traj.times:
        s = tau - traj.times[0]
        c = np.cos(w * s)[:, None]
        sn = np.sin(w * s)[:, None]
        V = c * V0
        Vd = c * Vd0
        sinc = np.zeros_like(w)
        sinc[nz] = np.sin(w[nz] * s) / w[nz]
        V += sinc[:, None] * Vd0
        Vd[nz] += -(w[nz][:, None] * sn[nz]) * V0[nz]
        # resonant particular solution with zero initial value and velocity
        wn = w[nz][:, None]
        V[nz] += A[nz] * s * sn[nz] / (2 * wn) + B[nz] * (sn[nz] - wn * s * c[nz]) / (
            2 * wn ** 2
        )
        Vd[nz] += (
            A[nz] * (sn[nz] + wn * s * c[nz]) / (2 * wn) + B[nz] * s * sn[nz] / 2
        )
        V[~nz] += s * Vd0[~nz] + A[~nz] * s ** 2 / 2 + S1 * s ** 3 / 6
        Vd[~nz] += A[~nz] * s + S1 * s ** 2 / 2
        Vs.append(V)
        Vds.append(Vd)
    return Vs, Vds


def _recover_kasner(bg, lat, traj, V0, Vd0):
    """Joint 4th-order integration of (h, V): the source of the connection
    wave equation is evaluated from the co-evolved h state at every stage."""
    dt = traj.dt
    cache: dict[float, tuple] = {}

    def mats(t):
        key = round(t, 14)
        if key not in cache:
            if len(cache) > 6:
                cache.clear()
            wave = FamilyAction(bg, "lichnerowicz", t, lat.modes)
            conn = FamilyAction(bg, "connection_wave", t, lat.modes)
            if not (wave.is_monic() and conn.is_monic()):
                raise ValueError("wave operator is not monic in d/dt")
            div = FamilyAction(bg, "div_trace_reversed", t, lat.modes)
            cache[key] = (wave, conn, div)
        return cache[key]

    def acc(t, y):
        U, Ud, V, Vd = y
        wave, conn, div = mats(t)
        Udd = -(wave.apply(1, Ud) + wave.apply(0, U))
        src = -(div.apply(0, U) + div.apply(1, Ud))
        Vdd = src - (conn.apply(1, Vd) + conn.apply(0, V))
        return (Ud, Udd, Vd, Vdd)

    def axpy(y, c, k):
        return tuple(a + c * b for a, b in zip(y, k))

    Vs, Vds = [V0.copy()], [Vd0.copy()]
    y = (traj.states[0].copy(), traj.derivs[0].copy(), V0.copy(), Vd0.copy())
    t = traj.times[0]
    for tau in traj.times[1:]:
        span = tau - t
        steps = max(1, int(np.ceil(abs(span) / dt - 1e-12)))
        h = span / steps
        for _ in range(steps):
            k1 = acc(t, y)
            k2 = acc(t + 0.5 * h, axpy(y, 0.5 * h, k1))
            k3 = acc(t + 0.5 * h, axpy(y, 0.5 * h, k2))
            k4 = acc(t + h, axpy(y, h, k3))
            y = tuple(
                a + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
            )
            t += h
        Vs.append(y[2].copy())
        Vds.append(y[3].copy())
    return Vs, Vds


# ---------------------------------------------------------------------------
# Pure-gauge trajectories (for recovery tests and end-to-end checks)
# ---------------------------------------------------------------------------


def lie_trajectory(bg: SpacetimeBackground, lattice, times, W0, Wd0,
                   dt: float | None = None) -> Trajectory:
    """The trajectory of h = Lie_W g, where the one-form W solves the
    connection wave equation nabla*nabla W = 0 from the jet (W0, Wd0).

    Such an h solves box_L h = 0, so this produces exact pure-gauge
    solutions to compare against.  Time derivatives of the assembled Lie
    operator matrices are taken by central differences (step 1e-6).
    """
    times = np.asarray(times, float)
    k2 = np.einsum("ma,ma->m", lattice.modes.astype(float), lattice.modes.astype(float))
    states, derivs = [], []
    W, Wd, t = W0.copy(), Wd0.copy(), times[0]
    for tau in times:
        if bg.kind == "minkowski-torus":
            W, Wd = _minkowski_state(lattice, W0, Wd0, tau - times[0])
        elif not np.isclose(tau, t, rtol=0, atol=1e-14):
            if dt is None or dt <= 0:
                raise ValueError("time-dependent backgrounds need a positive dt")
            W, Wd = _integrate_oneform_segment(bg, lattice, t, W, Wd, tau, dt)
            t = tau
        C0, C1, _ = family_matrices(bg, "connection_wave", tau, lattice.modes)
        Wdd = -(np.einsum("kij,kj->ki", C1, Wd) + np.einsum("kij,kj->ki", C0, W))
        L0, L1 = family_matrices(bg, "lie_of_g", tau, lattice.modes)
        eps = 1e-6
        L0p, L1p = family_matrices(bg, "lie_of_g", tau + eps, lattice.modes)
        L0m, L1m = family_matrices(bg, "lie_of_g", tau - eps, lattice.modes)
        dL0 = (L0p - L0m) / (2 * eps)
        dL1 = (L1p - L1m) / (2 * eps)
        h = np.einsum("kij,kj->ki", L0, W) + np.einsum("kij,kj->ki", L1, Wd)
        hd = (
            np.einsum("kij,kj->ki", dL0, W)
            + np.einsum("kij,kj->ki", L0, Wd)
            + np.einsum("kij,kj->ki", dL1, Wd)
            + np.einsum("kij,kj->ki", L1, Wdd)
        )
        states.append(h)
        derivs.append(hd)
    return Trajectory(bg, lattice, times, np.array(states), np.array(derivs), dt=dt)


def _integrate_oneform_segment(bg, lattice, t0, W0, Wd0, t1, dt):
    span = t1 - t0
    steps = max(1, int(np.ceil(abs(span) / dt - 1e-12)))
    h = span / steps
    W, Wd, t = W0.copy(), Wd0.copy(), t0
    cache: dict[float, tuple] = {}

    def acc(tt, u, ud):
        key = round(tt, 14)
        if key not in cache:
            if len(cache) > 6:
                cache.clear()
            cache[key] = FamilyAction(bg, "connection_wave", tt, lattice.modes)
        act = cache[key]
        return -(act.apply(1, ud) + act.apply(0, u))

    for _ in range(steps):
        k1u, k1v = Wd, acc(t, W, Wd)
        k2u, k2v = Wd + 0.5 * h * k1v, acc(t + 0.5 * h, W + 0.5 * h * k1u, Wd + 0.5 * h * k1v)
        k3u, k3v = Wd + 0.5 * h * k2v, acc(t + 0.5 * h, W + 0.5 * h * k2u, Wd + 0.5 * h * k2v)
        k4u, k4v = Wd + h * k3v, acc(t + h, W + h * k3u, Wd + h * k3v)
        W = W + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        Wd = Wd + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        t += h
    return W, Wd


def trajectory_difference(a: Trajectory, b: Trajectory) -> Trajectory:
    """Pointwise difference of two trajectories on the same samples."""
    if a.background is not b.background or a.lattice != b.lattice:
        raise ValueError("trajectories live on different backgrounds")
    if len(a.times) != len(b.times) or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise ValueError("trajectories have different sample times")
    return Trajectory(
        a.background, a.lattice, a.times.copy(),
        a.states - b.states, a.derivs - b.derivs, dt=a.dt or b.dt,
    )
