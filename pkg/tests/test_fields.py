import numpy as np
import pytest

from linwave.fields import (
    ModeLattice,
    SpectralField,
    analyze,
    component_weights,
    dirac_partial_sum,
    distributional_coefficients,
    evaluate_at,
    l2_inner,
    random_field,
    sobolev_norm,
    synthesize,
    zero_field,
)


def test_lattice_counts_and_lookup():
    lat = ModeLattice(3, 2)
    assert lat.num_modes == 5 ** 3
    assert np.array_equal(lat.modes[lat.mode_index((1, -2, 0))], (1, -2, 0))
    perm = lat.negation_permutation()
    assert np.array_equal(-lat.modes[perm], lat.modes)


def test_analyze_synthesize_round_trip():
    rng = np.random.default_rng(7)
    lat = ModeLattice(3, 4)
    f = random_field(lat, "sym2", rng)
    grid = synthesize(f, 16)
    g = analyze(grid, "sym2", lat)
    assert np.max(np.abs(g.coeffs - f.coeffs)) < 1e-12


def test_analyze_rejects_coarse_grid():
    lat = ModeLattice(2, 4)
    grid = np.zeros((8, 8, 1))
    with pytest.raises(ValueError):
        analyze(grid, "scalar", lat)


def test_synthesize_rejects_non_hermitian():
    lat = ModeLattice(2, 1)
    c = np.zeros((lat.num_modes, 1), complex)
    c[lat.mode_index((1, 0)), 0] = 1.0  # missing conjugate partner
    f = SpectralField(lat, "scalar", c)
    with pytest.raises(ValueError):
        synthesize(f, 8)


def test_point_evaluation_matches_grid():
    rng = np.random.default_rng(3)
    lat = ModeLattice(2, 3)
    f = random_field(lat, "one-form", rng)
    npts = 12
    grid = synthesize(f, npts)
    x = 2 * np.pi * np.array([2, 5]) / npts
    assert np.max(np.abs(evaluate_at(f, x) - grid[2, 5])) < 1e-12


def test_parseval_against_grid_quadrature():
    rng = np.random.default_rng(11)
    lat = ModeLattice(3, 3)
    f = random_field(lat, "sym2", rng)
    spectral = l2_inner(f, f)
    grid = synthesize(f, 12)
    w = component_weights("sym2", 3)
    quad = np.sum(grid ** 2 * w) * (2 * np.pi / 12) ** 3
    assert abs(spectral - quad) < 1e-10 * max(1.0, abs(spectral))


def test_sobolev_norm_of_constant_and_cosine():
    lat = ModeLattice(3, 2)
    one = zero_field(lat, "scalar")
    one.coeffs[lat.mode_index((0, 0, 0)), 0] = 1.0
    for s in (-2.0, 0.0, 1.5):
        assert abs(sobolev_norm(one, s) - 1.0) < 1e-14
    cos = zero_field(lat, "scalar")
    cos.coeffs[lat.mode_index((1, 0, 0)), 0] = 0.5
    cos.coeffs[lat.mode_index((-1, 0, 0)), 0] = 0.5
    n0 = sobolev_norm(cos, 0.0) ** 2
    for s in (-1.0, 2.0, 3.0):
        assert abs(sobolev_norm(cos, s) ** 2 / n0 - 2.0 ** s) < 1e-12


def test_dirac_line_distribution_membership():
    # order-n derivative of a line Dirac lies in H^{-n-1} but not H^{-n}:
    # the line partial sums are sum_m (1+m^2)^s m^{2n}
    n = 2
    order = n
    lat = ModeLattice(n, 40)
    f = distributional_coefficients(lat, order=order, axis=0, components=0, rank="scalar")
    lo = dirac_partial_sum(order, -n - 1.0, 10 ** 5)
    hi = dirac_partial_sum(order, -n - 1.0, 2 * 10 ** 5)
    assert abs(hi - lo) < 1e-4 * hi  # convergent tail
    div_lo = dirac_partial_sum(order, -float(n), 10 ** 4)
    div_hi = dirac_partial_sum(order, -float(n), 10 ** 5)
    assert div_hi > 5.0 * div_lo  # partial sums diverge linearly
    # truncated norms agree with the direct lattice computation
    direct = sobolev_norm(f, -n - 1.0)
    partial = np.sqrt(dirac_partial_sum(order, -n - 1.0, lat.nmax))
    assert abs(direct - partial) < 1e-12 * max(1.0, partial)


def test_hermitian_symmetry_of_random_fields():
    rng = np.random.default_rng(0)
    f = random_field(ModeLattice(3, 3), "sym2", rng)
    assert f.hermitian_defect() < 1e-15
