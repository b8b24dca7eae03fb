import numpy as np
import pytest

import linwave.invariant as inv


def geo(lam):
    return inv.invariant_geometry(inv.berger_frame(lam))


def test_round_sphere_curvature():
    g = geo(1.0)
    assert np.max(np.abs(g.ricci - 2 * np.eye(3))) < 1e-12
    assert abs(g.scal - 6.0) < 1e-12


def test_ricci_matches_milnor_oracle():
    for lam in (0.3, 1.0, 2.5, 4.0, 7.0):
        g = geo(lam)
        ric, scal = inv.milnor_ricci(np.array([lam, 1.0, 1.0]))
        assert np.max(np.abs(g.ricci - ric)) < 1e-10
        assert abs(g.scal - scal) < 1e-10


def test_scalar_flat_parameter_found_by_solve():
    lam = inv.scalar_flat_parameter()
    g = geo(lam)
    assert abs(g.scal) < 1e-12
    # curvature does not vanish there
    assert np.linalg.norm(g.ricci) > 0.1


def test_metric_is_parallel():
    g = geo(3.7)
    n2 = inv._nabla_twotensor(g)
    nabla_g = np.einsum("iabpq,pq->iab", n2, g.frame.metric)
    assert np.max(np.abs(nabla_g)) < 1e-13


def test_contracted_bianchi():
    g = geo(2.2)
    gi = np.linalg.inv(g.frame.metric)
    n2 = inv._nabla_twotensor(g)
    div_ric = np.einsum("ab,abjpq,pq->j", gi, n2, g.ricci)
    assert np.max(np.abs(div_ric)) < 1e-12


def test_killing_dimensions():
    assert len(inv.killing_basis(geo(1.0))) == 3  # round sphere
    assert len(inv.killing_basis(geo(4.0))) == 1  # squashed


def test_adjoint_matrix_is_gram_transpose():
    g = geo(4.0)
    op = inv.operator_matrix(g, "conformal_killing")
    ops = inv.adjoint_matrix(g, op)
    rng = np.random.default_rng(5)
    w = inv.InvariantField("one-form", rng.standard_normal(3))
    h = inv.InvariantField("sym2", rng.standard_normal(6))
    gram_h = inv.gram_matrix(g, "sym2")
    gram_w = inv.gram_matrix(g, "one-form")
    lhs = op(w).components @ gram_h @ h.components
    rhs = w.components @ gram_w @ ops(h).components
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_ckl_normal_identity():
    # L*L w = 2 Delta w - 4 Ric(w^sharp) on an invariant one-form
    g = geo(4.0)
    rng = np.random.default_rng(8)
    w = inv.InvariantField("one-form", rng.standard_normal(3))
    lhs = inv.operator_matrix(g, "ckl_normal")(w).components
    lap = inv.operator_matrix(g, "laplacian_oneform")(w).components
    gi = np.linalg.inv(g.frame.metric)
    rhs = 2 * lap - 4 * (g.ricci @ gi @ w.components)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_conformal_killing_is_trace_free():
    g = geo(4.0)
    w = inv.InvariantField("one-form", np.array([1.0, -2.0, 0.5]))
    h = inv.operator_matrix(g, "conformal_killing")(w)
    tr = inv.operator_matrix(g, "trace")(h).components[0]
    assert abs(tr) < 1e-13


def test_frame_validation():
    with pytest.raises(ValueError):
        inv.berger_frame(-1.0)
