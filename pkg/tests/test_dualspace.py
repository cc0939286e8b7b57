"""Dual-space recursion, multiplicity structure, deflation-one tests."""

import json

import numpy as np
import pytest

from snewton.bench import get_entry
from snewton.dualspace import (
    DualBasis,
    Functional,
    deflation_one_necessary,
    is_deflation_one,
    monomials_upto,
    multiplicity_structure,
    next_order,
    phi,
    unit_functional,
)
from snewton.numla import split_svd
from snewton.polycore import parse_system
from snewton.twostep import operator_B


def base_basis(n):
    return DualBasis(order=0, functionals=[unit_functional(n)], tol=0.0, candidate_dim=1)


# -- shift operator -------------------------------------------------------------


def test_phi_shifts_down():
    lam = Functional(2, {(2, 0): 1.0})
    assert phi(lam, 0).terms == {(1, 0): 1.0}
    assert phi(lam, 1).is_zero()


def test_phi_drops_zero_exponents():
    lam = Functional(2, {(1, 0): 1.0})
    assert phi(lam, 1).is_zero()
    assert phi(lam, 0).terms == {(0, 0): 1.0}


def test_phi_commutes():
    rng = np.random.default_rng(3)
    for _ in range(10):
        terms = {
            tuple(int(a) for a in rng.integers(0, 4, size=3)): complex(rng.standard_normal())
            for _ in range(5)
        }
        lam = Functional(3, terms)
        i, j = rng.integers(0, 3, size=2)
        assert phi(phi(lam, i), j).terms == pytest.approx(phi(phi(lam, j), i).terms)


def test_phi_index_range():
    with pytest.raises(ValueError):
        phi(unit_functional(2), 2)


def test_monomials_upto_counts_and_order():
    basis = monomials_upto(3, 2)
    assert len(basis) == 10
    assert basis[0] == (0, 0, 0)
    degrees = [sum(a) for a in basis]
    assert degrees == sorted(degrees)


# -- one recursion step ----------------------------------------------------------


def test_next_order_running_example_first_order():
    entry = get_entry("running-example")
    d1 = next_order(entry.system, entry.zero, base_basis(3))
    assert d1.dim == 3
    assert d1.candidate_dim == 4
    assert not d1.ambiguous


def test_next_order_x2_xy_candidate_space():
    system = parse_system("x^2\nx*y", ["x", "y"])
    d1 = next_order(system, [0, 0], base_basis(2))
    assert d1.dim == 3  # 1, d1, d2 all annihilate at the origin
    d2 = next_order(system, [0, 0], d1)
    # all six order <= 2 monomial functionals satisfy the shift condition,
    # and the evaluation matrix [0 0 0 e1 e2 0] cuts exactly two of them
    assert d2.candidate_dim == 6
    assert d2.dim == 4


def test_next_order_regular_zero_stays_one_dimensional():
    system = parse_system("x\ny", ["x", "y"])
    d1 = next_order(system, [0, 0], base_basis(2))
    assert d1.dim == 1
    d2 = next_order(system, [0, 0], d1)
    assert d2.dim == 1


def test_dual_space_span_contains_unit_functional():
    entry = get_entry("running-example")
    report = multiplicity_structure(entry.system, entry.zero)
    basis = report.bases[-1]
    monomials = monomials_upto(3, basis.order)
    index = {a: i for i, a in enumerate(monomials)}
    coeffs = np.zeros((len(monomials), basis.dim), dtype=complex)
    for j, lam in enumerate(basis.functionals):
        for alpha, c in lam.terms.items():
            coeffs[index[alpha], j] = c
    unit = np.zeros(len(monomials), dtype=complex)
    unit[index[(0, 0, 0)]] = 1.0
    q, _ = np.linalg.qr(coeffs)
    residual = unit - q @ (q.conj().T @ unit)
    assert np.linalg.norm(residual) < 1e-10


def test_rank_ambiguity_is_flagged():
    # with the tolerance forced next to a genuine singular value the rank
    # decision is ambiguous and the basis says so
    entry = get_entry("running-example")
    d1 = next_order(entry.system, entry.zero, base_basis(3), rank_tol=1.0)
    assert d1.ambiguous
    clean = next_order(entry.system, entry.zero, base_basis(3))
    assert not clean.ambiguous


def test_dual_basis_functionals_annihilate_the_system():
    entry = get_entry("running-example")
    d1 = next_order(entry.system, entry.zero, base_basis(3))
    d2 = next_order(entry.system, entry.zero, d1)
    for lam in d2.functionals:
        values = [lam.apply(p, entry.zero) for p in entry.system]
        assert np.linalg.norm(values) < 1e-8


# -- full multiplicity structure ---------------------------------------------------


@pytest.mark.parametrize(
    "name, expected",
    [
        ("running-example", (2, 2, 4)),
        ("x2-z3xy-y2", (3, 5, 12)),
        ("truncated-sin", (3, 4, 11)),
        ("robustness-pair", (1, 1, 2)),
    ],
)
def test_multiplicity_structure_catalog_values(name, expected):
    entry = get_entry(name)
    report = multiplicity_structure(entry.system, entry.zero)
    assert (report.breadth, report.depth, report.multiplicity) == expected
    assert report.stabilized


def test_dims_monotone_and_candidate_bounds():
    entry = get_entry("x2-z3xy-y2")
    report = multiplicity_structure(entry.system, entry.zero)
    dims = report.dims
    assert all(a <= b for a, b in zip(dims, dims[1:]))
    for basis in report.bases[1:]:
        assert basis.dim <= basis.candidate_dim
        # rank of the evaluation matrix never exceeds the equation count
        assert basis.candidate_dim - basis.dim <= entry.system.num_vars


def test_breadth_matches_jacobian_corank():
    for name in ("running-example", "x2-z3xy-y2", "truncated-sin", "robustness-pair"):
        entry = get_entry(name)
        report = multiplicity_structure(entry.system, entry.zero)
        jac = entry.system.jacobian(entry.zero)
        sigma_top = np.linalg.norm(jac, 2)
        split = split_svd(jac, 1e-8 * (1 + sigma_top))
        assert report.breadth == split.kappa


def test_regular_zero_report():
    system = parse_system("x\ny", ["x", "y"])
    report = multiplicity_structure(system, [0, 0])
    assert report.regular
    assert (report.breadth, report.depth, report.multiplicity) == (0, 0, 1)


def test_non_isolated_zero_never_stabilizes():
    system = parse_system("x^2\nx*y", ["x", "y"])
    report = multiplicity_structure(system, [0, 0], max_order=6)
    assert not report.stabilized
    assert report.dims == [1, 3, 4, 5, 6, 7, 8]


def brute_force_dual_dimension(system, xi, order):
    """Independent oracle: a functional of order <= k annihilates the ideal
    iff it kills every monomial multiple x^beta * f_i with |beta| <= k, so
    the dimension is the kernel dimension of that one big evaluation matrix
    (no closedness recursion involved)."""
    from snewton.polycore import Poly, normalized_partial

    n = system.num_vars
    alphas = monomials_upto(n, order)
    rows = []
    for beta in monomials_upto(n, order):
        shift = Poly(n, {tuple(beta): 1.0})
        for poly in system.polys:
            prod = shift * poly
            rows.append([normalized_partial(prod, a, xi) for a in alphas])
    matrix = np.array(rows, dtype=complex)
    sigma = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.sum(sigma > 1e-8 * (1 + sigma[0])))
    return len(alphas) - rank


@pytest.mark.parametrize("name", ["running-example", "x2-z3xy-y2", "truncated-sin"])
def test_dims_match_brute_force_macaulay_oracle(name):
    entry = get_entry(name)
    report = multiplicity_structure(entry.system, entry.zero)
    for basis in report.bases:
        oracle = brute_force_dual_dimension(entry.system, entry.zero, basis.order)
        assert basis.dim == oracle, (name, basis.order)


def test_necessary_condition_matches_explicit_matrix_rank():
    # assemble the order-2 test matrix directly: columns are f(zero), the
    # Jacobian, and all pairwise Hessian contractions over a kernel basis;
    # its rank equals dim C2 - dim D2
    from snewton.polycore import dir_hessian

    for name in ("running-example", "x2-z3xy-y2", "robustness-pair"):
        entry = get_entry(name)
        system, zero = entry.system, entry.zero
        jac = system.jacobian(zero)
        split = split_svd(jac, 1e-8 * (1 + np.linalg.norm(jac, 2)))
        cols = [system.eval(zero)[:, None], jac]
        kernel = split.v2
        for i in range(kernel.shape[1]):
            contracted = dir_hessian(system, zero, kernel[:, i])
            for j in range(i, kernel.shape[1]):
                cols.append((contracted @ kernel[:, j])[:, None])
        matrix = np.hstack(cols)
        sigma = np.linalg.svd(matrix, compute_uv=False)
        rank = int(np.sum(sigma > 1e-8 * (1 + sigma[0])))
        assert (rank == system.num_vars) == deflation_one_necessary(system, zero), name


def test_report_serializes_to_json():
    entry = get_entry("running-example")
    report = multiplicity_structure(entry.system, entry.zero)
    payload = json.loads(report.to_json_str())
    assert payload["breadth"] == 2
    assert payload["multiplicity"] == 4
    assert payload["dims_by_order"] == [1, 3, 4, 4]
    assert payload["stabilized"] is True


# -- deflation-one classification ----------------------------------------------------


def test_necessary_condition_cases():
    # holds at the deflation-one running example
    entry = get_entry("running-example")
    assert deflation_one_necessary(entry.system, entry.zero)
    # also holds at a zero that is NOT deflation-one: the test is only necessary
    entry = get_entry("x2-z3xy-y2")
    assert deflation_one_necessary(entry.system, entry.zero)
    # regular zero: dim C2 - dim D2 = 3 - 1 = n
    system = parse_system("x\ny", ["x", "y"])
    assert deflation_one_necessary(system, [0, 0])


@pytest.mark.parametrize(
    "name, expected",
    [
        ("running-example", True),
        ("x2-xy", True),
        ("truncated-sin", True),
        ("x2-z3xy-y2", False),
    ],
)
def test_is_deflation_one(name, expected):
    entry = get_entry(name)
    assert is_deflation_one(entry.system, entry.zero, entry.tol, seed=0) is expected


def test_is_deflation_one_regular_point():
    system = parse_system("x - 1\ny - 2", ["x", "y"])
    assert is_deflation_one(system, [1, 2], 0.1) is False


def test_is_deflation_one_whole_catalog_with_gap_tolerance():
    # with the tolerance derived from the actual spectral gap at the zero,
    # every catalogued system classifies correctly; the coarse per-entry
    # refinement tolerances are too blunt for the invertibility threshold
    from snewton.bench import catalog

    for entry in catalog():
        expected = entry.name != "x2-z3xy-y2"
        got = is_deflation_one(entry.system, entry.zero, seed=0)
        assert got is expected, entry.name


def test_operator_linearity_in_direction():
    entry = get_entry("running-example")
    split = split_svd(entry.system.jacobian(entry.zero), entry.tol)
    v = split.v2 @ np.array([0.6, 0.8])
    v = v / np.linalg.norm(v)
    b1 = operator_B(entry.system, entry.zero, v, split.u2, split.v2)
    c = 0.25 - 0.7j
    # scale invariance at the operator level: B(c v) = c B(v) exactly
    h = entry.system  # direct contraction through dir_hessian
    from snewton.polycore import dir_hessian

    b2 = split.u2.conj().T @ dir_hessian(h, entry.zero, c * v) @ split.v2
    assert np.allclose(b2, c * b1, rtol=0, atol=1e-14)
