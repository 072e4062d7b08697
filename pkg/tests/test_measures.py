import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exlab.measures import (FamilyShape, GraphKernel, GraphKernelError, build_rooted_tree,
                            build_tree_case, check_theorem1, family_alpha, jung_extremality,
                            rooted_tree_ratio, tree_stationary_families)
from exlab.profiles import (Constant, ExponentialC, IndicatorSet, ProfileError, Scaled, StepV,
                            Table, half_space, pi_of, profile_from_spec, quadrant,
                            read_table_csv, wedge, write_table_csv)
from oracles import is_stationary_ctmc

TWO_SITE = {("a", "b"): 0.7, ("a", "a"): 0.3, ("b", "a"): 0.2, ("b", "b"): 0.8}


# -- profiles --------------------------------------------------------------------

def test_pi_of_examples():
    assert pi_of(Constant(0.5), (3, 4)) == 1.0
    p = ExponentialC(1.0, (0.5, -0.25))
    assert math.isclose(pi_of(p, (2, 2)), math.exp(0.5), rel_tol=1e-12)
    with pytest.raises(ProfileError):
        pi_of(Constant(1.0), (0,))
    with pytest.raises(ProfileError):
        ExponentialC(0.0, (1.0,))
    with pytest.raises(ProfileError):
        Constant(1.5)


def test_profile_values():
    s = StepV(0.2, 0.8, (1.0, -1.0), 0.0)
    assert s((1, 1)) == 0.8 and s((0, 1)) == 0.2
    assert wedge(0.8, 0.2, 1.0)((1, 0)) == 0.2 and wedge(0.8, 0.2, 1.0)((1, 2)) == 0.8
    assert half_space(0.2, 0.8, 1.0)((0, 0)) == 0.8
    assert quadrant()((-1, 0)) == 0.0 and quadrant()((0, 0)) == 1.0
    assert Scaled(quadrant(), 10)((5, 5)) == 1.0
    e = ExponentialC(2.0, (1.0,))
    assert math.isclose(e((0,)), 2 / 3)
    # no overflow far out
    assert e((1000,)) == 1.0 and e((-1000,)) == 0.0


def test_reflected_indicator():
    w = IndicatorSet(0.1, 0.9, (((1.0, 0.0), 1.0),))
    assert w((2, 0)) == 0.9 and w.reflected()((-2, 0)) == 0.9


@pytest.mark.parametrize("prof", [
    Constant(0.3), ExponentialC(1.5, (0.2, -0.1)), StepV(0.1, 0.6, (1.0, 0.0), 2.0),
    Table({(0, 0): 0.2, (1, 0): 0.4}), wedge(0.8, 0.2, 1.0), Scaled(quadrant(), 20),
])
def test_profile_spec_round_trip(prof):
    back = profile_from_spec(prof.to_spec())
    sites = np.array([(i, j) for i in range(-3, 4) for j in range(-3, 4)])
    if isinstance(prof, Table):
        sites = np.array([(0, 0), (1, 0)])
    assert np.array_equal(back.density(sites), prof.density(sites))


def test_table_csv_round_trip(tmp_path):
    t = Table({(0, 0): 0.25, (2, -1): 0.75})
    write_table_csv(t, tmp_path / "t.csv")
    assert read_table_csv(tmp_path / "t.csv").values == t.values


# -- graph stationarity checker -------------------------------------------------

def _kernel(rates, boundary=()):
    return GraphKernel.from_rates(["a", "b"], rates, boundary)


def test_two_site_reversible():
    k = _kernel(TWO_SITE)
    # pi_b / pi_a = 3.5
    a = 0.2
    b = 3.5 * (a / (1 - a)) / (1 + 3.5 * a / (1 - a))
    res = check_theorem1(k, {"a": a, "b": b})
    assert res.stationary and res.reversible
    assert is_stationary_ctmc(k.matrix, [a, b])


def test_two_site_constant_density_fails():
    k = _kernel(TWO_SITE)
    res = check_theorem1(k, {"a": 0.4, "b": 0.4})
    assert not res.stationary and res.failures
    assert not is_stationary_ctmc(k.matrix, [0.4, 0.4])


def test_doubly_stochastic_constant():
    rng = np.random.default_rng(0)
    perms = [np.eye(4)[rng.permutation(4)] for _ in range(3)]
    w = rng.dirichlet(np.ones(3))
    P = sum(c * p for c, p in zip(w, perms))
    k = GraphKernel(tuple(range(4)), P)
    assert check_theorem1(k, {i: 0.3 for i in range(4)}).stationary


def test_checker_errors():
    with pytest.raises(ValueError):
        check_theorem1(_kernel(TWO_SITE), {"a": 0.0, "b": 0.5})
    with pytest.raises(GraphKernelError):
        _kernel({("a", "b"): 0.7, ("b", "a"): 1.0})


@st.composite
def graph_cases(draw):
    n = draw(st.integers(2, 4))
    mode = draw(st.sampled_from(["random", "reversible", "classes"]))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    if mode == "reversible":
        pi = rng.uniform(0.2, 3.0, n)
        W = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.7)
        W = np.triu(W, 1)
        W = W + W.T
        P = W / pi[:, None]
        P *= 0.9 / max(P.sum(axis=1).max(), 1e-12)
        P[np.diag_indices(n)] = 1 - P.sum(axis=1)
        alpha = pi / (1 + pi)
    else:
        P = rng.dirichlet(np.ones(n), size=n) * (rng.random((n, n)) < 0.8)
        P[np.diag_indices(n)] = 0
        P[np.diag_indices(n)] = 1 - P.sum(axis=1)
        levels = rng.choice([0.2, 0.5, 0.7], size=n) if mode == "classes" else rng.uniform(.1, .9, n)
        alpha = np.asarray(levels, dtype=float)
    return P, alpha


@given(graph_cases())
def test_graph_stationarity_matches_ctmc(case):
    P, alpha = case
    k = GraphKernel(tuple(range(len(alpha))), P)
    res = check_theorem1(k, dict(enumerate(alpha)))
    assert res.stationary == is_stationary_ctmc(P, alpha)
    if res.reversible:
        assert res.stationary


# -- trees -----------------------------------------------------------------------

PARAMS = (0.5, 0.3, 0.2)


def test_case3_symmetric():
    model, k = build_tree_case(3, PARAMS, 3)
    assert np.allclose(k.matrix, k.matrix.T)
    fams = tree_stationary_families(model)
    assert [f.name for f in fams] == ["homogeneous"]


def test_case1_labels_and_rates():
    model, k = build_tree_case(1, PARAMS, 2)
    interior = [x for x in model.vertices if x not in model.leaves]
    for x in interior:
        assert model.incident_types(x) == [1, 2, 3]
        i = k.index[x]
        assert sorted(k.matrix[i][k.matrix[i] > 0]) == sorted(PARAMS)
        assert sorted(k.matrix[:, i][k.matrix[:, i] > 0]) == sorted(PARAMS)
    fams = tree_stationary_families(model)
    assert len(fams) == 2
    assert {f.name for f in fams} == {"homogeneous", "reversible"}


def test_case2_matching_and_families():
    model, k = build_tree_case(2, PARAMS, 3)
    interior = [x for x in model.vertices if x not in model.leaves]
    for x in interior:
        assert model.incident_types(x) == [1, 1, 2]
    for (x, y), t in model.edge_type.items():
        if t == 2:
            assert model.line_of[x] != model.line_of[y]
    lines = {model.line_of[x] for x, _ in model.line_step}
    fams = tree_stationary_families(model)
    assert len(fams) == 2 ** len(lines)
    for f in fams:
        assert check_theorem1(k, family_alpha(f), exempt=model.leaves).stationary


@pytest.mark.parametrize("case", [1, 3, "rooted"])
def test_families_pass_stationarity_check(case):
    if case == "rooted":
        model, k = build_rooted_tree(0.3, 4)
    else:
        model, k = build_tree_case(case, PARAMS, 3)
    for f in tree_stationary_families(model):
        for scale in (0.5, 2.0):
            res = check_theorem1(k, family_alpha(f, scale), exempt=model.leaves)
            assert res.stationary, res.failures
            assert set(res.exempt) >= set(model.leaves)


def test_tree_parameter_errors():
    with pytest.raises(ValueError):
        build_tree_case(1, (0.5, 0.25, 0.25), 2)
    with pytest.raises(ValueError):
        build_tree_case(1, (0.5, 0.3, 0.3), 2)
    with pytest.raises(ValueError):
        build_rooted_tree(0.5, 2)


def test_jung_examples():
    assert jung_extremality(FamilyShape("rooted_tree", rooted_tree_ratio(0.3))) == "extremal"
    assert jung_extremality(FamilyShape("rooted_tree", rooted_tree_ratio(0.2))) == "not_extremal"
    assert jung_extremality(FamilyShape("rooted_tree", rooted_tree_ratio(1 / 3))) == "extremal"
    assert jung_extremality(FamilyShape("constant")) == "extremal"
    assert jung_extremality(FamilyShape("lattice_exponential", dim=2, v=(1.0, 0.0))) == "extremal"
    assert jung_extremality(FamilyShape("lattice_exponential", dim=1, v=(1.0,))) == "not_extremal"
    with pytest.raises(ValueError):
        jung_extremality(FamilyShape("spiral"))


def _series_diverges(lam):
    # level n contributes 2^n lam^n / (1 + lam^n)^2; the series diverges iff
    # these terms do not decay, which we read off from two far-out levels
    def log_term(n):
        return n * math.log(2 * lam) - 2 * np.logaddexp(0, n * math.log(lam))
    return log_term(4000) - log_term(2000) >= -1e-9


@given(st.floats(0.01, 0.49))
def test_jung_matches_series(q):
    lam = rooted_tree_ratio(q)
    if abs(lam - 0.5) < 1e-3 or abs(lam - 2) < 1e-2:
        return
    verdict = jung_extremality(FamilyShape("rooted_tree", lam))
    assert (verdict == "extremal") == _series_diverges(lam)
