import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exlab.kernels import (KernelError, SubgroupError, check_condition6,
                           enumerate_stationary_exponents, is_irreducible, lattice_index,
                           make_lattice_kernel, mean_vector, subgroup_check)

NN_KERNEL = [((1, 0), 0.4), ((-1, 0), 0.1), ((0, 1), 0.3), ((0, -1), 0.2)]


def nn_kernel(p1=0.4, q1=0.1, p2=0.3, q2=0.2):
    return make_lattice_kernel(2, [((1, 0), p1), ((-1, 0), q1), ((0, 1), p2), ((0, -1), q2)])


def test_literal_forms_agree():
    a = make_lattice_kernel(2, NN_KERNEL)
    b = make_lattice_kernel(2, dict(NN_KERNEL))
    assert a == b
    assert a.to_literal() == [[[-1, 0], 0.1], [[0, -1], 0.2], [[0, 1], 0.3], [[1, 0], 0.4]]


@pytest.mark.parametrize("entries, msg", [
    ([((1,), 0.5)], "sum"),
    ([((-1,), -0.2), ((1,), 1.2)], "negative"),
    ([((1,), 1.5)], "> 1"),
    ([((1, 0), 1.0)], "arity"),
    ([((1,), float("nan"))], "non-finite"),
])
def test_invalid_literals(entries, msg):
    with pytest.raises(KernelError, match=msg):
        make_lattice_kernel(1, entries)


def test_mean_vector_examples():
    k = make_lattice_kernel(2, [((1, 0), 1 / 3), ((0, 1), 1 / 3), ((0, -1), 1 / 3)])
    assert np.allclose(mean_vector(k), (1 / 3, 0))
    sym = make_lattice_kernel(2, [((1, 0), .25), ((-1, 0), .25), ((0, 1), .25), ((0, -1), .25)])
    assert np.allclose(mean_vector(sym), 0)
    k87 = make_lattice_kernel(2, [((1, 0), .4), ((0, 1), .4), ((-1, 0), .1), ((0, -1), .1)])
    assert np.allclose(mean_vector(k87), (0.3, 0.3))


def test_condition6_examples():
    k = nn_kernel()
    assert check_condition6(k, (math.log(4), math.log(1.5)))
    assert check_condition6(k, (0, 0))
    assert not check_condition6(k, (1, 0))


def test_nearest_neighbour_exponents():
    got = enumerate_stationary_exponents(nn_kernel())
    want = [(0, 0), (0, math.log(1.5)), (math.log(4), 0), (math.log(4), math.log(1.5))]
    assert len(got) == 4
    for w in want:
        assert any(np.allclose(g, w, atol=1e-9) for g in got)


def test_symmetric_and_one_dimensional_exponents():
    sym = make_lattice_kernel(2, [((1, 0), .25), ((-1, 0), .25), ((0, 1), .25), ((0, -1), .25)])
    got = enumerate_stationary_exponents(sym)
    assert len(got) == 1 and np.allclose(got[0], 0)
    k1 = make_lattice_kernel(1, [((1,), 0.7), ((-1,), 0.3)])
    got = sorted(float(v[0]) for v in enumerate_stationary_exponents(k1))
    assert np.allclose(got, [0, math.log(7 / 3)])


def test_one_sided_direction_forces_zero():
    # p(e1) > 0 = p(-e1): <e1, v> must vanish
    k = make_lattice_kernel(2, [((1, 0), 0.5), ((0, 1), 0.3), ((0, -1), 0.2)])
    got = enumerate_stationary_exponents(k)
    assert all(abs(v[0]) < 1e-12 for v in got)
    assert len(got) == 2


def test_subgroup_examples():
    assert subgroup_check(make_lattice_kernel(2, [((1, 0), .4), ((0, 1), .3), ((0, -1), .3)]))
    assert not subgroup_check(make_lattice_kernel(2, [((2, 0), .5), ((0, 1), .5)]))
    assert lattice_index([(2, 0), (0, 1)], 2) == 2
    bad = make_lattice_kernel(1, [((2,), .5), ((-2,), .5)])
    assert not subgroup_check(bad)
    with pytest.raises(SubgroupError) as info:
        enumerate_stationary_exponents(bad)
    assert info.value.index == 2


def test_irreducibility():
    assert is_irreducible(nn_kernel())
    # spans Z^2 as a group but only a half-plane cone
    assert not is_irreducible(make_lattice_kernel(2, [((1, 0), .5), ((0, 1), .25), ((0, -1), .25)]))


# -- properties ------------------------------------------------------------------

_disp = st.tuples(st.integers(-2, 2), st.integers(-2, 2)).filter(any)


@st.composite
def kernels(draw):
    supp = draw(st.lists(_disp, min_size=2, max_size=6, unique=True))
    # frequently include reflections so exponential solutions exist
    extra = [tuple(-c for c in z) for z in supp if draw(st.booleans())]
    supp = list(dict.fromkeys(supp + extra))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(supp), max_size=len(supp))))
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return make_lattice_kernel(2, list(zip(supp, w)))


@given(kernels())
def test_exponent_set_properties(k):
    if not subgroup_check(k):
        with pytest.raises(SubgroupError):
            enumerate_stationary_exponents(k)
        return
    vs = enumerate_stationary_exponents(k)
    assert any(np.allclose(v, 0) for v in vs)
    assert all(check_condition6(k, v) for v in vs)
    if is_irreducible(k):
        m = mean_vector(k)
        for v in vs:
            if np.abs(v).max() > 1e-9:
                assert m @ v > 0


@given(kernels())
def test_exponent_set_is_exhaustive_near_candidates(k):
    if not subgroup_check(k):
        return
    vs = enumerate_stationary_exponents(k)
    # every solution of (6) is pinned by log ratios of reflected pairs; search
    # the grid spanned by those ratios and zero
    logs = {0.0}
    for z in k.support:
        mz = tuple(-c for c in z)
        if k.p(mz) > 0:
            logs.add(math.log(k.p(z) / k.p(mz)))
    supp = [z for z in k.support if any(z)]
    for a in supp:
        for b in supp:
            A = np.array([a, b], dtype=float)
            if abs(np.linalg.det(A)) < 1e-9:
                continue
            for la in logs:
                for lb in logs:
                    v = np.linalg.solve(A, [la, lb])
                    if check_condition6(k, v):
                        assert any(np.max(np.abs(v - w)) <= 1e-9 for w in vs)


@given(kernels())
def test_reflected_mean(k):
    assert np.allclose(mean_vector(k.reflected()), -mean_vector(k))
