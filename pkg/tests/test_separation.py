import itertools
import random
from fractions import Fraction

import pytest

from commondue.instance import ContractError, Instance, random_instance
from commondue.polytope import VarSpace, all_s_rows, check_point, encode_f1, s_row
from commondue.separation import (
    CUT_EPS,
    GammaParams,
    build_sep_graph,
    gamma_params,
    gamma_value,
    gomory_hu,
    max_gamma,
    min_cut,
    separate,
    separate_triangle,
)

from conftest import f1_encodable, random_block_schedule, random_relaxed_point


def brute_min_cut(w, s, t):
    size = len(w)
    others = [v for v in range(size) if v not in (s, t)]
    best = None
    for k in range(len(others) + 1):
        for extra in itertools.combinations(others, k):
            side = {s, *extra}
            val = sum(w[u][v] for u in side for v in range(size) if v not in side)
            best = val if best is None else min(best, val)
    return best


def random_graph(rng, size, density=0.6, exact=True):
    w = [[Fraction(0) if exact else 0.0] * size for _ in range(size)]
    for u, v in itertools.combinations(range(size), 2):
        if rng.random() < density:
            val = Fraction(rng.randint(1, 20), rng.randint(1, 4)) if exact else rng.random()
            w[u][v] = w[v][u] = val
    return w


def exhaustive_gamma(family, inst, point, space):
    """max(0, largest violation) over all rows, scaled like Gamma."""
    return max([0.0] + [-2 * float(row.slack(point)) for row in all_s_rows(family, inst, space)])


def point_f1(inst, e, t, delta, x):
    sp = VarSpace.build("F1", inst.n)
    pt = [0] * sp.size
    for j in range(inst.n):
        pt[sp("e", j)], pt[sp("t", j)], pt[sp("delta", j)] = e[j], t[j], delta[j]
    for (i, j), v in x.items():
        pt[sp("x", i, j)] = v
    return pt


def test_gamma_params_substitution():
    inst = Instance((1, 1), (1, 1), (1, 1), 2)
    pt = point_f1(inst, (0, 0), (0, 0), (1, 1), {(0, 1): 0})
    params = gamma_params("S1", inst, pt)
    assert params.c == (0, 0) and params.q == {(0, 1): 2}


def test_gamma_params_all_tardy():
    inst = Instance((2, 3, 1), (1,) * 3, (1,) * 3, 6)
    pt = point_f1(inst, (0,) * 3, (2, 3, 1), (0,) * 3, {(0, 1): 0, (0, 2): 0, (1, 2): 0})
    assert all(v == 0 for v in gamma_params("S1", inst, pt).q.values())


def test_gamma_params_rejects_pair_row_violation():
    inst = Instance((1, 1), (1, 1), (1, 1), 2)
    pt = point_f1(inst, (0, 0), (0, 0), (0, 0), {(0, 1): 1})
    with pytest.raises(ContractError):
        gamma_params("S1", inst, pt)


def test_gamma_value_small_sets():
    params = GammaParams((Fraction(1), Fraction(-2), Fraction(3)), {(0, 1): 5, (0, 2): 1, (1, 2): 0})
    assert gamma_value(params, [1]) == -2
    assert gamma_value(params, [0, 1]) == 1 - 2 + 5
    assert gamma_value(params, []) == 0


def test_sep_graph_single_task():
    g = build_sep_graph(GammaParams((Fraction(-3),), {}))
    assert g.k == [-6]
    assert g.w[0][1] == 0 and g.w[1][2] == 6


def test_sep_graph_two_tasks_and_identity():
    params = GammaParams((Fraction(1), Fraction(-1)), {(0, 1): Fraction(2)})
    g = build_sep_graph(params)
    assert (g.w[0][1], g.w[1][3], g.w[0][2], g.w[2][3], g.w[1][2]) == (4, 0, 0, 0, 2)
    for k in range(3):
        for S in itertools.combinations(range(2), k):
            side = {0} | {j + 1 for j in S}
            assert g.gamma_from_cut(g.cut_value(side)) == gamma_value(params, S)


def test_cut_identity_on_random_params():
    rng = random.Random(21)
    for _ in range(500):
        n = rng.randint(1, 6)
        c = tuple(Fraction(rng.randint(-20, 20), rng.randint(1, 3)) for _ in range(n))
        q = {pair: Fraction(rng.randint(0, 10)) for pair in itertools.combinations(range(n), 2)}
        params = GammaParams(c, q)
        g = build_sep_graph(params)
        for k in range(n + 1):
            for S in itertools.combinations(range(n), k):
                side = {0} | {j + 1 for j in S}
                assert g.gamma_from_cut(g.cut_value(side)) == gamma_value(params, S)


def test_cut_identity_exhaustive_n10():
    rng = random.Random(22)
    n = 10
    c = tuple(Fraction(rng.randint(-30, 30)) for _ in range(n))
    q = {pair: Fraction(rng.randint(0, 9)) for pair in itertools.combinations(range(n), 2)}
    params = GammaParams(c, q)
    g = build_sep_graph(params)
    for mask in range(1 << n):
        S = [j for j in range(n) if mask >> j & 1]
        assert g.gamma_from_cut(g.cut_value({0} | {j + 1 for j in S})) == gamma_value(params, S)


def test_edge_list_dump():
    g = build_sep_graph(GammaParams((Fraction(1), Fraction(-1)), {(0, 1): Fraction(2)}))
    assert g.edge_list() == "# vertices 0..3; 0 and 3 are terminals\n0 1 4\n1 2 2\n"


def test_min_cut_path_graph():
    w = [[0, 3, 0, 0], [3, 0, 1, 0], [0, 1, 0, 5], [0, 0, 5, 0]]
    value, side = min_cut(w, 0, 3)
    assert value == 1 and side == {0, 1}


def test_min_cut_disconnected():
    w = [[0, 2, 0], [2, 0, 0], [0, 0, 0]]
    assert min_cut(w, 0, 2) == (0, frozenset({0, 1}))


def test_min_cut_against_brute_force():
    rng = random.Random(23)
    for _ in range(60):
        size = rng.randint(2, 9)
        w = random_graph(rng, size)
        s, t = rng.sample(range(size), 2)
        value, side = min_cut(w, s, t)
        assert s in side and t not in side
        assert value == brute_min_cut(w, s, t)


def test_gomory_hu_star():
    w = [[0, 1, 2, 3], [1, 0, 0, 0], [2, 0, 0, 0], [3, 0, 0, 0]]
    tree = gomory_hu(w)
    assert tree.min_cut_value(1, 2) == 1
    assert tree.min_cut_value(2, 3) == 2
    assert tree.min_cut_value(0, 3) == 3


def test_gomory_hu_all_pairs():
    rng = random.Random(24)
    for _ in range(25):
        size = rng.randint(2, 9)
        w = random_graph(rng, size)
        tree = gomory_hu(w)
        for u, v in itertools.combinations(range(size), 2):
            assert tree.min_cut_value(u, v) == min_cut(w, u, v)[0]


def test_no_cut_at_encoded_schedule():
    rng = random.Random(25)
    seen = 0
    while seen < 40:
        inst = random_instance(rng, rng.randint(2, 6))
        C = random_block_schedule(rng, inst)
        if not f1_encodable(inst, C):
            continue
        pt = encode_f1(inst, C)
        assert separate("S1", inst, pt) == [] and separate("S2", inst, pt) == []
        seen += 1


def test_overlapping_early_pair_gives_s1_cut():
    inst = Instance((2, 3), (1, 1), (1, 1), 5)
    pt = point_f1(inst, (0, 0), (0, 0), (1, 1), {(0, 1): 0})
    (cut,) = separate("S1", inst, pt)
    assert cut.family == "S1" and cut.subset == (0, 1)
    assert cut.slack(pt) == -2 * 3  # violated by p_1 p_2
    assert max_gamma("S1", inst, pt) == (12, frozenset({0, 1}))  # Gamma is twice the violation


@pytest.mark.parametrize("formulation, families", [("F1", ("S1", "S2")), ("F3", ("S1P", "S2P"))])
def test_separation_matches_exhaustive_scan(formulation, families):
    rng = random.Random(26)
    found = 0
    for _ in range(80):
        inst = random_instance(rng, rng.randint(1, 8))
        sp = VarSpace.build(formulation, inst.n)
        pt = random_relaxed_point(rng, inst, sp, scale=rng.choice([0.2, 1.0]))
        for fam in families:
            oracle = exhaustive_gamma(fam, inst, pt, sp)
            value, S = max_gamma(fam, inst, pt, sp)
            assert abs(value - oracle) <= 1e-9 * max(1.0, oracle)
            cuts = separate(fam, inst, pt, space=sp)
            assert bool(cuts) == (oracle > CUT_EPS)
            for cut in cuts:
                assert check_point([cut], pt, tol=CUT_EPS / 2)
            found += bool(cuts)
    assert found > 20


def test_max_cuts_cap():
    inst = Instance((1,) * 6, (1,) * 6, (1,) * 6, 6)
    sp = VarSpace.build("F1", 6)
    pt = [0.0] * sp.size
    for j in range(6):
        pt[sp("delta", j)] = 1.0
    assert len(separate("S1", inst, pt, max_cuts=1, space=sp)) == 1


def test_triangle_separation():
    sp = VarSpace.build("F2", 3)
    pt = [1, 1, 1, 1, 1, 1]
    (cut,) = separate_triangle(pt, sp)
    assert cut.rhs == 2 and cut.slack(pt) == -1
    pt = [0, 1, 0, 1, 0, 1]  # x from delta = (0, 1, 0)
    assert separate_triangle(pt, sp) == []
