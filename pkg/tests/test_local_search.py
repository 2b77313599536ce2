import itertools

import pytest

from mepvrp import CostEvaluator, RandomNumberGenerator, Solution, generate_instance, make_random
from mepvrp.local_search import EducateParams, LocalSearch, build_neighbor_lists, educate

from oracles import brute_force_tsp, make_data

VARIANTS = ["TSP", "CVRP", "VRPTW", "VRPB", "MDVRPTW", "PCVRPTW", "GVRP", "OVRP", "VRPMB"]


def test_square_tour_is_uncrossed():
    data = make_data([(0, 0), (10, 0), (10, 10), (0, 10)])
    crossing = Solution(data, [[2, 1, 3]])
    ev = CostEvaluator([1], 1, 1)
    # Only three distinct tours exist on four points; the crossing one is worst.
    lengths = set()
    for perm in itertools.permutations([1, 2, 3]):
        lengths.add(Solution(data, [list(perm)]).distance())
    assert lengths == {40, 48}
    assert crossing.distance() == 48
    out = educate(crossing, data, ev, RandomNumberGenerator(0))
    assert out.distance() == 40 == brute_force_tsp(data)


def overload_instance():
    coords = [(0, 0), (10, 0), (11, 1), (12, 0), (-10, 0), (-11, 1), (-12, 0)]
    demands = [0, 4, 4, 4, 2, 1, 1]
    return make_data(coords, demands=demands, capacity=10, vehicles=2)


def test_overload_is_relieved_when_a_relocate_fixes_it():
    data = overload_instance()
    start = Solution(data, [[1, 2, 3], [4, 5, 6]])
    ev = CostEvaluator([50], 1, 1)
    before = ev.penalised_cost(start)
    assert start.excess_load() == 2

    # Enumerate every single relocate and keep the ones that remove the overload.
    routes = [r.visits() for r in start.routes()]
    fixes = []
    for src, dst in ((0, 1), (1, 0)):
        for i, u in enumerate(routes[src]):
            rest = routes[src][:i] + routes[src][i + 1:]
            for pos in range(len(routes[dst]) + 1):
                other = routes[dst][:pos] + [u] + routes[dst][pos:]
                cand = Solution(data, [rest, other] if src == 0 else [other, rest])
                if cand.excess_load() == 0:
                    fixes.append(ev.penalised_cost(cand))
    assert fixes and min(fixes) < before

    out = educate(start, data, ev, RandomNumberGenerator(3))
    assert ev.penalised_cost(out) < before
    assert ev.penalised_cost(out) <= min(fixes)
    assert out.is_feasible()


def test_collinear_tie_prefers_lower_id():
    data = make_data([(100, 100), (0, 0), (1, 0), (2, 0)])
    nl = build_neighbor_lists(data, 1)
    assert nl[2] == (1,)
    assert nl[1] == (2,)
    assert nl[3] == (2,)


def test_large_k_gives_full_lists():
    data = generate_instance(variant="CVRP", n=8, seed=0)
    nl = build_neighbor_lists(data, 50)
    for u in data.client_ids:
        assert sorted(nl[u]) == sorted(v for v in data.client_ids if v != u)


def test_neighbor_lists_match_full_sort():
    data = generate_instance(variant="CVRP", n=10, seed=9)
    nl = build_neighbor_lists(data, 4)
    for u in data.client_ids:
        others = [v for v in data.client_ids if v != u]
        expected = sorted(others, key=lambda v: (data.dist[u][v], v))[:4]
        assert list(nl[u]) == expected


def test_neighbor_k_must_be_positive():
    with pytest.raises(ValueError):
        build_neighbor_lists(generate_instance(variant="TSP", n=5, seed=0), 0)


@pytest.mark.parametrize("variant", VARIANTS)
def test_educate_is_monotone_and_a_fixpoint(variant):
    data = generate_instance(variant=variant, n=25, seed=4)
    ls = LocalSearch(data, EducateParams(k_neighbors=8), check=True)
    for seed in range(3):
        ev = CostEvaluator([20], 5, 5)
        start = make_random(data, RandomNumberGenerator(seed))
        out = ls.educate(start, ev, RandomNumberGenerator(seed + 50))
        assert ev.penalised_cost(out) <= ev.penalised_cost(start)
        again = ls.educate(out, ev, RandomNumberGenerator(seed + 99))
        assert again == out


def test_deadline_in_the_past_returns_promptly():
    data = generate_instance(variant="CVRP", n=60, seed=1)
    ev = CostEvaluator([20], 1, 1)
    start = make_random(data, RandomNumberGenerator(0))
    out = LocalSearch(data).educate(start, ev, RandomNumberGenerator(0), deadline=0.0)
    assert out == start
