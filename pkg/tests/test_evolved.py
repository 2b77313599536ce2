import inspect
import json

import pytest

from mepvrp import CostEvaluator, RandomNumberGenerator, Solution, generate_instance, make_random
from mepvrp import evolved
from mepvrp.evolved import (
    HybridParams,
    RegistryError,
    UnsupportedKError,
    build_operator,
    encode_solution_simple,
    hybrid_select_parents,
    make_hybrid_selector,
    manifest_json,
    simple_structural_distance,
    stratify,
    tournament_select,
)
from mepvrp.hgs import PopulationTooSmallError

from stubs import ScriptRng, StubEvaluator, StubSolution


# -- stratify -------------------------------------------------------------------


@pytest.mark.parametrize("n,sizes", [(12, (2, 6, 4)), (2, (1, 1, 0)), (600, (100, 300, 200)), (7, (1, 3, 3))])
def test_stratum_sizes(n, sizes):
    s = stratify([float(n - i) for i in range(n)])
    assert (len(s.elite), len(s.mid), len(s.tail)) == sizes
    assert s.elite + s.mid + s.tail == s.order


def test_strata_are_cost_sorted_and_stable():
    s = stratify([3, 1, 2, 1, 5, 0])
    assert s.order == [5, 1, 3, 2, 0, 4]
    assert s.elite == [5]


def test_stratify_needs_two():
    with pytest.raises(PopulationTooSmallError):
        stratify([1.0])


# -- tournament -------------------------------------------------------------------


def test_single_index_is_returned():
    assert tournament_select([4], [0] * 5, [False] * 5, RandomNumberGenerator(0)) == 4


def test_small_feasible_list_gives_global_min():
    costs = [9, 4, 7, 1, 8, 3, 6]
    rng = ScriptRng()
    assert tournament_select(list(range(7)), costs, [True] * 7, rng) == 3
    assert rng.int_calls == [] and rng.float_calls == 0


def test_large_list_draws_seven_with_replacement():
    rng = ScriptRng(ints=[7, 7, 2, 2, 0, 5, 7])
    costs = [float(i) for i in range(8)]
    assert tournament_select(list(range(8)), costs, [True] * 8, rng) == 0
    assert [h for h, _ in rng.int_calls] == [8] * 7


def test_infeasible_entrant_passes_with_probability_point_two():
    costs, feasible = [5, 1], [True, False]
    assert tournament_select([0, 1], costs, feasible, ScriptRng(floats=[0.19])) == 1
    assert tournament_select([0, 1], costs, feasible, ScriptRng(floats=[0.2])) == 0


def test_all_infeasible_falls_back_to_the_draw():
    costs = [float(c) for c in [4, 2, 9, 1, 6, 3, 8, 5, 7, 0]]
    indices = [0, 2, 4, 6, 8]
    for seed in range(1000):
        assert tournament_select(indices, costs, [False] * 10, RandomNumberGenerator(seed)) in indices


def test_tournament_defaults():
    sig = inspect.signature(tournament_select)
    assert sig.parameters["t_size"].default == 7
    assert sig.parameters["allow_infeasible_prob"].default == 0.2


# -- encoding and structural distance ------------------------------------------------


def test_encode_empty():
    assert encode_solution_simple(StubSolution(0)) == (set(), [])


def test_encode_routes():
    assert encode_solution_simple(StubSolution(0, route_list=[[1, 2], [3]])) == ({1, 2, 3}, [{1, 2}, {3}])


def test_encode_drops_depot():
    assert encode_solution_simple(StubSolution(0, route_list=[[0, 4, 5, 0]])) == ({4, 5}, [{4, 5}])


def test_encode_real_solution():
    data = generate_instance(variant="CVRP", n=10, seed=0)
    sol = make_random(data, RandomNumberGenerator(0))
    all_c, routes = encode_solution_simple(sol)
    assert all_c == set(data.client_ids)
    assert routes == [set(r) for r in sol.visits()]


def test_distance_identity():
    enc = ({1, 2, 3}, [{1, 2}, {3}])
    assert simple_structural_distance(enc, enc) == 0.0


def test_distance_disjoint():
    assert simple_structural_distance(({1, 2}, [{1}, {2}]), ({3, 4}, [{3}, {4}])) == 1.0


def test_distance_hand_value():
    d = simple_structural_distance(({1, 2}, [{1, 2}]), ({1, 2, 3}, [{1, 2}, {3}]))
    assert d == pytest.approx(1 - (0.7 * 2 / 3 + 0.3 * 1))
    assert d == pytest.approx(0.23333333, abs=1e-8)


def test_distance_edge_cases():
    assert simple_structural_distance((set(), []), (set(), [])) == 0.0
    # No routes on one side: only the global term counts.
    assert simple_structural_distance(({1}, []), ({1, 2}, [{1, 2}])) == pytest.approx(0.5)
    # Route pairs that are both empty are skipped; none left means zero route similarity.
    assert simple_structural_distance(({1}, [set()]), ({1}, [set()])) == pytest.approx(0.3)


# -- small-population trace --------------------------------------------------------


def small_trace(monkeypatch, d1, d2, feas2=True, noise=(0.5, 0.5)):
    """Three members with costs 10/20/30; returns the chosen second parent's tag.

    Stratify gives elite [0], mid [1], tail [2]. Parent 1 is member 0 with no
    draws; the two sampling draws pick members 1 then 2; structural distances
    to parent 1 are patched to ``d1`` and ``d2``.
    """
    pop = [
        StubSolution(10, True, tag=0),
        StubSolution(20, True, tag=1),
        StubSolution(30, feas2, tag=2),
    ]
    monkeypatch.setattr(evolved, "encode_solution_simple", lambda sol: sol.tag)
    monkeypatch.setattr(evolved, "simple_structural_distance", lambda a, b: {1: d1, 2: d2}[b])
    rng = ScriptRng(ints=[0, 1], floats=list(noise))
    p1, p2 = hybrid_select_parents(pop, rng, StubEvaluator())
    assert p1.tag == 0
    assert rng.int_calls == [(2, 0), (2, 1)]
    assert rng.float_calls == 2
    return p2.tag


def test_small_branch_feasible_weights(monkeypatch):
    # member 1: 0.30 + 0.15; member 2: 0.55 d + 0.15
    assert small_trace(monkeypatch, 0.0, 0.54) == 1
    assert small_trace(monkeypatch, 0.0, 0.55) == 2


def test_small_branch_feasibility_weight(monkeypatch):
    # member 2 infeasible: 0.55 d against 0.45
    assert small_trace(monkeypatch, 0.0, 0.81, feas2=False) == 1
    assert small_trace(monkeypatch, 0.0, 0.82, feas2=False) == 2


def test_small_branch_noise_band(monkeypatch):
    # Extreme draws move the two scores 0.02 apart at most.
    def d2_for(gap):
        return (0.30 + gap) / 0.55

    assert small_trace(monkeypatch, 0.0, d2_for(0.0199), noise=(0.9999, 0.0)) == 1
    assert small_trace(monkeypatch, 0.0, d2_for(0.0201), noise=(0.9999, 0.0)) == 2


# -- large-population trace ---------------------------------------------------------


def large_trace(cost_a, feas_a, cost_b, cost_c):
    """501 members: 83 elite at cost 0, then A, B, C and filler.

    Parent 1's seven tournament draws all hit member 0. The sampling draws
    pick A, B, C and then only repeats, so exactly those three are scored.
    """
    pop = [StubSolution(0.0, True, tag=i) for i in range(83)]
    pop += [StubSolution(cost_a, feas_a, tag=83), StubSolution(cost_b, True, tag=84), StubSolution(cost_c, True, tag=85)]
    pop += [StubSolution(1000.0 + i, True, tag=i) for i in range(86, 501)]
    strata = stratify([s.cost for s in pop])
    assert len(strata.elite) == 83
    pool = strata.mid + strata.tail
    pos = [pool.index(t) for t in (83, 84, 85)]
    rng = ScriptRng(ints=[0] * 7 + pos + [pos[0]] * 37)
    p1, p2 = hybrid_select_parents(pop, rng, StubEvaluator())
    assert p1.tag == 0
    assert len(rng.int_calls) == 7 + 40
    assert rng.float_calls == 3
    return p2.tag


def test_large_branch_cost_against_feasibility():
    # A: 0.6 + 0.05 (infeasible); C: 0.6 * score + 0.3 + 0.05
    assert large_trace(100.0, False, 200.0, 149.0) == 85
    assert large_trace(100.0, False, 200.0, 151.0) == 83


def test_large_branch_diversity_bonus_threshold():
    # A sits exactly 0.1 * span from parent 1, so it earns no bonus: 0.9.
    assert large_trace(10.0, True, 110.0, 18.0) == 85
    assert large_trace(10.0, True, 110.0, 19.0) == 83


# -- branch choice and sample caps --------------------------------------------------


class CountingRng(RandomNumberGenerator):
    def __init__(self, seed):
        super().__init__(seed)
        self.floats = 0

    def rand(self):
        self.floats += 1
        return super().rand()


def feasible_pop(n):
    return [StubSolution(float(i), True, route_list=[[i % 7 + 1]], tag=i) for i in range(n)]


def test_sample_caps():
    # With every member feasible, each rand() call is one scored sample's noise.
    rng = CountingRng(3)
    hybrid_select_parents(feasible_pop(600), rng, StubEvaluator())
    assert rng.floats == 20
    rng = CountingRng(3)
    hybrid_select_parents(feasible_pop(120), rng, StubEvaluator())
    assert rng.floats == 30


def counting_encoder(monkeypatch):
    calls = []
    real = evolved.encode_solution_simple

    def wrapped(sol):
        calls.append(1)
        return real(sol)

    monkeypatch.setattr(evolved, "encode_solution_simple", wrapped)
    return calls


def test_large_population_never_encodes(monkeypatch):
    calls = counting_encoder(monkeypatch)
    for seed in range(20):
        hybrid_select_parents(feasible_pop(501), RandomNumberGenerator(seed), StubEvaluator())
    assert calls == []


def test_population_of_500_uses_encoding(monkeypatch):
    calls = counting_encoder(monkeypatch)
    hybrid_select_parents(feasible_pop(500), RandomNumberGenerator(0), StubEvaluator())
    assert len(calls) > 0


def test_score_bounds_hold_for_random_populations(monkeypatch):
    scores = []
    real = evolved.simple_structural_distance

    def spy(a, b):
        d = real(a, b)
        assert 0.0 <= d <= 1.0
        scores.append(d)
        return d

    monkeypatch.setattr(evolved, "simple_structural_distance", spy)
    data = generate_instance(variant="CVRP", n=20, seed=0)
    pop = [make_random(data, RandomNumberGenerator(s)) for s in range(12)]
    ev = CostEvaluator([10], 1, 1)
    for seed in range(50):
        hybrid_select_parents(pop, RandomNumberGenerator(seed), ev)
    assert scores


# -- whole-procedure cases --------------------------------------------------------------


def test_two_members_cheaper_first():
    pop = [StubSolution(30.0, route_list=[[1]]), StubSolution(10.0, route_list=[[2]])]
    for seed in range(20):
        p1, p2 = hybrid_select_parents(pop, RandomNumberGenerator(seed), StubEvaluator())
        assert p1 is pop[1]
        assert p2 is pop[0]


def test_identical_population_still_yields_a_pair():
    data = generate_instance(variant="CVRP", n=15, seed=0)
    base = make_random(data, RandomNumberGenerator(0))
    pop = [Solution(data, base.routes()) for _ in range(10)]
    ev = CostEvaluator([10], 1, 1)
    for seed in range(20):
        p1, p2 = hybrid_select_parents(pop, RandomNumberGenerator(seed), ev)
        assert p1 in pop and p2 in pop
        assert p1 is not p2


def test_population_and_k_checks():
    with pytest.raises(PopulationTooSmallError):
        hybrid_select_parents([StubSolution(1.0)], RandomNumberGenerator(0), StubEvaluator())
    with pytest.raises(UnsupportedKError):
        hybrid_select_parents(feasible_pop(5), RandomNumberGenerator(0), StubEvaluator(), k=3)


def test_constants():
    p = HybridParams()
    assert (p.t_size, p.allow_infeasible_prob) == (7, 0.2)
    assert (p.sample_large, p.sample_small, p.large_population) == (20, 30, 500)
    assert (p.w_struct, p.w_cost, p.w_feas) == (0.55, 0.3, 0.15)
    assert (p.large_w_cost, p.large_w_feas, p.large_w_div) == (0.6, 0.3, 0.1)
    assert p.noise / 2 == 0.01


# -- registry ----------------------------------------------------------------------------


def test_registry_default_matches_function():
    data = generate_instance(variant="CVRP", n=20, seed=1)
    pop = [make_random(data, RandomNumberGenerator(s)) for s in range(15)]
    ev = CostEvaluator([10], 1, 1)
    op = build_operator("hybrid", {})
    alt = make_hybrid_selector()
    for seed in range(10):
        a = hybrid_select_parents(pop, RandomNumberGenerator(seed), ev)
        b = op(pop, RandomNumberGenerator(seed), ev)
        c = alt(pop, RandomNumberGenerator(seed), ev)
        assert [x.serial for x in a] == [x.serial for x in b] == [x.serial for x in c]


def test_registry_manifest_lists_operators():
    doc = json.loads(manifest_json())
    names = {op["name"] for op in doc["operators"]}
    assert names == {"baseline", "hybrid"}
    hybrid = next(op for op in doc["operators"] if op["name"] == "hybrid")
    assert hybrid["params"]["t_size"]["default"] == 7


@pytest.mark.parametrize(
    "name,params,kind",
    [
        ("nope", {}, "unknown-operator"),
        ("hybrid", {"colour": 1}, "unknown-param"),
        ("hybrid", {"t_size": 2.5}, "bad-param"),
        ("hybrid", {"t_size": 0}, "bad-param"),
        ("baseline", {"elite_fraction": "high"}, "bad-param"),
    ],
)
def test_registry_errors(name, params, kind):
    with pytest.raises(RegistryError) as err:
        build_operator(name, params)
    assert err.value.kind == kind
