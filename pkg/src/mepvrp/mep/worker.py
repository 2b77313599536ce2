"""Worker process hosting one externally generated ``select_parents``.

Run as ``python -m mepvrp.mep.worker SOURCE_FILE``. Each stdin line is a
JSON request ``{"population", "costs", "feasible", "seed", "k"}``; each reply
is one stdout line ``{"parent1_index", "parent2_index"}`` or ``{"error"}``.

The candidate sees lightweight stand-ins for the solver classes, importable
from ``pyvrp._pyvrp`` or ``mepvrp``.
"""

from __future__ import annotations

import json
import sys
import traceback
import types

from mepvrp.rng import RandomNumberGenerator as _Rng


class Solution:
    __slots__ = ("_routes", "_cost", "_feasible", "_index")

    def __init__(self, routes, cost, feasible, index):
        self._routes = routes
        self._cost = cost
        self._feasible = feasible
        self._index = index

    def routes(self):
        return [list(r) for r in self._routes]

    def is_feasible(self):
        return self._feasible

    def num_routes(self):
        return len(self._routes)


class CostEvaluator:
    def penalised_cost(self, solution):
        return solution._cost

    def cost(self, solution):
        return solution._cost


class RandomNumberGenerator(_Rng):
    pass


def _install_shims() -> None:
    shim = types.ModuleType("pyvrp._pyvrp")
    shim.Solution = Solution
    shim.CostEvaluator = CostEvaluator
    shim.RandomNumberGenerator = RandomNumberGenerator
    pkg = types.ModuleType("pyvrp")
    pkg._pyvrp = shim
    pkg.Solution = Solution
    pkg.CostEvaluator = CostEvaluator
    pkg.RandomNumberGenerator = RandomNumberGenerator
    sys.modules.setdefault("pyvrp", pkg)
    sys.modules.setdefault("pyvrp._pyvrp", shim)


def _reply(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc) + "\n")
    sys.stdout.flush()


def handle(select, request: dict) -> dict:
    population = [
        Solution(routes, cost, feas, i)
        for i, (routes, cost, feas) in enumerate(zip(request["population"], request["costs"], request["feasible"]))
    ]
    rng = RandomNumberGenerator(seed=int(request["seed"]))
    pair = select(list(population), rng, CostEvaluator(), int(request.get("k", 2)))
    if not isinstance(pair, tuple) or len(pair) != 2:
        raise TypeError("select_parents must return a tuple of two solutions")
    out = []
    for sol in pair:
        if not isinstance(sol, Solution) or not (0 <= sol._index < len(population)) or population[sol._index] is not sol:
            raise TypeError("select_parents returned an object that is not a population member")
        out.append(sol._index)
    return {"parent1_index": out[0], "parent2_index": out[1]}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        sys.stderr.write("usage: python -m mepvrp.mep.worker SOURCE_FILE\n")
        return 1
    _install_shims()
    with open(argv[0], encoding="utf-8") as fh:
        source = fh.read()
    namespace: dict = {"__name__": "candidate"}
    try:
        exec(compile(source, "candidate.py", "exec"), namespace)
        select = namespace["select_parents"]
    except Exception:
        _reply({"error": "load failed:\n" + traceback.format_exc(limit=3)})
        return 2
    _reply({"ready": True})
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            reply = handle(select, json.loads(line))
        except Exception as exc:
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        _reply(reply)
    return 0


if __name__ == "__main__":
    sys.exit(main())
