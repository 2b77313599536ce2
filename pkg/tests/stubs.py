"""Light stand-ins for solutions and random sources, for tracing selectors by hand."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class StubSolution:
    cost: float
    feasible: bool = True
    route_list: list = field(default_factory=list)
    tag: int = -1

    def routes(self):
        return self.route_list

    def is_feasible(self):
        return self.feasible


class StubEvaluator:
    def penalised_cost(self, solution):
        return solution.cost

    def cost(self, solution):
        return solution.cost


class ScriptRng:
    """Replays scripted draws; ``rand`` defaults to 0.5 once its script runs out."""

    def __init__(self, ints=(), floats=(), int_default=None):
        self.ints = list(ints)
        self.floats = list(floats)
        self.int_default = int_default
        self.int_calls: list[tuple[int, int]] = []
        self.float_calls = 0

    def randint(self, high):
        if self.ints:
            value = self.ints.pop(0)
        elif self.int_default is not None:
            value = self.int_default(high)
        else:
            raise AssertionError(f"unscripted randint({high})")
        assert 0 <= value < high
        self.int_calls.append((high, value))
        return value

    def rand(self):
        self.float_calls += 1
        return self.floats.pop(0) if self.floats else 0.5
