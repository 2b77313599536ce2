"""Prompt template for generating parent-selection operators.

A template is a list of titled sections. Rendering picks sections by mode,
fills ``$name`` placeholders and refuses to emit a prompt with any
placeholder left unfilled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from string import Template
from typing import TYPE_CHECKING

from .knowledge import KnowledgeBase

if TYPE_CHECKING:
    from .candidate import Candidate

MODES = ("full", "noInit", "reactive")
_PLACEHOLDER = re.compile(r"\$(?:\{(\w+)\}|(\w+))")


class PlaceholderError(ValueError):
    kind = "unsubstituted-placeholder"

    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"{self.kind}: no value for {', '.join('$' + n for n in self.names)}")


@dataclass(frozen=True)
class Section:
    key: str
    heading: str
    body: str

    def text(self) -> str:
        return f"## {self.heading}\n\n{self.body.strip()}\n"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    sections: tuple[Section, ...]
    reactive: tuple[Section, ...]

    def pick(self, mode: str) -> tuple[Section, ...]:
        if mode == "full":
            return self.sections
        if mode == "noInit":
            return tuple(s for s in self.sections if s.key != "planning")
        if mode == "reactive":
            return self.reactive
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


_SIGNATURE = """\
```python
def select_parents(
    population: list[Solution],
    rng: RandomNumberGenerator,
    cost_evaluator: CostEvaluator,
    k: int = 2,
) -> tuple[Solution, Solution]:
```"""

_REFERENCE = """\
These classes already exist. Import them with
`from pyvrp._pyvrp import CostEvaluator, RandomNumberGenerator, Solution`
and do not define them yourself.

```python
class CostEvaluator:
    def penalised_cost(self, solution: Solution) -> int: ...
    def cost(self, solution: Solution) -> int: ...

class Solution:
    def routes(self) -> list[list[int]]: ...   # client ids per route, depot excluded
    def is_feasible(self) -> bool: ...

class RandomNumberGenerator:
    def rand(self) -> float: ...          # uniform in [0, 1)
    def randint(self, high: int) -> int:  # uniform in 0 .. high - 1
        ...
```"""

_PARENTS = """\
Selector A, mean cost $score1:

```python
$code1
```

Notes on A: $feedback1

Selector B, mean cost $score2:

```python
$code2
```

Notes on B: $feedback2

Best mean cost so far (the number to beat): $baseline_score
"""

DEFAULT_TEMPLATE = PromptTemplate(
    name="select_parents",
    sections=(
        Section(
            "role",
            "Role",
            "You design search operators for a hybrid genetic algorithm that solves "
            "vehicle routing problems. Lower solution cost is better.",
        ),
        Section(
            "planning",
            "Planning",
            "Before reading any code, write down your plan in three short lists.\n\n"
            "Ways a parent selector commonly fails. Start from these and add your own:\n$pitfalls\n\n"
            "A countermeasure for each failure. Known options include:\n$strategies\n\n"
            "Instance features that can fool a selector:\n$traps",
        ),
        Section(
            "context",
            "Context",
            "Each generation the solver picks two members of its population, recombines "
            "them and improves the child by local search. Which two members get picked "
            "decides how much the search explores versus how hard it refines what it "
            "already has.",
        ),
        Section(
            "approaches",
            "Existing approaches",
            "- Elitism: always take the cheapest members.\n"
            "- Tournament: sample a few members at random and keep the cheapest.\n"
            "- Roulette: sample with probability inversely related to cost.\n"
            "- Diversity pairing: one cheap member plus one structurally distant member.\n"
            "- Uniform sampling among feasible members.",
        ),
        Section(
            "reasoning",
            "Reasoning",
            "Study selectors A and B below before writing anything. For each one, say "
            "what balance of exploration and refinement it strikes, where it is likely "
            "to break down, and how your design will avoid that.",
        ),
        Section(
            "task",
            "Task",
            "Write a new selector C that should reach lower mean cost than A and B. "
            "Do not copy either of them, and do not settle for a plain mix of the "
            "textbook methods above.",
        ),
        Section(
            "requirements",
            "Implementation requirements",
            "Use exactly this signature:\n\n" + _SIGNATURE + "\n\n"
            "- `k` is always 2; return two members of `population`.\n"
            "- Rank quality with `cost_evaluator.penalised_cost(solution)`.\n"
            "- Favour feasible members, but infeasible ones may be picked when useful.\n"
            "- The two parents should differ from each other.\n"
            "- Never modify `population`.\n"
            "- Take every random number from `rng`; the standard library only otherwise.\n"
            "- Costs do not change during a call, so compute each one at most once. "
            "Avoid full sorts or full scans where sampling with `rng.randint` is enough.",
        ),
        Section("reference", "Reference classes", _REFERENCE),
        Section(
            "reflection",
            "Reflection",
            "After drafting C, check it against your own list of failure modes. Say "
            "which ones it handles, which remain open, and name two concrete changes "
            "that would improve it further.",
        ),
        Section(
            "response",
            "Response format",
            "Start with one sentence beginning `Hypothesis:` that states the idea behind C. "
            "Then give exactly one fenced python code block holding the imports and "
            "`select_parents`, nothing else. Any remarks after the code go in a "
            "paragraph beginning `Reflection:`.",
        ),
        Section("parents", "Current selectors", _PARENTS),
    ),
    reactive=(
        Section("parents", "Current selectors", _PARENTS),
        Section(
            "task",
            "Task",
            "Generate an improved version of these selectors with the signature below. "
            "Reply with a single fenced python code block.\n\n" + _SIGNATURE,
        ),
    ),
)


def _bullets(items) -> str:
    return "\n".join(f"- {item}" for item in items)


def placeholders(text: str) -> set[str]:
    return {a or b for a, b in _PLACEHOLDER.findall(text)}


def render_prompt(
    template: PromptTemplate,
    mode: str,
    parents: tuple["Candidate", "Candidate"],
    baseline_score: float,
    knowledge: KnowledgeBase | None,
) -> str:
    """Assemble the prompt for one generation request.

    ``baseline_score`` and the parents' scores are shown as costs (the
    negated fitness). Raises :class:`PlaceholderError` when a placeholder in
    the chosen sections has no value, e.g. a parent lacking feedback.
    """
    from .candidate import candidate_code

    sections = template.pick(mode)
    skeleton = "\n".join(s.text() for s in sections)
    values: dict[str, object] = {}
    p1, p2 = parents
    for tag, cand in (("1", p1), ("2", p2)):
        if cand is None:
            continue
        values["code" + tag] = candidate_code(cand)
        if cand.fitness is not None:
            values["score" + tag] = f"{-cand.fitness:.2f}"
        if cand.feedback is not None:
            values["feedback" + tag] = cand.feedback
    if baseline_score is not None:
        values["baseline_score"] = f"{baseline_score:.2f}"
    if mode == "full":
        if knowledge is None or not knowledge.is_complete():
            raise ValueError("full mode needs non-empty pitfalls, strategies and traps")
        values["pitfalls"] = _bullets(knowledge.pitfalls)
        values["strategies"] = _bullets(knowledge.strategies)
        values["traps"] = _bullets(knowledge.traps)
    missing = placeholders(skeleton) - set(values)
    if missing:
        raise PlaceholderError(missing)
    # Values are inserted in one pass, so '$' inside candidate code is kept verbatim.
    return Template(skeleton).substitute({k: str(v) for k, v in values.items()})
