"""The evolution loop: prompt, generate, evaluate, retain the best."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..instance import ProblemData
from ..rng import RandomNumberGenerator, derive_seed
from .candidate import WORST_FITNESS, Candidate, RunRecord, registry_candidate
from .evaluate import EvalConfig, evaluate_candidate
from .generators import Generator, GeneratorUnavailable, Request
from .knowledge import KnowledgeBase
from .parsing import ResponseError, parse_generator_response
from .prompt import DEFAULT_TEMPLATE, MODES, PromptTemplate, render_prompt

Evaluator = Callable[[Candidate], tuple[float, str]]


class EvolutionAborted(GeneratorUnavailable):
    """The generator became unreachable; ``record`` holds the partial run."""

    def __init__(self, message: str, record: RunRecord):
        super().__init__(message)
        self.record = record


@dataclass
class EvolveConfig:
    generator: Generator
    instances: Sequence[ProblemData] = ()
    generations: int = 10
    offspring_per_gen: int = 10
    survivors: int = 5
    seeds: tuple[int, ...] = (0,)
    mode: str = "full"
    eval: EvalConfig = field(default_factory=EvalConfig)
    knowledge: KnowledgeBase | None = None
    template: PromptTemplate = DEFAULT_TEMPLATE
    record_path: str | None = None
    jobs: int = 1
    evaluator: Evaluator | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.generations < 1 or self.offspring_per_gen < 1 or self.survivors < 1:
            raise ValueError("generations, offspring_per_gen and survivors must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.evaluator is None and not self.instances:
            raise ValueError("an instance set is required")
        if self.mode == "full" and self.knowledge is None:
            self.knowledge = KnowledgeBase.load()

    def snapshot(self) -> dict:
        return {
            "generator": type(self.generator).__name__,
            "instances": [d.name for d in self.instances],
            "generations": self.generations,
            "offspring_per_gen": self.offspring_per_gen,
            "survivors": self.survivors,
            "seeds": list(self.seeds),
            "mode": self.mode,
            "template": self.template.name,
            "eval": {
                "max_iterations": self.eval.max_iterations,
                "population_min": self.eval.population_min,
                "population_max": self.eval.population_max,
                "seed": self.eval.seed,
            },
        }


def _evaluate_all(config: EvolveConfig, pending: list[Candidate], cache: dict, reference: float | None) -> None:
    todo: dict[str, Candidate] = {}
    for cand in pending:
        key = cand.behaviour_key()
        if key not in cache and key not in todo:
            todo[key] = cand
    if config.evaluator is not None:
        for key, cand in todo.items():
            cache[key] = config.evaluator(cand)
    elif config.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = {
                key: pool.submit(evaluate_candidate, cand, list(config.instances), config.eval, reference)
                for key, cand in todo.items()
            }
            for key, fut in futures.items():
                cache[key] = fut.result()
    else:
        for key, cand in todo.items():
            cache[key] = evaluate_candidate(cand, config.instances, config.eval, reference)
    for cand in pending:
        cand.fitness, cand.feedback = cache[cand.behaviour_key()]


def _retain(pool: list[Candidate], survivors: int) -> list[Candidate]:
    # Stable: on equal fitness the earlier (older) candidate wins.
    return sorted(pool, key=lambda c: -c.fitness)[:survivors]


def evolve(config: EvolveConfig) -> tuple[Candidate, RunRecord]:
    """Evolve parent selectors; returns the best candidate over all seeds."""
    record = RunRecord(config=config.snapshot(), path=config.record_path)
    record.start()
    cache: dict[str, tuple[float, str]] = {}
    overall: Candidate | None = None

    for seed in config.seeds:
        run = record.begin_seed(seed)
        rng = RandomNumberGenerator(derive_seed(seed, 1))
        base = registry_candidate(f"s{seed}-g0-base", "baseline", hypothesis="default biased-fitness tournaments")
        _evaluate_all(config, [base], cache, None)
        reference = -base.fitness if not base.failed else None
        record.candidate(run, base)
        population = [base]
        record.generation(run, 0, population)

        for gen in range(1, config.generations + 1):
            offspring: list[Candidate] = []
            for o in range(config.offspring_per_gen):
                if len(population) >= 2:
                    i = rng.randint(len(population))
                    j = rng.randint(len(population) - 1)
                    j += j >= i
                else:
                    i = j = 0
                p1, p2 = population[i], population[j]
                best_cost = -max(c.fitness for c in population)
                prompt = render_prompt(config.template, config.mode, (p1, p2), best_cost, config.knowledge)
                cid = f"s{seed}-g{gen}-o{o}"
                try:
                    response = config.generator.generate(Request(prompt, seed, gen, o, (p1.id, p2.id)))
                except GeneratorUnavailable as exc:
                    record.exchange(run, prompt, None)
                    record.abort(run, str(exc))
                    raise EvolutionAborted(str(exc), record) from exc
                record.exchange(run, prompt, response)
                try:
                    parsed = parse_generator_response(response)
                    cand = Candidate(
                        cid,
                        parsed.kind,
                        parsed.payload,
                        parents=(p1.id, p2.id),
                        hypothesis=parsed.hypothesis,
                        reflection=parsed.reflection,
                        generation=gen,
                    )
                except ResponseError as exc:
                    cand = Candidate(
                        cid,
                        "external-source",
                        response,
                        fitness=WORST_FITNESS,
                        feedback=f"{exc.kind}: {exc}",
                        parents=(p1.id, p2.id),
                        generation=gen,
                    )
                offspring.append(cand)
            _evaluate_all(config, [c for c in offspring if not c.evaluated], cache, reference)
            for cand in offspring:
                record.candidate(run, cand)
            population = _retain(population + offspring, config.survivors)
            record.generation(run, gen, population)

        run.best_id = population[0].id
        if overall is None or population[0].fitness > overall.fitness:
            overall = population[0]

    assert overall is not None
    record.finish(overall)
    return overall, record
