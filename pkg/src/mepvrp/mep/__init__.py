"""Evolution harness for solver operators: prompts, generators, sandbox, evaluation."""

from .candidate import WORST_FITNESS, Candidate, RunRecord, registry_candidate
from .evaluate import EvalConfig, evaluate_candidate
from .evolve import EvolutionAborted, EvolveConfig, evolve
from .generators import GeneratorUnavailable, HttpGenerator, LatticeGenerator, Request, ScriptedGenerator, registry_reply
from .knowledge import KnowledgeBase
from .parsing import ResponseError, parse_generator_response
from .prompt import DEFAULT_TEMPLATE, MODES, PlaceholderError, render_prompt
from .sandbox import SandboxError, SandboxSelector

__all__ = [
    "Candidate",
    "DEFAULT_TEMPLATE",
    "EvalConfig",
    "EvolutionAborted",
    "EvolveConfig",
    "GeneratorUnavailable",
    "HttpGenerator",
    "KnowledgeBase",
    "LatticeGenerator",
    "MODES",
    "PlaceholderError",
    "Request",
    "ResponseError",
    "RunRecord",
    "SandboxError",
    "SandboxSelector",
    "ScriptedGenerator",
    "WORST_FITNESS",
    "evaluate_candidate",
    "evolve",
    "parse_generator_response",
    "registry_candidate",
    "registry_reply",
    "render_prompt",
]
