"""Run generated selector source in a separate worker process.

The worker is a plain child process with CPU-time and memory limits; it is
a fault boundary (crashes, hangs, bad replies), not a security sandbox.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import sys
import tempfile
import threading

from ..rng import RandomNumberGenerator
from ..solution import Solution


class SandboxError(RuntimeError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


def _limits(cpu_seconds: int, memory_bytes: int):
    def apply():
        try:
            import resource

            resource.setrlimit(resource.RLIMIT_CPU, (cpu_seconds, cpu_seconds))
            resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
        except (ImportError, ValueError, OSError):
            pass

    return apply


class SandboxSelector:
    """A ``select_parents`` plug-point backed by a worker process.

    Use as a context manager. Every call sends one request line and waits
    at most ``timeout`` seconds for the reply.
    """

    def __init__(
        self,
        source: str,
        timeout: float = 5.0,
        cpu_seconds: int = 600,
        memory_bytes: int = 2 << 30,
        command: list[str] | None = None,
    ):
        self.source = source
        self.timeout = timeout
        self.cpu_seconds = cpu_seconds
        self.memory_bytes = memory_bytes
        self.command = command
        self.calls = 0
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._tmp: str | None = None

    def __enter__(self) -> "SandboxSelector":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def start(self) -> None:
        fd, self._tmp = tempfile.mkstemp(suffix=".py", prefix="candidate-")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.source)
        cmd = self.command or [sys.executable, "-m", "mepvrp.mep.worker"]
        self._proc = subprocess.Popen(
            cmd + [self._tmp],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
            preexec_fn=_limits(self.cpu_seconds, self.memory_bytes) if os.name == "posix" else None,
        )
        reader = threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True)
        reader.start()
        hello = self._read()
        if hello.get("ready") is not True:
            raise SandboxError("load-error", str(hello.get("error", hello)))

    def _pump(self, stream) -> None:
        for line in stream:
            self._lines.put(line)
        self._lines.put(None)

    def _read(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise SandboxError("timeout", f"no reply within {self.timeout}s") from None
        if line is None:
            code = self._proc.wait() if self._proc else None
            raise SandboxError("crash", f"worker exited with status {code}")
        try:
            doc = json.loads(line)
        except ValueError:
            raise SandboxError("protocol-error", f"malformed reply {line[:80]!r}") from None
        if not isinstance(doc, dict):
            raise SandboxError("protocol-error", "reply is not a JSON object")
        return doc

    def __call__(self, population: list[Solution], rng: RandomNumberGenerator, cost_evaluator, k: int = 2):
        if self._proc is None:
            raise SandboxError("not-started", "call start() first")
        request = {
            "population": [s.visits() for s in population],
            "costs": [cost_evaluator.penalised_cost(s) for s in population],
            "feasible": [s.is_feasible() for s in population],
            "seed": rng.randint(1 << 31),
            "k": k,
        }
        self.calls += 1
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise SandboxError("crash", "worker closed its input") from None
        reply = self._read()
        if "error" in reply:
            raise SandboxError("candidate-error", str(reply["error"]))
        i, j = reply.get("parent1_index"), reply.get("parent2_index")
        n = len(population)
        for idx in (i, j):
            if isinstance(idx, bool) or not isinstance(idx, int) or not 0 <= idx < n:
                raise SandboxError("protocol-error", f"bad index in reply {reply}")
        return population[i], population[j]

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None
        if self._tmp is not None:
            try:
                os.unlink(self._tmp)
            except OSError:
                pass
            self._tmp = None
