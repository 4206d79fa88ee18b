"""Running subjects and collecting raw feedback.

Built-in subjects are Python programs instrumented with a :class:`Tracer`
that records coverage units and counts executed statements; their runtime is
that statement count and their timeout is a statement budget.  External
subjects are separate processes speaking a line protocol on stdout::

    COV <unit-id>        one line per covered unit
    EXC <exception-id>   at most one per run

Input bytes go to the process's stdin; runtime is wall milliseconds.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

TIMEOUT_EXCEPTION = "timeout"


@dataclass(frozen=True)
class RawFeedback:
    covered_units: frozenset[str] = frozenset()
    exception: str | None = None
    runtime: float = 0.0
    timed_out: bool = False
    result: object = field(default=None, compare=False)


class SubjectLaunchError(RuntimeError):
    """The subject itself could not be started (not a subject-level failure)."""


class SubjectException(Exception):
    """Raised inside built-in subjects; ``args[0]`` is the exception id."""

    @property
    def exception_id(self) -> str:
        return self.args[0]


class _BudgetExceeded(Exception):
    pass


class Tracer:
    def __init__(self, budget: float):
        self.budget = budget
        self.steps = 0
        self.covered: set[str] = set()

    def step(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.budget:
            raise _BudgetExceeded

    def cover(self, unit: str) -> None:
        self.covered.add(unit)


class SubjectAdapter:
    name: str
    total_units: int
    units: frozenset[str] | None = None
    # Used when a campaign does not set a timeout explicitly.
    default_timeout: float = 1000.0

    def run(self, data: bytes, timeout: float) -> RawFeedback:
        raise NotImplementedError


class BuiltinSubject(SubjectAdapter):
    def __init__(self, name: str, units: Sequence[str],
                 program: Callable[[bytes, Tracer], object], default_timeout: float = 1000.0):
        self.name = name
        self.default_timeout = default_timeout
        self.units = frozenset(units)
        self.total_units = len(self.units)
        self.program = program

    def run(self, data: bytes, timeout: float) -> RawFeedback:
        tracer = Tracer(timeout)
        result = exception = None
        try:
            result = self.program(bytes(data), tracer)
        except SubjectException as exc:
            exception = exc.exception_id
        except _BudgetExceeded:
            return RawFeedback(frozenset(tracer.covered), TIMEOUT_EXCEPTION, timeout, True)
        unknown = tracer.covered - self.units
        assert not unknown, f"undeclared units {unknown}"
        return RawFeedback(frozenset(tracer.covered), exception, tracer.steps, False, result)

    def __repr__(self):
        return f"BuiltinSubject({self.name!r})"


class ExternalSubject(SubjectAdapter):
    def __init__(self, command: str | Sequence[str], total_units: int):
        if total_units < 1:
            raise ValueError("total_units must be positive for external subjects")
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ValueError("empty subject command")
        self.name = self.argv[0]
        self.total_units = total_units

    def run(self, data: bytes, timeout: float) -> RawFeedback:
        """``timeout`` is in milliseconds."""
        started = time.perf_counter()
        try:
            proc = subprocess.run(self.argv, input=bytes(data), stdout=subprocess.PIPE,
                                  stderr=subprocess.DEVNULL, timeout=timeout / 1000.0)
        except subprocess.TimeoutExpired as exc:
            covered, _ = parse_protocol(exc.stdout or b"")
            return RawFeedback(covered, TIMEOUT_EXCEPTION, timeout, True)
        except OSError as exc:
            raise SubjectLaunchError(f"cannot launch {self.argv[0]!r}: {exc}") from exc
        elapsed = (time.perf_counter() - started) * 1000.0
        covered, exception = parse_protocol(proc.stdout)
        if exception is None and proc.returncode != 0:
            exception = f"exit:{proc.returncode}"
        return RawFeedback(covered, exception, min(elapsed, timeout), False)

    def __repr__(self):
        return f"ExternalSubject({shlex.join(self.argv)!r})"


def parse_protocol(output: bytes) -> tuple[frozenset[str], str | None]:
    covered = set()
    exception = None
    for line in output.decode("utf-8", "replace").splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] == "COV":
            covered.add(parts[1])
        elif len(parts) == 2 and parts[0] == "EXC" and exception is None:
            exception = parts[1]
    return frozenset(covered), exception


def run_subject(adapter: SubjectAdapter, data: bytes, timeout: float) -> RawFeedback:
    return adapter.run(data, timeout)


def run_many(adapter: SubjectAdapter, inputs: Sequence[bytes], timeout: float,
             workers: int = 1) -> list[RawFeedback]:
    """Execute all inputs; results are returned in input order."""
    if workers <= 1 or len(inputs) <= 1:
        return [adapter.run(data, timeout) for data in inputs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda d: adapter.run(d, timeout), inputs))
