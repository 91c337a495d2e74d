"""Refinement loop: assert the abstracted formula, check, validate candidate
models against concrete semantics, strengthen spurious instances, project.

Assertions only ever accumulate; nothing is retracted.  An unsat answer from
the backend is therefore final (every asserted stage over-approximates), and
a sat answer is only reported after every abstracted operation checks out
under concrete evaluation and the original assertions re-evaluate to true.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .abstraction import Abstractor, AbstractionInstance, SchemeConfig
from .backends import Backend, SAT, UNKNOWN, UNSAT
from .errors import EngineError, MissingAssignment, UnboundSymbol
from .smtlib import Script
from .terms import BvValue, Term, concrete_op


@dataclass
class Limits:
    timeout: float | None = None     # seconds over the whole loop
    max_rounds: int | None = None


@dataclass
class InstanceStats:
    op: str
    width: int
    stages: tuple[str, ...]
    full_intervals: int
    refinements: int
    exhausted: bool


@dataclass
class SolveResult:
    status: str                       # sat | unsat | unknown
    reason: str | None = None         # timeout | backend-failure | exhausted | max-rounds
    model: dict[str, BvValue | bool] | None = None
    rounds: int = 0
    cpu_seconds: float = 0.0
    wall_seconds: float = 0.0
    per_instance: list[InstanceStats] = field(default_factory=list)

    def stats_lines(self) -> list[str]:
        lines = [f"rounds={self.rounds}",
                 f"cpu_seconds={self.cpu_seconds:.3f}"]
        for i, s in enumerate(self.per_instance):
            lines.append(
                f"instance {i}: {s.op}{s.width} stages={','.join(s.stages) or '-'} "
                f"full-intervals={s.full_intervals} "
                f"refinements={s.refinements} exhausted={s.exhausted}")
        return lines


def check_spurious(script: Script, model: dict,
                   registry: list[AbstractionInstance]) -> list[AbstractionInstance]:
    """Instances whose proxy value disagrees with the concrete operation."""
    tt = script.table
    violated = []
    for inst in registry:
        try:
            vx = tt.eval(inst.x, model)
            vy = tt.eval(inst.y, model)
        except UnboundSymbol as e:
            raise MissingAssignment(str(e)) from None
        got = model.get(inst.proxy.name)
        if got is None:
            raise MissingAssignment(inst.proxy.name)
        exact = concrete_op(inst.op.kind, [vx, vy])
        if got != exact:
            violated.append(inst)
    return violated


def project_model(model: dict, script: Script) -> dict[str, BvValue | bool]:
    """Restriction of a model to the script-declared symbols; symbols the
    backend never saw are unconstrained and default to zero/false."""
    out = {}
    for name, sort in script.declarations:
        v = model.get(name)
        if v is None:
            v = False if sort.is_bool else BvValue(sort.width, 0)
        out[name] = v
    return out


class _Clock:
    def __init__(self, kind: str):
        self.kind = kind
        self.t_cpu = time.process_time()
        self.t_wall = time.monotonic()

    def cpu(self) -> float:
        return time.process_time() - self.t_cpu

    def wall(self) -> float:
        return time.monotonic() - self.t_wall

    def elapsed(self) -> float:
        return self.cpu() if self.kind == "cpu" else self.wall()


def _backend_clock(backend: Backend) -> str:
    # the external client burns its CPU in a child process
    return "wall" if type(backend).__name__ == "ExternalBackend" else "cpu"


def _finish(status, clock, rounds, registry, refine_counts, *, reason=None,
            model=None) -> SolveResult:
    stats = [InstanceStats(op=i.op.value, width=i.width,
                           stages=tuple(i.stages_run),
                           full_intervals=len(i.hbs_asserted),
                           refinements=refine_counts.get(i.idx, 0),
                           exhausted=i.exhausted)
             for i in registry]
    return SolveResult(status=status, reason=reason, model=model,
                       rounds=rounds, cpu_seconds=clock.cpu(),
                       wall_seconds=clock.wall(), per_instance=stats)


def solve(script: Script, config: SchemeConfig | None, backend: Backend,
          limits: Limits | None = None) -> SolveResult:
    """Abstraction-refinement solving of a parsed script.

    With config None the assertions go to the backend unabstracted
    (the baseline mode of the benchmark harness).
    """
    limits = limits or Limits()
    clock = _Clock(_backend_clock(backend))
    tt = script.table

    if config is None:
        abstractor = None
        base = list(script.assertions)
        registry: list[AbstractionInstance] = []
    else:
        abstractor = Abstractor(tt, config,
                                reserved_names={n for n, _ in script.declarations})
        base = abstractor.abstract_script(script)
        registry = abstractor.registry

    for t in base:
        backend.assert_term(t)

    rounds = 0
    refine_counts: dict[int, int] = {}
    while True:
        budget = None
        if limits.timeout is not None:
            budget = limits.timeout - clock.elapsed()
            if budget <= 0:
                return _finish(UNKNOWN, clock, rounds, registry, refine_counts,
                               reason="timeout")
        verdict = backend.check_sat(timeout=budget)
        if verdict == UNSAT:
            return _finish(UNSAT, clock, rounds, registry, refine_counts)
        if verdict == UNKNOWN:
            return _finish(UNKNOWN, clock, rounds, registry, refine_counts,
                           reason="timeout")

        model = backend.get_value(backend.known_symbols())
        # declared symbols the backend never saw are unconstrained: any
        # completion extends the model, zero keeps things deterministic
        for name, sort in script.declarations:
            if name not in model:
                model[name] = False if sort.is_bool else BvValue(sort.width, 0)
        violated = check_spurious(script, model, registry)
        if not violated:
            projected = project_model(model, script)
            for a in script.assertions:
                if tt.eval(a, projected) is not True:
                    raise EngineError(
                        "genuine model fails an original assertion")
            return _finish(SAT, clock, rounds, registry, refine_counts,
                           model=projected)

        rounds += 1
        if limits.max_rounds is not None and rounds > limits.max_rounds:
            return _finish(UNKNOWN, clock, rounds, registry, refine_counts,
                           reason="max-rounds")
        emitted = 0
        refinable = 0
        for inst in violated:
            out = abstractor.next_refinement(inst, model)
            if out is None:
                continue
            refinable += 1
            refine_counts[inst.idx] = refine_counts.get(inst.idx, 0) + 1
            for c in out.constraints:
                backend.assert_term(c)
            emitted += len(out.constraints)
        if refinable == 0:
            # every violated instance ran out of stages: an incomplete
            # stage-prefix configuration cannot decide this formula
            return _finish(UNKNOWN, clock, rounds, registry, refine_counts,
                           reason="exhausted")
        if emitted == 0:
            raise EngineError("refinement round asserted nothing; "
                              "scheme configuration cannot make progress")
