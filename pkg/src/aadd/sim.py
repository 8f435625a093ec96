"""Static timed-dataflow simulation kernel with range-assertion checking.

Processes fire at fixed periods, consume and produce a constant number of
tokens per firing (so the schedule is computable before execution), and pass
opaque values along single-writer signals.  With plain floats/bools the run
is an ordinary numeric simulation; with :class:`~aadd.diagram.Aadd` values
the same network runs symbolically, and the trace records LP-tightened
per-leaf ranges and hulls per signal and time tag.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from . import diagram
from .diagram import Aadd
from .interval import Interval

PASS = "PASS"
VIOLATED_POSSIBLY = "VIOLATED-POSSIBLY"
VIOLATED = "VIOLATED"

SAFETY = "safety"
SPEC = "spec"


class StaticScheduleError(ValueError):
    """The network violates static-dataflow schedulability."""


def as_time(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**9)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a time")


@dataclass(frozen=True)
class PortSpec:
    kind: str  # 'real' | 'bool'
    rate: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("real", "bool"):
            raise ValueError(f"unknown port kind: {self.kind!r}")
        if self.rate < 1:
            raise ValueError("port rate must be >= 1")


class Process:
    """A deterministic dataflow actor with a fixed activation period.

    ``step(state, inputs) -> (new_state, outputs)`` receives per-port token
    lists and returns per-port values (a bare value stands for one token).
    """

    def __init__(
        self,
        name: str,
        period,
        inputs: Mapping[str, PortSpec] | None = None,
        outputs: Mapping[str, PortSpec] | None = None,
        state: dict | None = None,
        step: Callable | None = None,
    ) -> None:
        self.name = name
        self.period = as_time(period)
        if self.period <= 0:
            raise StaticScheduleError(f"{name}: period must be positive")
        self.inputs = dict(inputs or {})
        self.outputs = dict(outputs or {})
        self.state = dict(state or {})
        self._step = step

    def step(self, state: dict, inputs: dict) -> tuple[dict, dict]:
        if self._step is None:
            raise NotImplementedError(f"{self.name} has no step function")
        return self._step(state, inputs)


class ContinuousBlock(Process):
    """Explicit linear ODE integrated at the activation period.

    The derivative is sampled once per step and treated as constant across
    it, which is exact for piecewise-constant dynamics and forward Euler
    otherwise.  Emits the pre-step state, so the sample at t reflects x(t).
    """

    def __init__(self, name, period, inputs, x0, derivative, kind="real") -> None:
        super().__init__(
            name,
            period,
            inputs=inputs,
            outputs={"out": PortSpec(kind, 1)},
            state={"x": x0},
        )
        self.derivative = derivative
        self.h = float(self.period)

    def step(self, state, inputs):
        x = state["x"]
        d = self.derivative(inputs, x)
        return {"x": integrator_step(x, d, self.h)}, {"out": x}


def integrator_step(x, derivative, h: float):
    """One explicit integration step ``x + h * d``; exact when the
    derivative is constant over the step."""
    return x + h * derivative


@dataclass(frozen=True)
class Assertion:
    signal: str
    lo: float = -math.inf
    hi: float = math.inf
    severity: str = SAFETY

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"assertion bounds must satisfy lo < hi: [{self.lo}, {self.hi}]")
        if self.severity not in (SAFETY, SPEC):
            raise ValueError(f"unknown severity: {self.severity!r}")


@dataclass
class Event:
    tag: Fraction
    value: object


class Signal:
    """Single-writer stream of tagged values; every reader gets its own FIFO."""

    def __init__(self, name: str, kind: str) -> None:
        self.name = name
        self.kind = kind
        self.events: list[Event] = []
        self.queues: list[_Connection] = []
        self._last_tag: Fraction | None = None

    def publish(self, tag: Fraction, value) -> None:
        if self._last_tag is not None and tag <= self._last_tag:
            raise StaticScheduleError(f"{self.name}: event tags must strictly increase")
        self._last_tag = tag
        self.events.append(Event(tag, value))
        for conn in self.queues:
            conn.queue.append(value)


@dataclass
class _Connection:
    signal: Signal
    reader: str
    port: str
    queue: deque = field(default_factory=deque)
    initial: tuple = ()


class Network:
    """Processes plus connections; the unit the scheduler and runner act on."""

    def __init__(self) -> None:
        self.processes: dict[str, Process] = {}
        self.signals: dict[str, Signal] = {}
        self._writer_of: dict[str, str] = {}
        self.connections: list[_Connection] = []

    def add(self, process: Process) -> Process:
        if process.name in self.processes:
            raise ValueError(f"duplicate process name: {process.name}")
        self.processes[process.name] = process
        for port, spec in process.outputs.items():
            signal_name = f"{process.name}.{port}"
            self.signals[signal_name] = Signal(signal_name, spec.kind)
            self._writer_of[signal_name] = process.name
        return process

    def connect(self, source: str, target: str, initial: Iterable = ()) -> None:
        """Connect ``writer.port`` to ``reader.port``; ``initial`` tokens are
        consumed before anything produced in the run (they break cycles)."""
        signal = self.signals.get(source)
        if signal is None:
            raise ValueError(f"unknown output signal: {source}")
        reader_name, _, port = target.partition(".")
        reader = self.processes.get(reader_name)
        if reader is None or port not in reader.inputs:
            raise ValueError(f"unknown input port: {target}")
        if reader.inputs[port].kind != signal.kind:
            raise StaticScheduleError(f"kind mismatch on {source} -> {target}")
        conn = _Connection(signal, reader_name, port, deque(initial), tuple(initial))
        signal.queues.append(conn)
        self.connections.append(conn)


@dataclass
class Schedule:
    hyperperiod: Fraction
    firings: list[tuple[Fraction, str]]  # (offset within the hyperperiod, process)


def _lcm_times(values: list[Fraction]) -> Fraction:
    den = math.lcm(*(v.denominator for v in values))
    num = math.lcm(*(v.numerator * (den // v.denominator) for v in values))
    return Fraction(num, den)


def compile_schedule(network: Network) -> Schedule:
    """Periodic firing order over one hyperperiod.

    Checks token balance on every connection, that all inputs are fed, and
    that same-instant firings can be ordered by data availability (a stuck
    instant means a zero-delay cycle).
    """
    if not network.processes:
        raise StaticScheduleError("empty network")
    procs = network.processes
    for conn in network.connections:
        writer = procs[network._writer_of[conn.signal.name]]
        reader = procs[conn.reader]
        w_port = conn.signal.name.split(".", 1)[1]
        produced = Fraction(writer.outputs[w_port].rate) / writer.period
        consumed = Fraction(reader.inputs[conn.port].rate) / reader.period
        if produced != consumed:
            raise StaticScheduleError(
                f"rate mismatch on {conn.signal.name} -> {conn.reader}.{conn.port}: "
                f"{produced} produced vs {consumed} consumed tokens/sec"
            )
    fed = {(c.reader, c.port) for c in network.connections}
    for name, proc in procs.items():
        for port in proc.inputs:
            if (name, port) not in fed:
                raise StaticScheduleError(f"input {name}.{port} is not connected")

    hyper = _lcm_times([p.period for p in procs.values()])
    due: dict[Fraction, list[str]] = {}
    for name, proc in procs.items():
        k = 0
        while proc.period * k < hyper:
            due.setdefault(proc.period * k, []).append(name)
            k += 1

    # Simulate token counts to order same-instant firings.
    tokens = {id(c): len(c.queue) for c in network.connections}
    in_conns: dict[str, list[_Connection]] = {}
    for c in network.connections:
        in_conns.setdefault(c.reader, []).append(c)
    firings: list[tuple[Fraction, str]] = []
    for tag in sorted(due):
        waiting = list(due[tag])
        while waiting:
            progressed = False
            for name in list(waiting):
                proc = procs[name]
                ready = all(
                    tokens[id(c)] >= proc.inputs[c.port].rate for c in in_conns.get(name, [])
                )
                if not ready:
                    continue
                for c in in_conns.get(name, []):
                    tokens[id(c)] -= proc.inputs[c.port].rate
                for port, spec in proc.outputs.items():
                    for c in network.signals[f"{name}.{port}"].queues:
                        tokens[id(c)] += spec.rate
                firings.append((tag, name))
                waiting.remove(name)
                progressed = True
            if not progressed:
                raise StaticScheduleError(
                    f"zero-delay cycle at t={tag}: stuck processes {sorted(waiting)}"
                )
    for c in network.connections:
        if tokens[id(c)] != len(c.initial):
            raise StaticScheduleError(
                f"token accumulation on {c.signal.name} -> {c.reader}.{c.port}"
            )
    return Schedule(hyper, firings)


# -- traces -------------------------------------------------------------------


@dataclass
class TraceSample:
    tag: float
    hull: Interval
    leaf_count: int
    leaves: list[tuple[str, Interval]] | None = None


@dataclass
class Trace:
    hyperperiod: float
    horizon: float
    samples: dict[str, list[TraceSample]] = field(default_factory=dict)

    def record(self, signal: str, sample: TraceSample) -> None:
        self.samples.setdefault(signal, []).append(sample)

    def signal(self, name: str) -> list[TraceSample]:
        return self.samples[name]

    def to_json_dict(self) -> dict:
        return {
            "hyperperiod": self.hyperperiod,
            "horizon": self.horizon,
            "signals": {
                name: [
                    {
                        "t": s.tag,
                        "hull": [s.hull.lo, s.hull.hi],
                        "leaf_count": s.leaf_count,
                        **(
                            {"leaves": [{"path": p, "lo": iv.lo, "hi": iv.hi} for p, iv in s.leaves]}
                            if s.leaves is not None
                            else {}
                        ),
                    }
                    for s in samples
                ]
                for name, samples in self.samples.items()
            },
        }

    def write_csv(self, fp) -> None:
        fp.write("time,signal,hull_lo,hull_hi,leaf_count\n")
        rows = []
        for name, samples in self.samples.items():
            for s in samples:
                rows.append((s.tag, name, s.hull.lo, s.hull.hi, s.leaf_count))
        rows.sort(key=lambda r: (r[0], r[1]))
        for tag, name, lo, hi, n in rows:
            fp.write(f"{tag!r},{name},{lo!r},{hi!r},{n}\n")


def _summarize(value) -> TraceSample:
    if isinstance(value, Aadd):
        if value.kind == diagram.REAL:
            ranges = diagram.per_leaf_ranges(value)
            if not ranges:
                raise diagram.InconsistentDiagramError("signal value has no feasible path")
            hull = ranges[0].interval
            for r in ranges[1:]:
                hull = hull.hull(r.interval)
            leaves = [(value.ctx.describe_path(r.path), r.interval) for r in ranges]
            return TraceSample(0.0, hull, value.leaf_count(), leaves)
        values = diagram.possible_bool_values(value)
        as_floats = [1.0 if v else 0.0 for v in values]
        return TraceSample(0.0, Interval(min(as_floats), max(as_floats)), value.leaf_count(), None)
    if isinstance(value, bool):
        v = 1.0 if value else 0.0
        return TraceSample(0.0, Interval(v, v), 1, None)
    v = float(value)
    return TraceSample(0.0, Interval(v, v), 1, None)


def run_bounded(
    network: Network,
    horizon,
    trace_signals: Iterable[str] | None = None,
    reduce_states: bool = True,
) -> Trace:
    """Execute the static schedule up to ``horizon`` (a positive multiple of
    the hyperperiod) and record per-tag range summaries of traced signals."""
    schedule = compile_schedule(network)
    horizon = as_time(horizon)
    if horizon <= 0:
        raise StaticScheduleError(f"horizon must be positive, got {horizon}")
    cycles = horizon / schedule.hyperperiod
    if cycles.denominator != 1:
        raise StaticScheduleError(
            f"horizon {horizon} is not a multiple of the hyperperiod {schedule.hyperperiod}"
        )
    traced = set(trace_signals) if trace_signals is not None else set(network.signals)

    in_conns: dict[str, list[_Connection]] = {}
    for c in network.connections:
        in_conns.setdefault(c.reader, []).append(c)

    trace = Trace(float(schedule.hyperperiod), float(horizon))
    for cycle in range(int(cycles)):
        base = schedule.hyperperiod * cycle
        for offset, name in schedule.firings:
            tag = base + offset
            proc = network.processes[name]
            inputs = {}
            for c in in_conns.get(name, []):
                rate = proc.inputs[c.port].rate
                if len(c.queue) < rate:
                    raise StaticScheduleError(f"{name}.{c.port}: token underflow at t={tag}")
                inputs[c.port] = [c.queue.popleft() for _ in range(rate)]
            new_state, outputs = proc.step(proc.state, inputs)
            proc.state = new_state
            for port, spec in proc.outputs.items():
                values = outputs[port]
                if not isinstance(values, list):
                    values = [values]
                if len(values) != spec.rate:
                    raise StaticScheduleError(
                        f"{name}.{port}: produced {len(values)} tokens, rate is {spec.rate}"
                    )
                signal = network.signals[f"{name}.{port}"]
                step = proc.period / spec.rate
                for j, v in enumerate(values):
                    sub_tag = tag + step * j
                    signal.publish(sub_tag, v)
                    if signal.name in traced:
                        sample = _summarize(v)
                        sample.tag = float(sub_tag)
                        trace.record(signal.name, sample)
        if reduce_states:
            for proc in network.processes.values():
                for key, v in proc.state.items():
                    if isinstance(v, Aadd):
                        proc.state[key] = diagram.reduce(v, prune=True)
    return trace


# -- assertion checking ---------------------------------------------------------


@dataclass
class Violation:
    tag: float
    status: str
    hull: Interval
    witness: str | None


@dataclass
class AssertionResult:
    assertion: Assertion
    worst: str
    violations: list[Violation]

    @property
    def passed(self) -> bool:
        return self.worst == PASS


@dataclass
class AssertionReport:
    results: list[AssertionResult]

    def all_pass(self, severity: str | None = None) -> bool:
        return all(
            r.passed for r in self.results if severity is None or r.assertion.severity == severity
        )

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            a = r.assertion
            bounds = f"[{a.lo}, {a.hi}]"
            lines.append(f"{a.severity:>6}  {a.signal} in {bounds}: {r.worst}")
            for v in r.violations[:20]:
                witness = f"  witness {v.witness}" if v.witness else ""
                lines.append(f"        t={v.tag:g}: {v.status} hull={v.hull}{witness}")
            if len(r.violations) > 20:
                lines.append(f"        ... {len(r.violations) - 20} more tags")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "results": [
                {
                    "signal": r.assertion.signal,
                    "lo": r.assertion.lo,
                    "hi": r.assertion.hi,
                    "severity": r.assertion.severity,
                    "worst": r.worst,
                    "violations": [
                        {
                            "t": v.tag,
                            "status": v.status,
                            "hull": [v.hull.lo, v.hull.hi],
                            "witness": v.witness,
                        }
                        for v in r.violations
                    ],
                }
                for r in self.results
            ]
        }


def check_assertions(trace: Trace, assertions: Iterable[Assertion]) -> AssertionReport:
    """Per assertion and tag: PASS when the hull is inside the bounds;
    otherwise VIOLATED-POSSIBLY when some leaf interval still fits (the
    offending leaf is reported as a witness) and VIOLATED when none does."""
    results = []
    rank = {PASS: 0, VIOLATED_POSSIBLY: 1, VIOLATED: 2}
    for a in assertions:
        if a.signal not in trace.samples:
            raise KeyError(f"assertion references unknown signal {a.signal!r}")
        worst = PASS
        violations: list[Violation] = []
        for s in trace.signal(a.signal):
            if a.lo <= s.hull.lo and s.hull.hi <= a.hi:
                continue
            status = VIOLATED
            witness = None
            if s.leaves:
                inside = [l for _, l in (s.leaves or []) if a.lo <= l.lo and l.hi <= a.hi]
                if inside:
                    status = VIOLATED_POSSIBLY
                for path, leaf in s.leaves:
                    if not (a.lo <= leaf.lo and leaf.hi <= a.hi):
                        witness = f"{path} -> {leaf}"
                        break
            violations.append(Violation(s.tag, status, s.hull, witness))
            if rank[status] > rank[worst]:
                worst = status
        results.append(AssertionResult(a, worst, violations))
    return AssertionReport(results)


def write_json(obj: dict, fp) -> None:
    json.dump(obj, fp, indent=1, sort_keys=True)
    fp.write("\n")
