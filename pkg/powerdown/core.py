"""
Domain types and exact arithmetic for two-machine power-down scheduling.

Every time and energy value is a :class:`fractions.Fraction`. Floats only
appear at the reporting boundary (CSV columns, log lines).
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

RationalLike = Union[Fraction, int, str, Decimal, float]


class InstanceError(ValueError):
    """Raised when an instance, a job or a trace is malformed."""

    def __init__(self, message="Malformed instance."):
        super().__init__(message)


class ArgumentError(ValueError):
    """Raised when an operation receives an argument outside its domain."""

    def __init__(self, message="Invalid argument."):
        super().__init__(message)


def parse_rational(value: RationalLike) -> Fraction:
    """
    Parses a rational number exactly.

    Accepts ``Fraction``, ``int``, ``Decimal``, strings of the form ``"p/q"``
    or decimal strings such as ``"0.4745"``. Floats are converted through their
    shortest ``repr`` so ``0.1`` becomes ``1/10`` and not the binary value.

    Args:
        value: The value to parse.

    Returns:
        The exact Fraction.

    Raises:
        ArgumentError: If the value cannot be read as a rational.
    """
    if isinstance(value, bool):
        raise ArgumentError(f"Not a rational number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ArgumentError(f"Not a finite number: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                return Fraction(int(num.strip()), int(den.strip()))
            return Fraction(Decimal(text))
        except (ValueError, ZeroDivisionError, InvalidOperation):
            raise ArgumentError(f"Not a rational number: {value!r}") from None
    raise ArgumentError(f"Not a rational number: {value!r}")


def format_rational(value: Fraction) -> str:
    """Formats a Fraction as ``"p"`` or ``"p/q"``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_gcd(values: Iterable[Fraction]) -> Optional[Fraction]:
    """Largest rational g such that every value is an integer multiple of g."""
    values = [Fraction(v) for v in values if v != 0]
    if not values:
        return None
    lcm = 1
    for v in values:
        lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
    g = 0
    for v in values:
        g = math.gcd(g, abs(v.numerator * (lcm // v.denominator)))
    return Fraction(g, lcm)


class State(str, enum.Enum):
    OFF = "OFF"
    IDLE = "IDLE"
    BUSY = "BUSY"


@dataclass(frozen=True)
class Job:
    """
    One request: arrival ``a``, deadline ``d`` and execution time ``c``.

    Values are coerced to Fractions on construction.

    Raises:
        InstanceError: If ``c <= 0`` or ``a + c > d``.
    """

    id: str
    a: Fraction
    d: Fraction
    c: Fraction

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        for name in ("a", "d", "c"):
            try:
                object.__setattr__(self, name, parse_rational(getattr(self, name)))
            except ArgumentError as e:
                raise InstanceError(f"Job {self.id}: {e}") from None
        if self.c <= 0:
            raise InstanceError(f"Job {self.id}: execution time must be positive, got {self.c}")
        if self.a + self.c > self.d:
            raise InstanceError(f"Job {self.id}: window [{self.a}, {self.d}] cannot hold c={self.c}")

    @property
    def slack(self) -> Fraction:
        return self.d - self.a - self.c

    def edf_key(self) -> Tuple[Fraction, str]:
        return (self.d, self.id)


@dataclass(frozen=True)
class EnergyModel:
    """
    Energy model with E and psi_b fixed to 1 and idle power ``psi_sigma`` in (0, 1].
    """

    psi_sigma: Fraction = Fraction(1)

    def __post_init__(self):
        try:
            psi = parse_rational(self.psi_sigma)
        except ArgumentError as e:
            raise InstanceError(str(e)) from None
        if not (0 < psi <= 1):
            raise InstanceError(f"psi_sigma must lie in (0, 1], got {psi}")
        object.__setattr__(self, "psi_sigma", psi)

    @property
    def E(self) -> Fraction:
        return Fraction(1)

    @property
    def psi_b(self) -> Fraction:
        return Fraction(1)

    @property
    def break_even(self) -> Fraction:
        return self.E / self.psi_sigma


@dataclass(frozen=True)
class Instance:
    """
    An energy model plus a job set, stored sorted by (arrival, id).

    Raises:
        InstanceError: On duplicate job ids.
    """

    model: EnergyModel
    jobs: Tuple[Job, ...] = ()

    def __post_init__(self):
        jobs = tuple(sorted(self.jobs, key=lambda j: (j.a, j.id)))
        ids = [j.id for j in jobs]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InstanceError(f"Duplicate job ids: {', '.join(dupes)}")
        object.__setattr__(self, "jobs", jobs)

    def job(self, job_id: str) -> Job:
        for j in self.jobs:
            if j.id == job_id:
                return j
        raise KeyError(job_id)

    @property
    def job_map(self) -> Dict[str, Job]:
        return {j.id: j for j in self.jobs}

    @property
    def total_work(self) -> Fraction:
        return sum((j.c for j in self.jobs), Fraction(0))

    def with_jobs(self, jobs: Iterable[Job]) -> "Instance":
        return Instance(self.model, tuple(jobs))

    def without(self, job_id: str) -> "Instance":
        return self.with_jobs(j for j in self.jobs if j.id != job_id)

    def suffix(self, t: Fraction) -> "Instance":
        """Sub-instance of the jobs arriving at or after ``t``."""
        return self.with_jobs(j for j in self.jobs if j.a >= t)


@dataclass(frozen=True)
class Segment:
    start: Fraction
    end: Fraction
    state: State
    job: Optional[str] = None

    @property
    def length(self) -> Fraction:
        return self.end - self.start


@dataclass(frozen=True)
class TurnOn:
    machine: int
    t: Fraction


@dataclass(frozen=True)
class Trace:
    """
    Per-machine timelines of OFF / IDLE / BUSY segments plus turn-on events.

    A machine's timeline starts at its first turn-on and ends at its last
    turn-off; a machine that never runs has an empty timeline. A machine that
    turns off and on again at the same instant has a turn-on at the border of
    two ON segments (a restart).
    """

    machines: Tuple[Tuple[Segment, ...], ...] = ((), ())
    turn_ons: Tuple[TurnOn, ...] = ()

    def segments(self, state: Optional[State] = None) -> List[Tuple[int, Segment]]:
        return [
            (m, seg)
            for m, timeline in enumerate(self.machines)
            for seg in timeline
            if state is None or seg.state == state
        ]

    def total(self, state: State) -> Fraction:
        return sum((seg.length for _, seg in self.segments(state)), Fraction(0))

    def busy_by_job(self) -> Dict[str, Fraction]:
        work: Dict[str, Fraction] = {}
        for _, seg in self.segments(State.BUSY):
            work[seg.job] = work.get(seg.job, Fraction(0)) + seg.length
        return work

    def restarts(self, machine: int) -> List[Fraction]:
        """Turn-on instants of ``machine`` with ON time directly before them."""
        ons = {on.t for on in self.turn_ons if on.machine == machine}
        timeline = self.machines[machine]
        return [
            seg.start
            for prev, seg in zip(timeline, timeline[1:])
            if seg.start in ons and prev.state != State.OFF and seg.state != State.OFF
        ]

    def on_intervals(self, machine: Optional[int] = None) -> List[Tuple[Fraction, Fraction]]:
        """
        Maximal ON stretches. With ``machine=None`` the stretches of all machines
        are merged into one union. A restart ends a stretch unless another
        machine is ON across it.
        """
        machines = range(len(self.machines)) if machine is None else (machine,)
        stretches: List[List[Fraction]] = []
        restarts = set()
        for m in machines:
            cuts = set(self.restarts(m))
            restarts |= cuts
            own: List[List[Fraction]] = []
            for seg in self.machines[m]:
                if seg.state == State.OFF:
                    continue
                if own and own[-1][1] == seg.start and seg.start not in cuts:
                    own[-1][1] = seg.end
                else:
                    own.append([seg.start, seg.end])
            stretches.extend(own)
        merged: List[List[Fraction]] = []
        for s, e in sorted(stretches):
            if merged and (s < merged[-1][1] or (s == merged[-1][1] and s not in restarts)):
                merged[-1][1] = max(merged[-1][1], e)
            else:
                merged.append([s, e])
        return [(s, e) for s, e in merged]

    def horizon(self) -> Optional[Tuple[Fraction, Fraction]]:
        segs = [seg for _, seg in self.segments()]
        if not segs:
            return None
        return min(s.start for s in segs), max(s.end for s in segs)


def merge_intervals(pieces: Iterable[Tuple[Fraction, Fraction]]) -> List[Tuple[Fraction, Fraction]]:
    """Merges overlapping or touching intervals; empty intervals are dropped."""
    merged: List[List[Fraction]] = []
    for s, e in sorted(p for p in pieces if p[1] > p[0]):
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


@dataclass(frozen=True)
class Witness:
    l: Fraction
    r: Fraction
    overload: Fraction


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: Optional[Witness] = None

    def __bool__(self):
        return self.feasible


def check_feasibility(instance: Instance) -> FeasibilityResult:
    """
    Single-machine schedulability test.

    For every pair (l, r) with l an arrival and r a deadline, the work of the
    jobs whose windows lie inside [l, r] must not exceed r - l.

    Args:
        instance: The instance to test.

    Returns:
        A FeasibilityResult; when infeasible, the witness names the first
        violating interval in (l, r) order and the work it must hold.

    Raises:
        InstanceError: If ``instance`` is not an Instance.
    """
    if not isinstance(instance, Instance):
        raise InstanceError(f"Expected an Instance, got {type(instance).__name__}")
    by_deadline = sorted(instance.jobs, key=Job.edf_key)
    for l in sorted({j.a for j in instance.jobs}):
        work = Fraction(0)
        inside = [j for j in by_deadline if j.a >= l]
        for i, job in enumerate(inside):
            work += job.c
            if i + 1 < len(inside) and inside[i + 1].d == job.d:
                continue
            if work > job.d - l:
                logger.debug("Infeasible interval [%s, %s]: work %s", l, job.d, work)
                return FeasibilityResult(False, Witness(l, job.d, work))
    return FeasibilityResult(True)


def remaining_work(
    pending: Iterable[Tuple[Job, Fraction]], t: Fraction, t_dagger: Fraction
) -> Fraction:
    """
    W(t, t_dagger): remaining work at ``t`` of pending jobs due by ``t_dagger``.

    Args:
        pending: (job, remaining work) pairs.
        t: Current time.
        t_dagger: Horizon; must be later than ``t``.

    Raises:
        ArgumentError: If ``t_dagger <= t``.
    """
    if t_dagger <= t:
        raise ArgumentError(f"t_dagger ({t_dagger}) must be later than t ({t})")
    return sum((rem for job, rem in pending if job.d <= t_dagger), Fraction(0))


def trace_errors(trace: Trace) -> List[str]:
    """Structural problems of a trace; an empty list means well-formed."""
    errors = []
    expected_turn_ons = set()
    borders = set()
    for m, timeline in enumerate(trace.machines):
        previous = None
        for seg in timeline:
            if seg.start >= seg.end:
                errors.append(f"machine {m}: empty segment at {seg.start}")
            if seg.state == State.BUSY and seg.job is None:
                errors.append(f"machine {m}: BUSY segment at {seg.start} without a job")
            if previous is not None and previous.end != seg.start:
                errors.append(f"machine {m}: gap or overlap at {seg.start}")
            if seg.state != State.OFF and (previous is None or previous.state == State.OFF):
                expected_turn_ons.add((m, seg.start))
            elif seg.state != State.OFF:
                # room for a restart
                borders.add((m, seg.start))
            previous = seg
        if timeline and timeline[-1].state == State.OFF:
            errors.append(f"machine {m}: timeline ends with an OFF segment")
    recorded = [(on.machine, on.t) for on in trace.turn_ons]
    if len(set(recorded)) != len(recorded):
        errors.append("duplicate turn-on events")
    for m, t in sorted(set(recorded) - expected_turn_ons - borders):
        errors.append(f"machine {m}: turn-on at {t} without an OFF -> ON transition")
    for m, t in sorted(expected_turn_ons - set(recorded)):
        errors.append(f"machine {m}: missing turn-on at {t}")
    return errors


def energy_of_trace(trace: Trace, model: EnergyModel) -> Fraction:
    """
    Energy of a trace: turn-ons times E plus busy time times psi_b plus idle
    time times psi_sigma.

    Raises:
        InstanceError: If the trace is structurally invalid.
    """
    errors = trace_errors(trace)
    if errors:
        raise InstanceError("Invalid trace: " + "; ".join(errors))
    return (
        len(trace.turn_ons) * model.E
        + trace.total(State.BUSY) * model.psi_b
        + trace.total(State.IDLE) * model.psi_sigma
    )


@dataclass
class EdfRun:
    """Result of :func:`edf_pieces`: busy pieces plus any unfinished work."""

    pieces: List[Tuple[Fraction, Fraction, str]] = field(default_factory=list)
    unfinished: Dict[str, Fraction] = field(default_factory=dict)
    late: List[str] = field(default_factory=list)


def edf_pieces(
    jobs: Sequence[Job], windows: Sequence[Tuple[Fraction, Fraction]]
) -> EdfRun:
    """
    Preemptive EDF on one machine that is available only inside ``windows``.

    The machine never idles inside a window while released work is pending.
    Jobs finishing after their deadline are listed in ``late``.
    """
    remaining = {j.id: j.c for j in jobs}
    pending_arrivals = sorted(jobs, key=lambda j: (j.a, j.id))
    run = EdfRun()
    released: List[Job] = []
    idx = 0
    for start, end in merge_intervals(windows):
        t = start
        while t < end:
            while idx < len(pending_arrivals) and pending_arrivals[idx].a <= t:
                released.append(pending_arrivals[idx])
                idx += 1
            ready = [j for j in released if remaining[j.id] > 0]
            next_arrival = pending_arrivals[idx].a if idx < len(pending_arrivals) else None
            if not ready:
                if next_arrival is None or next_arrival >= end:
                    break
                t = next_arrival
                continue
            job = min(ready, key=Job.edf_key)
            stop = min(end, t + remaining[job.id])
            if next_arrival is not None and next_arrival < stop:
                stop = next_arrival
            if run.pieces and run.pieces[-1][2] == job.id and run.pieces[-1][1] == t:
                run.pieces[-1] = (run.pieces[-1][0], stop, job.id)
            else:
                run.pieces.append((t, stop, job.id))
            remaining[job.id] -= stop - t
            if remaining[job.id] == 0 and stop > job.d:
                run.late.append(job.id)
            t = stop
    run.unfinished = {jid: rem for jid, rem in remaining.items() if rem > 0}
    return run


def edf_meets_deadlines(instance: Instance) -> bool:
    """Runs work-conserving EDF from the first arrival and reports success."""
    if not instance.jobs:
        return True
    start = min(j.a for j in instance.jobs)
    end = start + sum((j.c for j in instance.jobs), Fraction(0)) + max(j.d for j in instance.jobs)
    run = edf_pieces(instance.jobs, [(start, end)])
    return not run.unfinished and not run.late
