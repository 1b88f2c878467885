"""
Discrete-event simulator for online power-down policies on two machines.

A policy reacts to three hooks (:meth:`Policy.on_arrival`,
:meth:`Policy.on_empty`, :meth:`Policy.on_timer`) by returning a list of
decisions. The engine applies them, runs each ON machine's queue under
preemptive EDF and records a :class:`~powerdown.core.Trace`.

Events at equal times are handled as: completions (by job id), the deadline
check, arrivals (by id), then timers (by time, tag). A timer scheduled for a
time at or before the current instant fires in the same instant.

A machine turned off and on again within one instant pays the turn-on; its
trace shows a restart (a turn-on between two ON segments).
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from powerdown.core import (
    EnergyModel,
    Instance,
    Job,
    Segment,
    State,
    Trace,
    TurnOn as TurnOnEvent,
    trace_errors,
)

logger = logging.getLogger(__name__)

MACHINES = (0, 1)


class DeadlineMiss(Exception):
    """A job was still unfinished at its deadline."""

    def __init__(self, job_id: str, time: Fraction):
        self.job_id = job_id
        self.time = time
        super().__init__(f"Job {job_id} missed its deadline at t={time}")


class ProtocolViolation(Exception):
    """A policy issued a decision the engine cannot apply."""

    def __init__(self, message="Illegal policy decision."):
        super().__init__(message)


@dataclass(frozen=True)
class TurnOn:
    machine: int
    jobs: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Assign:
    job: str
    machine: int


@dataclass(frozen=True)
class StartIdle:
    machine: int


@dataclass(frozen=True)
class TurnOff:
    machine: int


@dataclass(frozen=True)
class ScheduleTimer:
    time: Fraction
    tag: str


@dataclass(frozen=True)
class CancelTimer:
    tag: str


Decision = Union[TurnOn, Assign, StartIdle, TurnOff, ScheduleTimer, CancelTimer]


class PolicyView:
    """Read-only window onto the engine state handed to policy hooks."""

    def __init__(self, engine: "_Engine"):
        self._engine = engine

    @property
    def now(self) -> Fraction:
        return self._engine.now

    @property
    def model(self) -> EnergyModel:
        return self._engine.instance.model

    def job(self, job_id: str) -> Job:
        return self._engine.jobs[job_id]

    def is_on(self, machine: int) -> bool:
        return self._engine.on[machine]

    def queue(self, machine: int) -> List[Tuple[Job, Fraction]]:
        """Jobs assigned to ``machine`` with their remaining work, in EDF order."""
        engine = self._engine
        return [(engine.jobs[jid], engine.remaining[jid]) for jid in engine.edf_order(machine)]

    pending = queue

    def timer(self, tag: str) -> Optional[Fraction]:
        return self._engine.timers.get(tag)


class Plan:
    """
    Collects the decisions of one hook call and keeps a hypothetical view of
    the queues, so a policy can test availability against decisions it has not
    returned yet.
    """

    def __init__(self, view: PolicyView):
        self.view = view
        self.decisions: List[Decision] = []
        self._on = {m: view.is_on(m) for m in MACHINES}
        self._queues = {m: list(view.queue(m)) for m in MACHINES}

    def is_on(self, machine: int) -> bool:
        return self._on[machine]

    def queue(self, machine: int) -> List[Tuple[Job, Fraction]]:
        return list(self._queues[machine])

    def turn_on(self, machine: int, jobs: Sequence[Job] = ()):
        self.decisions.append(TurnOn(machine, tuple(j.id for j in jobs)))
        self._on[machine] = True
        self._queues[machine].extend((j, j.c) for j in jobs)

    def assign(self, job: Job, machine: int):
        self.decisions.append(Assign(job.id, machine))
        self._queues[machine].append((job, job.c))

    def start_idle(self, machine: int):
        self.decisions.append(StartIdle(machine))

    def turn_off(self, machine: int):
        self.decisions.append(TurnOff(machine))
        self._on[machine] = False

    def schedule_timer(self, time: Fraction, tag: str):
        self.decisions.append(ScheduleTimer(time, tag))

    def cancel_timer(self, tag: str):
        self.decisions.append(CancelTimer(tag))


class Policy:
    """
    Base class for online policies.

    :meth:`reset` is called at the start of every simulation, so one policy
    object can drive many runs as long as they do not overlap.
    """

    name = "policy"

    def reset(self, model: EnergyModel):
        self.model = model

    def on_arrival(self, ctx: PolicyView, job: Job, t: Fraction) -> List[Decision]:
        return []

    def on_empty(self, ctx: PolicyView, machine: int, t: Fraction) -> List[Decision]:
        return []

    def on_timer(self, ctx: PolicyView, tag: str, t: Fraction) -> List[Decision]:
        return []


@dataclass(frozen=True)
class SimulationConfig:
    max_events: int = 1_000_000
    max_same_instant: int = 10_000


class _Engine:
    def __init__(self, instance: Instance, policy: Policy, config: SimulationConfig):
        self.instance = instance
        self.policy = policy
        self.config = config
        self.jobs = instance.job_map
        self.remaining: Dict[str, Fraction] = {j.id: j.c for j in instance.jobs}
        self.arrived: Dict[str, bool] = {j.id: False for j in instance.jobs}
        self.assigned: Dict[str, int] = {}
        self.queues: Dict[int, List[str]] = {m: [] for m in MACHINES}
        self.on = {m: False for m in MACHINES}
        self.on_since: Dict[int, Optional[Fraction]] = {m: None for m in MACHINES}
        self.off_at: Dict[int, Optional[Fraction]] = {m: None for m in MACHINES}
        self.restarts: Dict[int, set] = {m: set() for m in MACHINES}
        self.timers: Dict[str, Fraction] = {}
        self.now = min((j.a for j in instance.jobs), default=Fraction(0))
        self.segments: Dict[int, List[Segment]] = {m: [] for m in MACHINES}
        self.current: Dict[int, Optional[Tuple[Fraction, State, Optional[str]]]] = {
            m: None for m in MACHINES
        }
        self.turn_ons: List[TurnOnEvent] = []
        self.view = PolicyView(self)

    def edf_order(self, machine: int) -> List[str]:
        return sorted(self.queues[machine], key=lambda jid: self.jobs[jid].edf_key())

    def running(self, machine: int) -> Optional[str]:
        if not self.on[machine] or not self.queues[machine]:
            return None
        return self.edf_order(machine)[0]

    def _close(self, machine: int):
        current = self.current[machine]
        if current is None or current[0] >= self.now:
            return
        start, cur_state, cur_job = current
        timeline = self.segments[machine]
        if timeline and timeline[-1].state == cur_state and timeline[-1].job == cur_job \
                and timeline[-1].end == start and start not in self.restarts[machine]:
            timeline[-1] = Segment(timeline[-1].start, self.now, cur_state, cur_job)
        else:
            timeline.append(Segment(start, self.now, cur_state, cur_job))

    def _mark(self, machine: int, state: State, job: Optional[str]):
        current = self.current[machine]
        if current is not None and current[1:] == (state, job):
            return
        self._close(machine)
        self.current[machine] = (self.now, state, job)

    def _restart(self, machine: int):
        """Turned off and on at the same instant: the open segment ends here."""
        logger.debug("t=%s machine %d restarts", self.now, machine)
        self._close(machine)
        self.current[machine] = None
        self.restarts[machine].add(self.now)

    def _refresh(self):
        for m in MACHINES:
            if self.on[m]:
                job = self.running(m)
                self._mark(m, State.BUSY if job else State.IDLE, job)
            elif self.current[m] is not None:
                self._mark(m, State.OFF, None)

    def _apply(self, decisions: Sequence[Decision]):
        for decision in decisions or ():
            logger.debug("t=%s apply %s", self.now, decision)
            if isinstance(decision, TurnOn):
                m = decision.machine
                if self.on[m]:
                    raise ProtocolViolation(f"TurnOn of machine {m} which is already ON at t={self.now}")
                if self.off_at[m] == self.now:
                    self._restart(m)
                self.on[m] = True
                self.on_since[m] = self.now
                self.turn_ons.append(TurnOnEvent(m, self.now))
                for jid in decision.jobs:
                    self._assign(jid, m)
            elif isinstance(decision, Assign):
                self._assign(decision.job, decision.machine)
            elif isinstance(decision, StartIdle):
                m = decision.machine
                if not self.on[m] or self.queues[m]:
                    raise ProtocolViolation(f"StartIdle on machine {m} which is not ON and empty at t={self.now}")
            elif isinstance(decision, TurnOff):
                m = decision.machine
                if not self.on[m]:
                    raise ProtocolViolation(f"TurnOff of machine {m} which is already OFF at t={self.now}")
                if self.queues[m]:
                    raise ProtocolViolation(f"TurnOff of machine {m} with a nonempty queue at t={self.now}")
                if self.on_since[m] == self.now:
                    raise ProtocolViolation(f"Machine {m} turned off at the instant it turned on (t={self.now})")
                self.on[m] = False
                self.on_since[m] = None
                self.off_at[m] = self.now
            elif isinstance(decision, ScheduleTimer):
                self.timers[decision.tag] = decision.time
            elif isinstance(decision, CancelTimer):
                self.timers.pop(decision.tag, None)
            else:
                raise ProtocolViolation(f"Unknown decision {decision!r}")
        self._refresh()

    def _assign(self, job_id: str, machine: int):
        if job_id not in self.jobs:
            raise ProtocolViolation(f"Assign of unknown job {job_id}")
        if not self.on[machine]:
            raise ProtocolViolation(f"Assign of job {job_id} to OFF machine {machine} at t={self.now}")
        if not self.arrived[job_id]:
            raise ProtocolViolation(f"Assign of job {job_id} before its arrival")
        if job_id in self.assigned:
            raise ProtocolViolation(f"Job {job_id} is already assigned to machine {self.assigned[job_id]}")
        self.assigned[job_id] = machine
        self.queues[machine].append(job_id)

    def _next_time(self, arrivals: List[Job], idx: int) -> Optional[Fraction]:
        candidates = []
        if idx < len(arrivals):
            candidates.append(arrivals[idx].a)
        if self.timers:
            candidates.append(min(self.timers.values()))
        for m in MACHINES:
            job = self.running(m)
            if job is not None:
                candidates.append(self.now + self.remaining[job])
        candidates.extend(
            self.jobs[jid].d for jid, rem in self.remaining.items() if rem > 0 and self.arrived[jid]
        )
        return min(candidates) if candidates else None

    def run(self) -> Trace:
        self.policy.reset(self.instance.model)
        arrivals = list(self.instance.jobs)
        idx = 0
        events = 0
        while True:
            events += 1
            if events > self.config.max_events:
                raise ProtocolViolation("Event limit exceeded; the policy does not make progress")
            nt = self._next_time(arrivals, idx)
            if nt is None:
                break
            elapsed = nt - self.now
            for m in MACHINES:
                job = self.running(m)
                if job is not None:
                    self.remaining[job] -= elapsed
            self.now = nt

            done = []
            for m in MACHINES:
                job = self.running(m)
                if job is not None and self.remaining[job] == 0:
                    done.append((job, m))
            for job, m in sorted(done):
                self.queues[m].remove(job)
            self._refresh()
            for job, m in sorted(done):
                if not self.queues[m] and self.on[m]:
                    self._apply(self.policy.on_empty(self.view, m, self.now))

            for jid, rem in sorted(self.remaining.items()):
                if rem > 0 and self.arrived[jid] and self.jobs[jid].d <= self.now:
                    raise DeadlineMiss(jid, self.now)

            while idx < len(arrivals) and arrivals[idx].a == self.now:
                job = arrivals[idx]
                idx += 1
                self.arrived[job.id] = True
                self._apply(self.policy.on_arrival(self.view, job, self.now))

            fired = 0
            while True:
                due = sorted((t, tag) for tag, t in self.timers.items() if t <= self.now)
                if not due:
                    break
                fired += 1
                if fired > self.config.max_same_instant:
                    raise ProtocolViolation(f"Timers keep firing at t={self.now}")
                _, tag = due[0]
                del self.timers[tag]
                self._apply(self.policy.on_timer(self.view, tag, self.now))

        for m in MACHINES:
            if self.on[m]:
                raise ProtocolViolation(f"Machine {m} left ON at the end of the simulation")
        self._refresh()
        unfinished = sorted(jid for jid, rem in self.remaining.items() if rem > 0)
        if unfinished:
            raise DeadlineMiss(unfinished[0], self.now)
        return Trace(
            machines=tuple(tuple(self.segments[m]) for m in MACHINES),
            turn_ons=tuple(self.turn_ons),
        )


def simulate(
    instance: Instance, policy: Policy, config: Optional[SimulationConfig] = None
) -> Trace:
    """
    Drives ``policy`` over ``instance`` and returns the resulting trace.

    Args:
        instance: The job set and energy model.
        policy: An online policy; its state is reset first.
        config: Engine limits.

    Returns:
        The two-machine Trace.

    Raises:
        DeadlineMiss: If a job is unfinished at its deadline.
        ProtocolViolation: If the policy issues an illegal decision or leaves
            a machine ON.
    """
    engine = _Engine(instance, policy, config or SimulationConfig())
    trace = engine.run()
    logger.debug(
        "Simulated %d jobs with %s: %d turn-ons", len(instance.jobs), policy.name, len(trace.turn_ons)
    )
    return trace


@dataclass
class TraceReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_trace(instance: Instance, trace: Trace) -> TraceReport:
    """
    Checks a trace against the instance: structure, windows, work amounts and
    migration. Findings are reported, never raised.
    """
    report = TraceReport(list(trace_errors(trace)))
    jobs = instance.job_map
    machine_of: Dict[str, set] = {}
    for m, seg in trace.segments(State.BUSY):
        job = jobs.get(seg.job)
        if job is None:
            report.violations.append(f"unknown job {seg.job} on machine {m}")
            continue
        machine_of.setdefault(job.id, set()).add(m)
        if seg.start < job.a:
            report.violations.append(f"job {job.id} runs at {seg.start} before its arrival {job.a}")
        if seg.end > job.d:
            report.violations.append(f"job {job.id} runs until {seg.end} after its deadline {job.d}")
    for jid, machines in sorted(machine_of.items()):
        if len(machines) > 1:
            report.violations.append(f"migration: job {jid} runs on machines {sorted(machines)}")
    work = trace.busy_by_job()
    for job in instance.jobs:
        done = work.get(job.id, Fraction(0))
        if done < job.c:
            report.violations.append(f"incomplete work: job {job.id} misses {job.c - done}")
        elif done > job.c:
            report.violations.append(f"excess work: job {job.id} runs {done - job.c} too long")
    return report
