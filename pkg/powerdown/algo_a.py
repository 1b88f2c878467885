"""
Algorithm A: margin-delayed turn-on, urgent-job secondary machine with a
name swap, and a doubled idle window on the primary machine.

The two physical machines carry the logical names M_P (primary) and M_S
(secondary). ``AlgorithmA.primary`` holds the physical index of M_P.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from powerdown.core import ArgumentError, EnergyModel, Job, parse_rational
from powerdown.engine import Decision, Plan, Policy, PolicyView, ProtocolViolation, TurnOn

logger = logging.getLogger(__name__)

IDLE_MODES = ("cumulative", "per_episode", "per_phase")

TRIGGER = "trigger"
IDLE_OFF = "idle-off"


@dataclass(frozen=True)
class AlgoAConfig:
    """
    Parameters of Algorithm A.

    ``idle_factor`` scales the idle budget: the primary machine idles for
    ``idle_factor / psi_sigma`` in total before it turns off. ``idle_mode``
    picks when the spent budget resets: at every turn-on and swap
    (``cumulative``), at every idle episode (``per_episode``), or only when a
    turn-on starts from both machines OFF (``per_phase``).
    """

    u: Fraction = Fraction(1, 2)
    idle_mode: str = "cumulative"
    idle_factor: Fraction = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "u", parse_rational(self.u))
        object.__setattr__(self, "idle_factor", parse_rational(self.idle_factor))
        if self.u < 0:
            raise ArgumentError(f"u must be non-negative, got {self.u}")
        if self.idle_factor <= 0:
            raise ArgumentError(f"idle_factor must be positive, got {self.idle_factor}")
        if self.idle_mode not in IDLE_MODES:
            raise ArgumentError(f"idle_mode must be one of {', '.join(IDLE_MODES)}, got {self.idle_mode!r}")

    def idle_budget(self, model: EnergyModel) -> Fraction:
        return self.idle_factor / model.psi_sigma


def latest_batch_start(queue: Iterable[Job]) -> Optional[Fraction]:
    """
    T*: the latest time from which the unstarted jobs of ``queue`` can still be
    run back to back, i.e. the minimum over deadlines t* of t* minus the work
    due by t*.
    """
    jobs = sorted(queue, key=Job.edf_key)
    best = None
    work = Fraction(0)
    for i, job in enumerate(jobs):
        work += job.c
        if i + 1 < len(jobs) and jobs[i + 1].d == job.d:
            continue
        candidate = job.d - work
        if best is None or candidate < best:
            best = candidate
    return best


def trigger_time(queue: Iterable[Job], u: Fraction = Fraction(1, 2)) -> Optional[Fraction]:
    """Time at which the queued jobs must be started: T* - u, or None when empty."""
    start = latest_batch_start(queue)
    return None if start is None else start - u


def due_trigger(
    queue: Sequence[Job], t: Fraction, u: Fraction = Fraction(1, 2), machine: int = 0
) -> Optional[TurnOn]:
    """
    Returns the turn-on that moves every queued job onto ``machine`` when the
    trigger is due at ``t``, otherwise None.
    """
    fire = trigger_time(queue, u)
    if fire is None or fire > t:
        return None
    return TurnOn(machine, tuple(j.id for j in sorted(queue, key=Job.edf_key)))


def available(queue: Iterable[Tuple[Job, Fraction]], job: Job, t: Fraction) -> bool:
    """
    True if ``job`` can join a machine whose EDF schedule is ``queue`` at time
    ``t`` without any deadline being missed: W(t, t*) <= t* - t at every
    deadline t* of the queue and the job.
    """
    items = sorted(list(queue) + [(job, job.c)], key=lambda item: item[0].edf_key())
    work = Fraction(0)
    for i, (queued, rem) in enumerate(items):
        work += rem
        if i + 1 < len(items) and items[i + 1][0].d == queued.d:
            continue
        if work > queued.d - t:
            return False
    return True


class AlgorithmA(Policy):
    name = "a"

    def __init__(self, config: Optional[AlgoAConfig] = None):
        self.config = config or AlgoAConfig()

    def reset(self, model: EnergyModel):
        super().reset(model)
        self.budget = self.config.idle_budget(model)
        self.primary = 0
        self.waiting: List[Job] = []
        self.idle_used = Fraction(0)
        self.idle_since: Optional[Fraction] = None
        self.swaps: List[Tuple[Fraction, str]] = []

    @property
    def secondary(self) -> int:
        return 1 - self.primary

    def _swap(self):
        self.primary = self.secondary

    def _reset_idle(self, fresh: bool):
        if fresh or self.config.idle_mode != "per_phase":
            self.idle_used = Fraction(0)
        self.idle_since = None

    def _primary_on(self, plan: Plan, jobs: Sequence[Job] = ()):
        fresh = not plan.is_on(self.secondary)
        plan.turn_on(self.primary, jobs)
        self._reset_idle(fresh)

    def _wake_primary(self, plan: Plan, t: Fraction):
        plan.cancel_timer(IDLE_OFF)
        if self.idle_since is not None:
            self.idle_used += t - self.idle_since
            self.idle_since = None

    def _place_urgent(self, plan: Plan, job: Job, t: Fraction):
        """Rules for a job arriving while some machine is ON."""
        p, s = self.primary, self.secondary
        if plan.is_on(s):
            if available(plan.queue(s), job, t):
                plan.assign(job, s)
                return
            if not plan.is_on(p):
                logger.debug("t=%s: %s restarts M_P (machine %d)", t, job.id, p)
                self._primary_on(plan, [job])
                return
            if not available(plan.queue(p), job, t):
                raise ProtocolViolation(f"Job {job.id} fits neither machine at t={t}")
            self._wake_primary(plan, t)
            plan.assign(job, p)
            return
        if available(plan.queue(p), job, t):
            self._wake_primary(plan, t)
            plan.assign(job, p)
            return
        logger.debug("t=%s: %s is urgent, turning on machine %d and swapping", t, job.id, s)
        plan.turn_on(s, [job])
        self.swaps.append((t, job.id))
        self._swap()
        self._reset_idle(fresh=False)

    def on_arrival(self, ctx: PolicyView, job: Job, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        if plan.is_on(0) or plan.is_on(1):
            self._place_urgent(plan, job, t)
            return plan.decisions
        fire = trigger_time(self.waiting + [job], self.config.u)
        if fire <= t:
            batch, self.waiting = self.waiting, []
            plan.cancel_timer(TRIGGER)
            self._primary_on(plan, batch)
            self._place_urgent(plan, job, t)
        else:
            self.waiting.append(job)
            plan.schedule_timer(fire, TRIGGER)
        return plan.decisions

    def on_timer(self, ctx: PolicyView, tag: str, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        if tag == TRIGGER and self.waiting:
            batch, self.waiting = self.waiting, []
            logger.debug("t=%s: trigger moves %d jobs onto machine %d", t, len(batch), self.primary)
            self._primary_on(plan, batch)
        elif tag == IDLE_OFF and plan.is_on(self.primary) and not plan.queue(self.primary):
            self.idle_used += t - self.idle_since
            self.idle_since = None
            plan.turn_off(self.primary)
        return plan.decisions

    def on_empty(self, ctx: PolicyView, machine: int, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        if machine == self.secondary:
            plan.turn_off(machine)
            return plan.decisions
        if self.config.idle_mode == "per_episode":
            self.idle_used = Fraction(0)
        left = self.budget - self.idle_used
        if left <= 0:
            plan.turn_off(machine)
            return plan.decisions
        self.idle_since = t
        plan.start_idle(machine)
        plan.schedule_timer(t + left, IDLE_OFF)
        return plan.decisions

