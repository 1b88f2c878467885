"""
Algorithm S, the 4-competitive baseline.

Reconstructed rules:

* While no machine is ON, pending jobs wait until the earliest anchor
  ``h_j = max(a_j, d_j - lambda * B)``, or until the latest instant T* at which
  they still fit one machine back to back when that comes first. Then M_P
  turns on and the pending jobs are dispatched in (arrival, id) order as if
  they arrived at that instant.
* A job arriving while some machine is ON joins M_P when EDF-feasible there.
  Otherwise the other machine turns on with it and the logical names swap.
* With both machines ON, M_S (the former M_P) turns off as soon as it empties.
* A lone M_P that empties stays idle until ``B`` has elapsed since its
  turn-on, then turns off.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional

from powerdown.algo_a import available, latest_batch_start
from powerdown.core import ArgumentError, EnergyModel, Job, parse_rational
from powerdown.engine import Decision, Plan, Policy, PolicyView, ProtocolViolation

logger = logging.getLogger(__name__)

WAKE = "wake"


def _idle_tag(machine: int) -> str:
    return f"idle-off-{machine}"


@dataclass(frozen=True)
class AlgoSConfig:
    lam: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "lam", parse_rational(self.lam))
        if self.lam <= 0:
            raise ArgumentError(f"lambda must be positive, got {self.lam}")


def anchor(job: Job, model: EnergyModel, lam: Fraction = Fraction(1)) -> Fraction:
    """Energy-efficient anchor h_j = max(a_j, d_j - lambda * B)."""
    return max(job.a, job.d - parse_rational(lam) * model.break_even)


class AlgorithmS(Policy):
    name = "s"

    def __init__(self, config: Optional[AlgoSConfig] = None):
        self.config = config or AlgoSConfig()

    def reset(self, model: EnergyModel):
        super().reset(model)
        self.primary = 0
        self.waiting: List[Job] = []
        self.on_since: Dict[int, Fraction] = {}

    @property
    def secondary(self) -> int:
        return 1 - self.primary

    def _turn_on(self, plan: Plan, machine: int, jobs, t: Fraction):
        plan.turn_on(machine, jobs)
        self.on_since[machine] = t

    def _dispatch(self, plan: Plan, job: Job, t: Fraction):
        p, s = self.primary, self.secondary
        if plan.is_on(p) and available(plan.queue(p), job, t):
            plan.cancel_timer(_idle_tag(p))
            plan.assign(job, p)
            return
        if not plan.is_on(s):
            if not plan.is_on(p):
                self._turn_on(plan, p, [job], t)
                return
            logger.debug("t=%s: %s does not fit machine %d, turning on machine %d", t, job.id, p, s)
            self._turn_on(plan, s, [job], t)
            self.primary = s
            # The former primary now drains its queue and leaves.
            if not plan.queue(p) and self.on_since[p] < t:
                plan.cancel_timer(_idle_tag(p))
                plan.turn_off(p)
            return
        if available(plan.queue(s), job, t):
            plan.assign(job, s)
            return
        raise ProtocolViolation(f"Job {job.id} fits neither machine at t={t}")

    def wake_time(self, jobs: List[Job]) -> Fraction:
        """Earliest anchor of ``jobs``, capped by their latest batch start."""
        earliest = min(anchor(j, self.model, self.config.lam) for j in jobs)
        return min(earliest, latest_batch_start(jobs))

    def _start_batch(self, plan: Plan, t: Fraction):
        batch = sorted(self.waiting, key=lambda j: (j.a, j.id))
        self.waiting = []
        plan.cancel_timer(WAKE)
        self._turn_on(plan, self.primary, [], t)
        for job in batch:
            self._dispatch(plan, job, t)

    def on_arrival(self, ctx: PolicyView, job: Job, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        if plan.is_on(0) or plan.is_on(1):
            if not plan.is_on(self.primary):
                self.primary = self.secondary
            self._dispatch(plan, job, t)
            return plan.decisions
        if self.wake_time(self.waiting + [job]) <= t:
            # The earlier batch still fits one machine; the new job is an arrival.
            self._start_batch(plan, t)
            self._dispatch(plan, job, t)
            return plan.decisions
        self.waiting.append(job)
        plan.schedule_timer(self.wake_time(self.waiting), WAKE)
        return plan.decisions

    def on_timer(self, ctx: PolicyView, tag: str, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        if tag == WAKE and self.waiting:
            self._start_batch(plan, t)
        elif tag.startswith("idle-off-"):
            machine = int(tag.rsplit("-", 1)[1])
            if plan.is_on(machine) and not plan.queue(machine):
                plan.turn_off(machine)
                if machine == self.primary and plan.is_on(self.secondary):
                    self.primary = self.secondary
        return plan.decisions

    def on_empty(self, ctx: PolicyView, machine: int, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        other = 1 - machine
        if machine != self.primary and plan.is_on(other):
            plan.turn_off(machine)
            return plan.decisions
        self.primary = machine
        off_at = self.on_since[machine] + self.model.break_even
        if off_at <= t:
            plan.turn_off(machine)
        else:
            plan.start_idle(machine)
            plan.schedule_timer(off_at, _idle_tag(machine))
        return plan.decisions


def policy_s(config: Optional[AlgoSConfig] = None) -> AlgorithmS:
    """Builds an Algorithm S policy."""
    return AlgorithmS(config)
