"""
Policy registry and the eager always-on baseline.
"""
import logging
from fractions import Fraction
from typing import Callable, Dict, List

from powerdown.algo_a import AlgoAConfig, AlgorithmA, available
from powerdown.algo_s import AlgoSConfig, AlgorithmS
from powerdown.core import ArgumentError, Job
from powerdown.engine import MACHINES, Decision, Plan, Policy, PolicyView, ProtocolViolation

logger = logging.getLogger(__name__)


class EagerPolicy(Policy):
    """
    Starts every job on arrival and keeps a machine ON while it has work.

    Machine 0 is preferred; machine 1 only takes jobs that do not fit machine 0.
    An emptied machine idles for the break-even time B and then turns off.
    """

    name = "eager"

    def on_arrival(self, ctx: PolicyView, job: Job, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        for m in MACHINES:
            if plan.is_on(m) and available(plan.queue(m), job, t):
                plan.cancel_timer(f"idle-off-{m}")
                plan.assign(job, m)
                return plan.decisions
        for m in MACHINES:
            if not plan.is_on(m):
                plan.turn_on(m, [job])
                return plan.decisions
        raise ProtocolViolation(f"Job {job.id} fits neither machine at t={t}")

    def on_empty(self, ctx: PolicyView, machine: int, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        plan.start_idle(machine)
        plan.schedule_timer(t + self.model.break_even, f"idle-off-{machine}")
        return plan.decisions

    def on_timer(self, ctx: PolicyView, tag: str, t: Fraction) -> List[Decision]:
        plan = Plan(ctx)
        machine = int(tag.rsplit("-", 1)[1])
        if plan.is_on(machine) and not plan.queue(machine):
            plan.turn_off(machine)
        return plan.decisions


def _make_a(u=None, idle_mode=None, idle_factor=None, **_) -> Policy:
    kwargs = {}
    if u is not None:
        kwargs["u"] = u
    if idle_mode is not None:
        kwargs["idle_mode"] = idle_mode
    if idle_factor is not None:
        kwargs["idle_factor"] = idle_factor
    return AlgorithmA(AlgoAConfig(**kwargs))


def _make_s(lam=None, **_) -> Policy:
    return AlgorithmS(AlgoSConfig() if lam is None else AlgoSConfig(lam=lam))


def _make_eager(**_) -> Policy:
    return EagerPolicy()


POLICIES: Dict[str, Callable[..., Policy]] = {
    "a": _make_a,
    "s": _make_s,
    "eager": _make_eager,
}


def make_policy(name: str, **params) -> Policy:
    """
    Builds a policy by registry name.

    Args:
        name: One of ``a``, ``s`` or ``eager``.
        **params: Policy parameters (``u``, ``idle_mode``, ``idle_factor`` for
            ``a``; ``lam`` for ``s``). Unused ones are ignored; None means default.

    Raises:
        ArgumentError: For an unknown policy name.
    """
    factory = POLICIES.get(name)
    if factory is None:
        raise ArgumentError(f"Unknown policy {name!r}; choose from {', '.join(POLICIES)}")
    return factory(**params)
