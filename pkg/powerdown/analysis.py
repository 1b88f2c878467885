"""
Phase accounting of a two-machine run against a fixed single-machine optimum.

A phase is a maximal stretch during which at least one machine is ON,
extended back to the earliest arrival among the jobs it executes. When a
machine turns on again inside a stretch it already ran in, the stretch is cut
there and the remainder becomes a virtual phase; a lone machine that turns
off and on within one instant starts a new phase instead. Stretches where
only the optimum runs work become SPECIAL phases.

Per phase the account holds the online cost A, the optimum's cost O and its
two bounds O_f (free start) and O_n (ON at the end), and the split of the
executed work into alpha (run by both), lambda (only online) and delta (only
optimum).
"""
import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from powerdown.core import (
    ArgumentError,
    EnergyModel,
    Instance,
    InstanceError,
    State,
    Trace,
    energy_of_trace,
)
from powerdown.engine import Policy, SimulationConfig, simulate
from powerdown.oracle import OptSchedule, solve_opt

logger = logging.getLogger(__name__)

CLAIM1_BOUND = Fraction(3, 2)


class PhaseKind(str, enum.Enum):
    SINGLE = "SINGLE"
    DUAL = "DUAL"
    SPECIAL = "SPECIAL"


@dataclass(frozen=True)
class Phase:
    t0: Fraction
    t1: Fraction
    te: Fraction
    kind: PhaseKind
    virtual: bool = False


@dataclass(frozen=True)
class PhaseAccount:
    A: Fraction
    O: Fraction
    O_f: Fraction
    O_n: Fraction
    alpha: Fraction
    lam: Fraction
    delta: Fraction
    theta: Fraction
    opt_on_at_end: bool


@dataclass(frozen=True)
class Lemma3Check:
    ineq2: bool
    ineq3: bool

    @property
    def ok(self) -> bool:
        return self.ineq2 and self.ineq3


def _overlap(start: Fraction, end: Fraction, s: Fraction, e: Fraction) -> Fraction:
    return max(Fraction(0), min(end, e) - max(start, s))


def _measure(trace: Trace, state: State, s: Fraction, e: Fraction) -> Fraction:
    return sum((_overlap(seg.start, seg.end, s, e) for _, seg in trace.segments(state)), Fraction(0))


def _work_by_job(trace: Trace, s: Fraction, e: Fraction) -> Dict[str, Fraction]:
    work: Dict[str, Fraction] = {}
    for _, seg in trace.segments(State.BUSY):
        amount = _overlap(seg.start, seg.end, s, e)
        if amount > 0:
            work[seg.job] = work.get(seg.job, Fraction(0)) + amount
    return work


def _turn_ons(trace: Trace, s: Fraction, e: Fraction) -> int:
    return sum(1 for on in trace.turn_ons if s <= on.t < e)


def window_energy(trace: Trace, model: EnergyModel, s: Fraction, e: Fraction) -> Fraction:
    """Energy ``trace`` spends in [s, e); a turn-on counts where it happens."""
    return (
        _turn_ons(trace, s, e) * model.E
        + _measure(trace, State.BUSY, s, e) * model.psi_b
        + _measure(trace, State.IDLE, s, e) * model.psi_sigma
    )


def _on_across(intervals: List[Tuple[Fraction, Fraction]], t: Fraction) -> bool:
    return any(x < t < y for x, y in intervals)


def extract_phases(alg_trace: Trace, instance: Instance, opt_trace: Optional[Trace] = None) -> List[Phase]:
    """
    Splits a two-machine run into phases.

    Args:
        alg_trace: Trace of a two-machine simulation.
        instance: The instance it ran on.
        opt_trace: Optional single-machine optimum; when given, SPECIAL phases
            are added wherever it runs work outside the online phases.

    Returns:
        Phases ordered by start.

    Raises:
        InstanceError: If ``alg_trace`` does not have two machines.
    """
    if len(alg_trace.machines) != 2:
        raise InstanceError(f"Expected a two-machine trace, got {len(alg_trace.machines)} machines")
    jobs = instance.job_map
    phases: List[Phase] = []
    previous_end = None
    for s, e in alg_trace.on_intervals():
        cuts = []
        seen = set()
        for on in sorted(alg_trace.turn_ons, key=lambda o: (o.t, o.machine)):
            if not s <= on.t < e:
                continue
            if on.machine in seen and on.t > s and (not cuts or on.t > cuts[-1]):
                cuts.append(on.t)
            seen.add(on.machine)
        executed = _work_by_job(alg_trace, s, e)
        t0 = min([s] + [jobs[jid].a for jid in executed if jid in jobs])
        if previous_end is not None:
            t0 = max(t0, previous_end)
        bounds = [s] + cuts + [e]
        for idx, (b0, b1) in enumerate(zip(bounds, bounds[1:])):
            running = {
                m for m in (0, 1) if any(_overlap(x, y, b0, b1) > 0 for x, y in alg_trace.on_intervals(m))
            }
            kind = PhaseKind.DUAL if len(running) == 2 else PhaseKind.SINGLE
            phases.append(Phase(t0 if idx == 0 else b0, b0, b1, kind, virtual=idx > 0))
        previous_end = e

    if opt_trace is not None:
        phases.extend(_special_phases(phases, opt_trace))
    return sorted(phases, key=lambda p: (p.t0, p.te))


def _special_phases(phases: List[Phase], opt_trace: Trace) -> List[Phase]:
    opt_on = opt_trace.on_intervals()
    if not opt_on:
        return []
    first, last = opt_on[0][0], opt_on[-1][1]
    gaps = []
    cursor = min(first, phases[0].t0) if phases else first
    for phase in sorted(phases, key=lambda p: p.t0):
        if phase.t0 > cursor:
            gaps.append((cursor, phase.t0))
        cursor = max(cursor, phase.te)
    if last > cursor:
        gaps.append((cursor, last))
    busy = [(seg.start, seg.end) for _, seg in opt_trace.segments(State.BUSY)]
    special = []
    for g0, g1 in gaps:
        if not any(_overlap(x, y, g0, g1) > 0 for x, y in busy):
            continue
        inside = [(max(x, g0), min(y, g1)) for x, y in opt_on if _overlap(x, y, g0, g1) > 0]
        special.append(Phase(g0, inside[0][0], g1, PhaseKind.SPECIAL))
    return special


def phase_accounts(
    phase: Phase, alg_trace: Trace, opt_trace: Trace, model: Optional[EnergyModel] = None
) -> PhaseAccount:
    """
    Accounts one phase.

    O_f drops the optimum's first turn-on in the phase when it enters the
    phase OFF. O_n extends O_f so that the optimum is ON at the phase end: from
    its last ON moment it idles up to ``te`` (or turns on once if it was never
    ON in the phase). Jobs the optimum runs across a phase border are split at
    the border.
    """
    model = model or EnergyModel()
    s, e = phase.t0, phase.te
    A = window_energy(alg_trace, model, s, e) if phase.kind != PhaseKind.SPECIAL else Fraction(0)
    O = window_energy(opt_trace, model, s, e)
    opt_on = opt_trace.on_intervals()

    O_f = O
    if not _on_across(opt_on, s) and _turn_ons(opt_trace, s, e) > 0:
        O_f = O - model.E
    on_at_end = _on_across(opt_on, e)
    if on_at_end:
        O_n = O_f
    else:
        touched = [min(y, e) for x, y in opt_on if x < e and y > s]
        O_n = O_f + (model.psi_sigma * (e - max(touched)) if touched else model.E)

    alg_work = _work_by_job(alg_trace, s, e) if phase.kind != PhaseKind.SPECIAL else {}
    opt_work = _work_by_job(opt_trace, s, e)
    alpha = lam = delta = Fraction(0)
    for jid in set(alg_work) | set(opt_work):
        a = alg_work.get(jid, Fraction(0))
        o = opt_work.get(jid, Fraction(0))
        both = min(a, o)
        alpha += both
        lam += a - both
        delta += o - both

    busy_starts = [max(seg.start, s) for _, seg in opt_trace.segments(State.BUSY) if _overlap(seg.start, seg.end, s, e) > 0]
    theta = Fraction(0)
    if busy_starts:
        theta = (e - min(busy_starts)) - _measure(opt_trace, State.BUSY, s, e)
    return PhaseAccount(A, O, O_f, O_n, alpha, lam, delta, theta, on_at_end)


def check_lemma3(account: PhaseAccount, r=3) -> Lemma3Check:
    """
    r*O_f - A >= delta - lambda - r and r*O_n - A >= delta - lambda, exactly.
    """
    r = Fraction(r)
    gap = account.delta - account.lam
    return Lemma3Check(
        ineq2=r * account.O_f - account.A >= gap - r,
        ineq3=r * account.O_n - account.A >= gap,
    )


def check_claim1(phase: Phase, account: PhaseAccount, psi_sigma) -> bool:
    """
    Work run by both plus work run only by the optimum plus psi_sigma times the
    optimum's non-busy time from its first execution to the phase end is at
    least 3/2.

    Raises:
        ArgumentError: If the phase is not SINGLE.
    """
    if phase.kind != PhaseKind.SINGLE:
        raise ArgumentError(f"Claim check applies to SINGLE phases, got {phase.kind}")
    return account.alpha + account.delta + Fraction(psi_sigma) * account.theta >= CLAIM1_BOUND


@dataclass
class PhaseReport:
    phase: Phase
    account: PhaseAccount
    lemma3: Lemma3Check
    claim1: Optional[bool] = None


@dataclass
class CompetitiveReport:
    alg_energy: Fraction
    opt_energy: Fraction
    phases: List[PhaseReport] = field(default_factory=list)
    lemma4_margins: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    alg_trace: Optional[Trace] = None
    opt_trace: Optional[Trace] = None

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.opt_energy == 0:
            return None
        return self.alg_energy / self.opt_energy

    @property
    def delta_minus_lambda(self) -> Fraction:
        return sum((p.account.delta - p.account.lam for p in self.phases), Fraction(0))

    @property
    def lemma3_ok(self) -> bool:
        return all(p.lemma3.ok for p in self.phases)

    @property
    def claim1_ok(self) -> bool:
        return all(p.claim1 for p in self.phases if p.claim1 is not None)

    @property
    def lemma4_prefix_failures(self) -> int:
        return sum(1 for margin, required in self.lemma4_margins if margin < required)

    @property
    def lemma4_final_ok(self) -> bool:
        if not self.lemma4_margins:
            return True
        return self.lemma4_margins[-1][0] >= 0

    @property
    def worst_margin(self) -> Optional[Fraction]:
        if not self.lemma4_margins:
            return None
        return min(margin - required for margin, required in self.lemma4_margins)


def account_run(
    instance: Instance, alg_trace: Trace, opt_trace: Trace, r=3
) -> Tuple[List[PhaseReport], List[Tuple[Fraction, Fraction]]]:
    """Phase reports plus the running lemma-4 margins (margin, required) per prefix."""
    model = instance.model
    reports = []
    margins = []
    running = Fraction(0)
    r = Fraction(r)
    for phase in extract_phases(alg_trace, instance, opt_trace):
        account = phase_accounts(phase, alg_trace, opt_trace, model)
        single = phase.kind == PhaseKind.SINGLE and not phase.virtual
        claim1 = check_claim1(phase, account, model.psi_sigma) if single else None
        reports.append(PhaseReport(phase, account, check_lemma3(account, r), claim1))
        running += r * account.O - account.A - (account.delta - account.lam)
        margins.append((running, r if account.opt_on_at_end else Fraction(0)))
    return reports, margins


def competitive_report(
    instance: Instance,
    policy: Policy,
    *,
    opt: Optional[OptSchedule] = None,
    r=3,
    config: Optional[SimulationConfig] = None,
) -> CompetitiveReport:
    """
    Simulates ``policy``, solves the optimum and accounts every phase.

    Raises:
        DeadlineMiss, ProtocolViolation: From the simulation.
        OracleError: From the optimum.
    """
    alg_trace = simulate(instance, policy, config)
    opt = opt or solve_opt(instance)
    reports, margins = account_run(instance, alg_trace, opt.trace, r)
    report = CompetitiveReport(
        alg_energy=energy_of_trace(alg_trace, instance.model),
        opt_energy=opt.energy,
        phases=reports,
        lemma4_margins=margins,
        alg_trace=alg_trace,
        opt_trace=opt.trace,
    )
    if report.lemma4_prefix_failures:
        logger.debug("%d lemma-4 prefix margins fall short", report.lemma4_prefix_failures)
    return report
