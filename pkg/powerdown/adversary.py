"""
Instance generators and the adaptive lower-bound adversary.

The adversary plays against any deterministic policy. It emits one request,
dry-runs the policy on everything emitted so far to read how it reacted,
and picks the next request so that it punishes that reaction. The game ends
after the last stage or as soon as the measured ratio exceeds the target.
"""
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from powerdown.core import (
    ArgumentError,
    EnergyModel,
    Instance,
    Job,
    State,
    Trace,
    check_feasibility,
    energy_of_trace,
    parse_rational,
)
from powerdown.engine import DeadlineMiss, Policy, simulate
from powerdown.oracle import solve_opt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdversaryParams:
    """
    Game parameters: the case threshold ``beta``, the target ratio ``alpha``
    and the size ``eps`` of tiny jobs.

    Raises:
        ArgumentError: If ``beta <= 0``, ``alpha <= 2`` or ``eps <= 0``.
    """

    beta: Fraction = Fraction(4745, 10000)
    alpha: Fraction = Fraction(21068, 10000)
    eps: Fraction = Fraction(1, 10**6)
    max_retries: int = 10

    def __post_init__(self):
        for name in ("beta", "alpha", "eps"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if self.beta <= 0:
            raise ArgumentError(f"beta must be positive, got {self.beta}")
        if self.alpha <= 2:
            raise ArgumentError(f"alpha must exceed 2, got {self.alpha}")
        if self.eps <= 0:
            raise ArgumentError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class BoundFormulas:
    f1: Fraction
    f2: Fraction
    f3: Fraction
    g1: Fraction
    g2: Fraction
    g3: Fraction
    C_A: Fraction
    C_B: Fraction

    @property
    def lower_bound(self) -> Fraction:
        return min(self.C_A, self.C_B)


def bound_formulas(beta, alpha) -> BoundFormulas:
    """
    Closed-form thresholds of the game and the ratios it forces in each case.

    Raises:
        ArgumentError: If ``alpha <= 2``.
    """
    beta, alpha = parse_rational(beta), parse_rational(alpha)
    if alpha <= 2:
        raise ArgumentError(f"alpha must exceed 2, got {alpha}")
    f1 = alpha + (alpha - 1) * beta - 2
    f2 = alpha - 3 + (alpha - 1) * beta
    f3 = 2 * alpha - 4 + (alpha - 1) * (beta + f2)
    g1 = alpha - 1 - beta
    g2 = alpha - 2 - beta
    g3 = (alpha - 1) * g2 + 2 * alpha - 3 - beta
    sq = alpha * alpha - alpha
    C_A = (5 + beta + f2 + f3 + sq * f1) / (2 + beta + f2 + f3 + (sq - 1) * f1)
    C_B = (sq * g1 + 4 + beta + g2 + g3) / ((sq - 1) * g1 + 2 + g2 + g3)
    return BoundFormulas(f1, f2, f3, g1, g2, g3, C_A, C_B)


@dataclass
class AdversaryTranscript:
    case: str
    observations: Dict[str, Fraction] = field(default_factory=dict)
    jobs: List[Job] = field(default_factory=list)
    alg_energy: Optional[Fraction] = None
    opt_energy: Optional[Fraction] = None
    stages: List[Tuple[str, Fraction]] = field(default_factory=list)
    retries: int = 0
    stopped_early: bool = False
    w1_exceeds_one: bool = False
    deadline_miss: Optional[str] = None

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.alg_energy is None or not self.opt_energy:
            return None
        return self.alg_energy / self.opt_energy


class _Observation:
    def __init__(self, trace: Trace, energy: Fraction):
        self.trace = trace
        self.energy = energy

    def start(self, job_id: str) -> Fraction:
        return min(seg.start for _, seg in self.trace.segments(State.BUSY) if seg.job == job_id)

    @property
    def off_time(self) -> Fraction:
        return max(seg.end for _, seg in self.trace.segments())

    @property
    def last_busy(self) -> Fraction:
        return max(seg.end for _, seg in self.trace.segments(State.BUSY))

    @property
    def idle_tail(self) -> Fraction:
        return self.off_time - self.last_busy


class _StopGame(Exception):
    pass


class _Game:
    def __init__(self, policy: Policy, model: EnergyModel, params: AdversaryParams, horizon: Fraction):
        self.policy = policy
        self.horizon = horizon
        self.model = model
        self.params = params
        self.jobs: List[Job] = []
        self.last: Optional[_Observation] = None
        self.transcript = AdversaryTranscript(case="")

    def instance(self) -> Instance:
        return Instance(self.model, tuple(self.jobs))

    def emit(self, job: Job, label: str) -> _Observation:
        self.jobs.append(job)
        instance = self.instance()
        if not check_feasibility(instance):
            self.jobs.pop()
            logger.warning("⚠️  Request %s would make the input infeasible; ending the game", job.id)
            raise _StopGame()
        trace = simulate(instance, self.policy)
        self.last = _Observation(trace, energy_of_trace(trace, self.model))
        ratio = self.last.energy / solve_opt(instance).energy
        self.transcript.stages.append((label, ratio))
        logger.debug("Stage %s: ratio %.6f", label, float(ratio))
        return self.last

    def check(self):
        if self.transcript.stages and self.transcript.stages[-1][1] > self.params.alpha:
            self.transcript.stopped_early = True
            raise _StopGame()

    def tiny_after_idle(self, job_id: str) -> Job:
        eps = self.params.eps
        a = self.last.off_time + eps
        return Job(job_id, a, a + self.horizon, eps)

    def urgent_after(self, job_id: str, tiny: Job, started: Fraction) -> Job:
        eps = self.params.eps
        a = started + eps / 2
        return Job(job_id, a, tiny.d, min(tiny.d - a, tiny.d - tiny.a - tiny.c))


def adversary_play(
    policy: Policy, params: Optional[AdversaryParams] = None, model: Optional[EnergyModel] = None
) -> AdversaryTranscript:
    """
    Plays the adaptive game against ``policy``.

    The first request is a tiny job with a far deadline d1. If the policy
    starts it within ``beta`` of d1 (Case A) the adversary follows with a job
    that cannot share the running machine, then a tiny job after the idle
    period, another unsharable job, and a final tiny job. Otherwise (Case B)
    it watches how long the policy idles past d1, sends a tiny job after the
    idle period, an unsharable follow-up and a final tiny job. The optimum of
    the emitted input comes from the oracle.

    Args:
        policy: A deterministic policy; it is reset for every dry run.
        params: Game parameters.
        model: Energy model; defaults to psi_sigma = 1.

    Returns:
        The transcript. A policy that misses a deadline loses; the miss is
        recorded in ``deadline_miss`` and no ratio is reported.
    """
    params = params or AdversaryParams()
    model = model or EnergyModel()
    eps = params.eps
    d1 = 10 * (params.alpha + 2 / model.psi_sigma)
    game = _Game(policy, model, params, horizon=d1)
    transcript = game.transcript
    obs = transcript.observations

    try:
        run = game.emit(Job("j1", 0, d1, eps), "j1")
        x1 = d1 - run.start("j1")
        obs["x1"] = x1
        transcript.case = "A" if x1 <= params.beta else "B"
        logger.info("Adversary: x1 = %.6f, case %s", float(x1), transcript.case)

        if transcript.case == "A":
            game.check()
            run = game.emit(game.urgent_after("j2", game.jobs[0], run.start("j1")), "j2")
            obs["w1"] = run.idle_tail
            transcript.w1_exceeds_one = obs["w1"] > 1
            if transcript.w1_exceeds_one:
                logger.warning("⚠️  w1 = %s exceeds 1", obs["w1"])
            game.check()
            tiny = game.tiny_after_idle("j3")
            run = game.emit(tiny, "j3")
            obs["x2"] = tiny.d - run.start("j3")
            game.check()
            run = game.emit(game.urgent_after("j4", tiny, run.start("j3")), "j4")
            obs["w2"] = run.idle_tail
            game.check()
            game.emit(game.tiny_after_idle("j5"), "j5")
        else:
            while run.off_time < d1 and transcript.retries < params.max_retries:
                game.check()
                a = run.off_time + eps / 2
                if a + eps > d1:
                    break
                transcript.retries += 1
                run = game.emit(Job(f"r{transcript.retries}", a, d1, eps), f"retry{transcript.retries}")
            obs["y1"] = max(Fraction(0), run.off_time - d1)
            game.check()
            tiny = game.tiny_after_idle("j2")
            run = game.emit(tiny, "j2")
            obs["x2"] = tiny.d - run.start("j2")
            game.check()
            run = game.emit(game.urgent_after("j3", tiny, run.start("j2")), "j3")
            obs["y2"] = run.idle_tail
            game.check()
            game.emit(game.tiny_after_idle("j4"), "j4")
    except _StopGame:
        pass
    except DeadlineMiss as e:
        logger.warning("⚠️  Policy missed a deadline: %s", e)
        transcript.deadline_miss = str(e)
        transcript.jobs = list(game.jobs)
        return transcript

    transcript.jobs = list(game.jobs)
    if game.last is not None:
        transcript.alg_energy = game.last.energy
        transcript.opt_energy = solve_opt(game.instance()).energy
    return transcript


def gen_tight_s(k=1000, eps=Fraction(1, 1000), eps_prime=Fraction(1, 1000), rounds=1) -> Instance:
    """
    Input family on which Algorithm S pays about 4 per pair of jobs while the
    optimum pays about 1 per pair plus one turn-on.

    Each round contributes two pairs. A pair is a job of length B with a window
    of B + eps and a tiny job of size eps arriving B before the shared
    deadline. Consecutive pairs are separated by eps_prime. Times are divided
    by ``k`` so that E = 1 and B = 1 (psi_sigma = 1).

    Raises:
        ArgumentError: If ``k < 10``, ``rounds < 1`` or eps values are not
            small positive numbers.
    """
    k = parse_rational(k)
    eps, eps_prime = parse_rational(eps), parse_rational(eps_prime)
    if k < 10:
        raise ArgumentError(f"k must be at least 10, got {k}")
    if int(rounds) != rounds or rounds < 1:
        raise ArgumentError(f"rounds must be a positive integer, got {rounds}")
    if not (0 < eps < k / 10) or not (0 < eps_prime < k / 10):
        raise ArgumentError("eps and eps_prime must be positive and much smaller than k")
    tiny, gap = eps / k, eps_prime / k
    jobs = []
    d = 1 + tiny
    a = Fraction(0)
    for p in range(2 * int(rounds)):
        jobs.append(Job(f"L{p:03d}", a, d, 1))
        jobs.append(Job(f"T{p:03d}", d - 1, d, tiny))
        a = d + gap
        d = d + 1 + tiny + gap
    return Instance(EnergyModel(1), tuple(jobs))


def gen_random_feasible(seed, n_jobs: int, horizon: int = 40, psi_sigma=1, grid_step=1) -> Instance:
    """
    Seeded random instance on a grid that passes :func:`check_feasibility`.

    Jobs are drawn uniformly inside ``[0, horizon)`` grid units. While some
    interval is overloaded, the largest job inside it loses one grid unit, or
    is dropped when it is already one unit long.

    Raises:
        ArgumentError: If ``n_jobs < 1`` or ``horizon < 1``.
    """
    if n_jobs < 1:
        raise ArgumentError(f"n_jobs must be at least 1, got {n_jobs}")
    if horizon < 1:
        raise ArgumentError(f"horizon must be at least 1, got {horizon}")
    g = parse_rational(grid_step)
    rng = random.Random(seed)
    jobs = []
    for i in range(n_jobs):
        a = rng.randrange(0, horizon)
        w = rng.randint(1, horizon - a)
        c = rng.randint(1, w)
        jobs.append(Job(f"j{i:02d}", a * g, (a + w) * g, c * g))
    instance = Instance(EnergyModel(psi_sigma), tuple(jobs))
    while True:
        result = check_feasibility(instance)
        if result.feasible:
            return instance
        w = result.witness
        inside = [j for j in instance.jobs if j.a >= w.l and j.d <= w.r]
        victim = max(inside, key=lambda j: (j.c, j.id))
        rest = [j for j in instance.jobs if j.id != victim.id]
        if victim.c > g:
            rest.append(Job(victim.id, victim.a, victim.d, victim.c - g))
        instance = instance.with_jobs(rest)
