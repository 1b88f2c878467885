"""
Offline single-machine optimum (the denominator of the competitive ratio).

Three exact solvers live here:

* :func:`optimal_energy` - dynamic program over grid steps with EDF pruning.
* :func:`optimal_energy_bruteforce` - the same program branching over every
  released job; only for tiny instances.
* :func:`optimal_energy_exact` - continuous-time solver over the windows'
  event points, used when the instance is not small on any grid.

:func:`solve_opt` picks between the grid program and the continuous solver.
The EDF heuristics at the bottom give upper bounds for spot checks.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from powerdown.core import (
    ArgumentError,
    EnergyModel,
    Instance,
    Job,
    Segment,
    State,
    Trace,
    TurnOn,
    check_feasibility,
    edf_pieces,
    energy_of_trace,
    merge_intervals,
    parse_rational,
    rational_gcd,
)

logger = logging.getLogger(__name__)

INF = float("inf")

DEFAULT_MAX_GRID_STEPS = 600
DEFAULT_MAX_GRID_JOBS = 10
DEFAULT_MAX_SEGMENTS = 12
BRUTEFORCE_MAX_STEPS = 40
BRUTEFORCE_MAX_JOBS = 5


class OracleError(Exception):
    """Internal oracle failure."""


class InfeasibleInstanceError(OracleError):
    """The instance cannot be scheduled on one machine."""

    def __init__(self, message="Instance is not schedulable on a single machine."):
        super().__init__(message)


class OracleSizeError(OracleError):
    """The instance exceeds the solver's size guard."""

    def __init__(self, message="Instance too large for this oracle."):
        super().__init__(message)


@dataclass(frozen=True)
class OptSchedule:
    trace: Trace
    energy: Fraction
    method: str = "grid"


def _empty_schedule(method: str) -> OptSchedule:
    return OptSchedule(Trace(((),)), Fraction(0), method)


def _require_feasible(instance: Instance):
    result = check_feasibility(instance)
    if not result.feasible:
        w = result.witness
        raise InfeasibleInstanceError(
            f"Interval [{w.l}, {w.r}] must hold {w.overload} units of work"
        )


def single_machine_trace(pieces: Sequence[Tuple[Fraction, Fraction, State, Optional[str]]]) -> Trace:
    """
    Builds a one-machine trace from ``(start, end, state, job)`` pieces.

    Adjacent equal pieces are merged; leading and trailing OFF time is dropped
    and every OFF -> ON transition gets a turn-on event.
    """
    merged: List[Segment] = []
    for start, end, state, job in sorted(pieces, key=lambda p: (p[0], p[1])):
        if end <= start:
            continue
        if merged and merged[-1].state == state and merged[-1].job == job and merged[-1].end == start:
            merged[-1] = Segment(merged[-1].start, end, state, job)
        else:
            merged.append(Segment(start, end, state, job))
    while merged and merged[0].state == State.OFF:
        merged.pop(0)
    while merged and merged[-1].state == State.OFF:
        merged.pop()
    turn_ons = []
    previous = None
    for seg in merged:
        if seg.state != State.OFF and (previous is None or previous.state == State.OFF):
            turn_ons.append(TurnOn(0, seg.start))
        previous = seg
    return Trace((tuple(merged),), tuple(turn_ons))


def schedule_within(jobs: Sequence[Job], intervals: Sequence[Tuple[Fraction, Fraction]]) -> Trace:
    """
    Runs EDF inside the ON ``intervals`` of one machine and returns its trace.

    Raises:
        OracleError: If the intervals cannot hold the jobs.
    """
    on = merge_intervals(intervals)
    run = edf_pieces(jobs, on)
    if run.unfinished or run.late:
        raise OracleError(f"ON intervals cannot hold the jobs: {sorted(run.unfinished) + run.late}")
    pieces = [(s, e, State.BUSY, jid) for s, e, jid in run.pieces]
    for start, end in on:
        cursor = start
        for s, e, _ in run.pieces:
            if s >= end or e <= start:
                continue
            if s > cursor:
                pieces.append((cursor, s, State.IDLE, None))
            cursor = max(cursor, e)
        if cursor < end:
            pieces.append((cursor, end, State.IDLE, None))
    for (_, e), (s, _) in zip(on, on[1:]):
        pieces.append((e, s, State.OFF, None))
    return single_machine_trace(pieces)


def _finish(instance: Instance, trace: Trace, method: str) -> OptSchedule:
    energy = energy_of_trace(trace, instance.model)
    logger.debug("Oracle %s: %d jobs, energy %s", method, len(instance.jobs), energy)
    return OptSchedule(trace, energy, method)


def infer_grid_step(instance: Instance) -> Fraction:
    """The coarsest grid on which every arrival, deadline and execution time lies."""
    values = [v for j in instance.jobs for v in (j.a, j.d, j.c)]
    return rational_gcd(values) or Fraction(1)


def _grid_program(instance: Instance, grid_step, *, prune: bool, max_steps: int, method: str) -> OptSchedule:
    if not instance.jobs:
        return _empty_schedule(method)
    g = infer_grid_step(instance) if grid_step is None else parse_rational(grid_step)
    if g <= 0:
        raise ArgumentError(f"grid_step must be positive, got {g}")
    for job in instance.jobs:
        for name in ("a", "d", "c"):
            if (getattr(job, name) / g).denominator != 1:
                raise ArgumentError(f"Job {job.id}: {name}={getattr(job, name)} is not a multiple of {g}")
    _require_feasible(instance)

    model = instance.model
    origin = min(j.a for j in instance.jobs)
    jobs = sorted(instance.jobs, key=Job.edf_key)
    arrive = [int((j.a - origin) / g) for j in jobs]
    due = [int((j.d - origin) / g) for j in jobs]
    work = tuple(int(j.c / g) for j in jobs)
    steps = max(due)
    if steps > max_steps:
        raise OracleSizeError(f"{steps} grid steps exceed the limit of {max_steps}")

    idle_price = model.psi_sigma * g
    scale = idle_price.denominator * model.E.denominator
    on_cost = int(model.E * scale)
    idle_cost = int(idle_price * scale)
    deadlines = sorted(set(due))

    def dead(k, rem):
        for i, r in enumerate(rem):
            if r and due[i] <= k:
                return True
        for deadline in deadlines:
            if deadline > k and sum(r for i, r in enumerate(rem) if due[i] <= deadline) > deadline - k:
                return True
        return False

    def options(k, on, rem):
        # Order matters: OFF, then IDLE, then BUSY keeps work as late as ties allow.
        wake = 0 if on else on_cost
        yield ("off", None, 0, (False, rem))
        yield ("idle", None, wake + idle_cost, (True, rem))
        for i in range(len(jobs)):
            if rem[i] and arrive[i] <= k:
                nxt = rem[:i] + (rem[i] - 1,) + rem[i + 1:]
                yield ("busy", i, wake, (True, nxt))
                if prune:
                    break

    layers: List[Dict] = [{(False, work): None}]
    for k in range(steps):
        nxt = {}
        for (on, rem) in layers[k]:
            if dead(k, rem):
                continue
            for _, _, _, state in options(k, on, rem):
                nxt.setdefault(state, None)
        layers.append(nxt)

    value: List[Dict] = [dict() for _ in range(steps + 1)]
    for state in layers[steps]:
        value[steps][state] = 0 if not any(state[1]) else INF
    for k in range(steps - 1, -1, -1):
        for (on, rem) in layers[k]:
            if dead(k, rem):
                value[k][(on, rem)] = INF
                continue
            value[k][(on, rem)] = min(
                cost + value[k + 1][state] for _, _, cost, state in options(k, on, rem)
            )

    start = (False, work)
    if value[0][start] == INF:
        raise InfeasibleInstanceError("No grid schedule meets every deadline")

    pieces = []
    state = start
    for k in range(steps):
        target = value[k][state]
        for label, i, cost, nxt in options(k, *state):
            if cost + value[k + 1][nxt] == target:
                break
        t0, t1 = origin + k * g, origin + (k + 1) * g
        if label == "off":
            pieces.append((t0, t1, State.OFF, None))
        elif label == "idle":
            pieces.append((t0, t1, State.IDLE, None))
        else:
            pieces.append((t0, t1, State.BUSY, jobs[i].id))
        state = nxt
    return _finish(instance, single_machine_trace(pieces), method)


def optimal_energy(instance: Instance, grid_step=None, *, max_steps: int = DEFAULT_MAX_GRID_STEPS) -> OptSchedule:
    """
    Minimum-energy single-machine schedule on a time grid.

    The search walks grid steps with state (step, ON/OFF, remaining work per
    job). Per step the machine stays OFF, idles, or runs the EDF job among the
    released unfinished jobs; turning on costs E. Ties keep work late.

    Args:
        instance: A feasible instance.
        grid_step: Grid spacing; inferred as the coarsest common grid when None.
        max_steps: Refuse instances whose horizon spans more grid steps.

    Returns:
        The optimal OptSchedule.

    Raises:
        ArgumentError: If a value is not a multiple of ``grid_step``.
        InfeasibleInstanceError: If the instance is not schedulable.
        OracleSizeError: If the horizon exceeds ``max_steps``.
    """
    return _grid_program(instance, grid_step, prune=True, max_steps=max_steps, method="grid")


def optimal_energy_bruteforce(instance: Instance, grid_step=None) -> OptSchedule:
    """
    Same program as :func:`optimal_energy` without EDF pruning.

    Raises:
        OracleSizeError: Above 40 grid points or 5 jobs.
    """
    if len(instance.jobs) > BRUTEFORCE_MAX_JOBS:
        raise OracleSizeError(f"{len(instance.jobs)} jobs exceed the brute-force limit of {BRUTEFORCE_MAX_JOBS}")
    return _grid_program(
        instance, grid_step, prune=False, max_steps=BRUTEFORCE_MAX_STEPS, method="bruteforce"
    )


@dataclass
class _BlockPlan:
    cost: Fraction
    labels: Tuple[bool, ...]
    alive: Tuple[bool, ...]
    x: Tuple[int, ...]


def _blocks(jobs: Sequence[Job]) -> List[List[Job]]:
    blocks: List[List[Job]] = []
    end = None
    for job in sorted(jobs, key=lambda j: (j.a, j.id)):
        if end is None or job.a > end:
            blocks.append([job])
            end = job.d
        else:
            blocks[-1].append(job)
            end = max(end, job.d)
    return blocks


def _greedy_fill(constraints, lo, hi) -> Optional[List[int]]:
    x = list(lo)
    for u, v, w in constraints:
        need = w - sum(x[u:v])
        i = v - 1
        while need > 0 and i >= u:
            add = min(need, hi[i] - x[i])
            x[i] += add
            need -= add
            i -= 1
        if need > 0:
            return None
    return x


class _Block:
    """One group of jobs whose windows chain together."""

    def __init__(self, jobs: List[Job], model: EnergyModel, max_segments: int):
        self.jobs = jobs
        self.model = model
        self.points = sorted({j.a for j in jobs} | {j.d for j in jobs})
        self.m = len(self.points) - 1
        if self.m > max_segments:
            raise OracleSizeError(f"{self.m} elementary segments exceed the limit of {max_segments}")
        values = self.points + [j.c for j in jobs]
        self.scale = 1
        for v in values:
            self.scale = self.scale * v.denominator // math.gcd(self.scale, v.denominator)
        pts = [int(p * self.scale) for p in self.points]
        self.lengths = [b - a for a, b in zip(pts, pts[1:])]
        index = {p: i for i, p in enumerate(self.points)}
        demand: Dict[Tuple[int, int], int] = {}
        for u in range(self.m):
            for v in range(u + 1, self.m + 1):
                demand[(u, v)] = 0
        for job in jobs:
            lo_i, hi_i = index[job.a], index[job.d]
            c = int(job.c * self.scale)
            for u in range(lo_i + 1):
                for v in range(hi_i, self.m + 1):
                    demand[(u, v)] += c
        self.constraints = sorted(
            ((u, v, w) for (u, v), w in demand.items() if w > 0), key=lambda c: (c[1], -c[0])
        )
        self.plans: Dict[Tuple[bool, bool], Optional[_BlockPlan]] = {}

    @property
    def start(self) -> Fraction:
        return self.points[0]

    @property
    def end(self) -> Fraction:
        return self.points[-1]

    def plan(self, lt: bool, rt: bool) -> Optional[_BlockPlan]:
        if (lt, rt) not in self.plans:
            self.plans[(lt, rt)] = self._solve(lt, rt)
        return self.plans[(lt, rt)]

    def _solve(self, lt: bool, rt: bool) -> Optional[_BlockPlan]:
        E, psi, scale = self.model.E, self.model.psi_sigma, self.scale
        best: Optional[_BlockPlan] = None
        for labels in itertools.product((True, False), repeat=self.m):
            opens = [i for i, full in enumerate(labels) if not full]
            bounds = [-1] + opens + [self.m]
            runs = list(zip(bounds, bounds[1:]))
            fixed = []
            for r, (lo, hi) in enumerate(runs):
                if hi - lo > 1 or (lt and r == 0) or (rt and r == len(runs) - 1):
                    fixed.append(True)
                else:
                    fixed.append(None)
            free = [r for r, f in enumerate(fixed) if f is None]
            full_measure = sum(L for L, full in zip(self.lengths, labels) if full)
            for flags in itertools.product((False, True), repeat=len(free)):
                alive = list(fixed)
                for r, flag in zip(free, flags):
                    alive[r] = flag
                charged = sum(alive) - (1 if lt else 0)
                lower = E * charged + psi * Fraction(full_measure, scale)
                if best is not None and lower >= best.cost:
                    continue
                lo_x, hi_x = [], []
                for i, full in enumerate(labels):
                    if full:
                        lo_x.append(self.lengths[i])
                        hi_x.append(self.lengths[i])
                    else:
                        q = opens.index(i)
                        lo_x.append(0)
                        hi_x.append(self.lengths[i] if alive[q] or alive[q + 1] else 0)
                x = _greedy_fill(self.constraints, lo_x, hi_x)
                if x is None:
                    continue
                cost = E * charged + psi * Fraction(sum(x), scale)
                if best is None or cost < best.cost:
                    best = _BlockPlan(cost, tuple(labels), tuple(alive), tuple(x))
        return best

    def intervals(self, plan: _BlockPlan) -> List[Tuple[Fraction, Fraction]]:
        opens = [i for i, full in enumerate(plan.labels) if not full]
        bounds = [-1] + opens + [self.m]
        left_part, right_part = {}, {}
        for q, o in enumerate(opens):
            if plan.alive[q]:
                left_part[o], right_part[o] = plan.x[o], 0
            else:
                left_part[o], right_part[o] = 0, plan.x[o]
        out = []
        for r, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
            if not plan.alive[r]:
                continue
            start = self.points[0] if lo == -1 else self.points[lo + 1] - Fraction(right_part[lo], self.scale)
            end = self.points[-1] if hi == self.m else self.points[hi] + Fraction(left_part[hi], self.scale)
            out.append((start, end))
        return out


def optimal_energy_exact(instance: Instance, *, max_segments: int = DEFAULT_MAX_SEGMENTS) -> OptSchedule:
    """
    Exact continuous-time optimum.

    Jobs are grouped into blocks of chained windows. Inside a block the ON
    measure of every elementary segment between consecutive event points is
    chosen so that each interval [p_u, p_v] holds the work of the jobs whose
    windows lie in it; the ON-run structure is enumerated and each structure is
    filled greedily from the right. Blocks are stitched by a small program
    that may bridge the gap between two blocks with idle time instead of a
    turn-on. EDF inside the resulting ON intervals yields the trace.

    Raises:
        InfeasibleInstanceError: If the instance is not schedulable.
        OracleSizeError: If a block has more than ``max_segments`` segments.
    """
    if not instance.jobs:
        return _empty_schedule("exact")
    _require_feasible(instance)
    model = instance.model
    blocks = [_Block(group, model, max_segments) for group in _blocks(instance.jobs)]
    n = len(blocks)
    gaps = [blocks[b + 1].start - blocks[b].end for b in range(n - 1)]

    best: List[Dict[bool, Tuple[Fraction, bool]]] = [dict() for _ in range(n)]
    for b in range(n - 1, -1, -1):
        for lt in ((False,) if b == 0 else (False, True)):
            choices = []
            plan = blocks[b].plan(lt, False)
            if plan is not None:
                tail = best[b + 1][False][0] if b + 1 < n else Fraction(0)
                choices.append((plan.cost + tail, False))
            if b + 1 < n:
                plan = blocks[b].plan(lt, True)
                if plan is not None:
                    choices.append((plan.cost + model.psi_sigma * gaps[b] + best[b + 1][True][0], True))
            if not choices:
                raise OracleError(f"Block starting at {blocks[b].start} has no schedule")
            best[b][lt] = min(choices, key=lambda c: c[0])

    intervals = []
    lt = False
    for b, block in enumerate(blocks):
        _, rt = best[b][lt]
        intervals.extend(block.intervals(block.plan(lt, rt)))
        if rt:
            intervals.append((block.end, blocks[b + 1].start))
        lt = rt
    return _finish(instance, schedule_within(instance.jobs, intervals), "exact")


def solve_opt(
    instance: Instance,
    grid_step=None,
    *,
    max_steps: int = DEFAULT_MAX_GRID_STEPS,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> OptSchedule:
    """
    Picks a solver: the grid program when the instance spans at most
    ``max_steps`` grid steps (and has few jobs), the continuous solver
    otherwise.
    """
    if not instance.jobs:
        return _empty_schedule("grid")
    g = infer_grid_step(instance) if grid_step is None else parse_rational(grid_step)
    horizon = max(j.d for j in instance.jobs) - min(j.a for j in instance.jobs)
    aligned = all((v / g).denominator == 1 for j in instance.jobs for v in (j.a, j.d, j.c))
    if aligned and horizon / g <= max_steps and len(instance.jobs) <= DEFAULT_MAX_GRID_JOBS:
        return optimal_energy(instance, g, max_steps=max_steps)
    logger.debug("Grid of %s too fine for %s; using the continuous solver", g, horizon)
    return optimal_energy_exact(instance, max_segments=max_segments)


def _bridge(periods: List[Tuple[Fraction, Fraction]], model: EnergyModel) -> List[Tuple[Fraction, Fraction]]:
    out: List[List[Fraction]] = []
    for s, e in periods:
        if out and model.psi_sigma * (s - out[-1][1]) <= model.E:
            out[-1][1] = e
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def _asap_periods(jobs: Sequence[Job]) -> List[Tuple[Fraction, Fraction]]:
    start = min(j.a for j in jobs)
    end = max(j.d for j in jobs)
    run = edf_pieces(jobs, [(start, end)])
    return merge_intervals((s, e) for s, e, _ in run.pieces)


def edf_immediate_schedule(instance: Instance) -> OptSchedule:
    """EDF from each arrival; gaps shorter than the break-even time are idled."""
    if not instance.jobs:
        return _empty_schedule("edf-immediate")
    _require_feasible(instance)
    on = _bridge(_asap_periods(instance.jobs), instance.model)
    return _finish(instance, schedule_within(instance.jobs, on), "edf-immediate")


def edf_lazy_schedule(instance: Instance) -> OptSchedule:
    """EDF run as late as possible; gaps shorter than the break-even time are idled."""
    if not instance.jobs:
        return _empty_schedule("edf-lazy")
    _require_feasible(instance)
    mirrored = [Job(j.id, -j.d, -j.a, j.c) for j in instance.jobs]
    periods = sorted((-e, -s) for s, e in _asap_periods(mirrored))
    on = _bridge(periods, instance.model)
    return _finish(instance, schedule_within(instance.jobs, on), "edf-lazy")
