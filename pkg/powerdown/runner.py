"""
Batch runs behind the ``compare`` and ``verify`` commands.

``check_instance`` is the property suite for one instance: Algorithm A and
Algorithm S meet every deadline, A stays within three times the optimum and
the phase accounting identities hold. ``verify`` fans it out over seeded
random instances plus a few hand-built ones with a tiny job, and shrinks
failures to small reproducers.
"""
import csv
import logging
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from powerdown.adversary import gen_random_feasible
from powerdown.analysis import competitive_report
from powerdown.core import EnergyModel, Instance, InstanceError, Job, check_feasibility, energy_of_trace
from powerdown.engine import DeadlineMiss, ProtocolViolation, simulate, validate_trace
from powerdown.oracle import OracleError, edf_immediate_schedule, edf_lazy_schedule, solve_opt
from powerdown.policies import make_policy

logger = logging.getLogger(__name__)

COMPETITIVE_BOUND = Fraction(3)
PSI_SIGMA_CYCLE = (Fraction(1), Fraction(1, 2), Fraction(1, 4))
SMALL_JOB = Fraction(1, 1000)


@dataclass
class InstanceCheck:
    seed: Optional[int]
    instance: Instance
    label: str = ""
    failures: List[str] = field(default_factory=list)
    ratio: Optional[Fraction] = None

    @property
    def ok(self) -> bool:
        return not self.failures


def check_instance(
    instance: Instance,
    *,
    seed: Optional[int] = None,
    label: str = "",
    a_params: Optional[Dict[str, Any]] = None,
    max_grid_steps: int = 600,
) -> InstanceCheck:
    """
    Runs the property suite on one feasible instance.

    Args:
        instance: The instance to check.
        seed: Carried into the result for reporting.
        label: Name of the instance in logs and reproducer files.
        a_params: Keyword parameters for Algorithm A (``u``, ``idle_mode``,
            ``idle_factor``).
        max_grid_steps: Grid size limit of the oracle.

    Returns:
        The check result; ``failures`` lists every property that did not hold.
    """
    result = InstanceCheck(seed, instance, label or (f"seed-{seed}" if seed is not None else "instance"))
    failures = result.failures
    opt = solve_opt(instance, max_steps=max_grid_steps)

    for name, heuristic in (("edf_immediate", edf_immediate_schedule), ("edf_lazy", edf_lazy_schedule)):
        if opt.energy > heuristic(instance).energy:
            failures.append(f"oracle above {name}")

    try:
        report = competitive_report(instance, make_policy("a", **(a_params or {})), opt=opt)
    except (DeadlineMiss, ProtocolViolation, InstanceError) as e:
        failures.append(f"a: {e}")
        report = None
    if report is not None:
        result.ratio = report.ratio
        failures.extend(f"a: {v}" for v in validate_trace(instance, report.alg_trace).violations)
        if report.alg_energy > COMPETITIVE_BOUND * report.opt_energy:
            failures.append(f"a: ratio {float(report.ratio):.6f} above 3")
        if report.delta_minus_lambda != 0:
            failures.append(f"a: delta - lambda sums to {report.delta_minus_lambda}")
        if not report.lemma3_ok:
            failures.append("a: per-phase energy inequalities fail")
        if not report.claim1_ok:
            failures.append("a: single-phase bound 3/2 fails")
        if report.lemma4_prefix_failures:
            failures.append(f"a: {report.lemma4_prefix_failures} prefix margins fall short")

    try:
        trace = simulate(instance, make_policy("s"))
        failures.extend(f"s: {v}" for v in validate_trace(instance, trace).violations)
    except (DeadlineMiss, ProtocolViolation, InstanceError) as e:
        failures.append(f"s: {e}")
    return result


def minimize_failure(instance: Instance, still_fails: Callable[[Instance], bool]) -> Instance:
    """
    Greedily drops jobs while ``still_fails`` keeps holding.

    Every intermediate instance stays feasible because dropping jobs never
    overloads an interval.
    """
    current = instance
    shrunk = True
    while shrunk and len(current.jobs) > 1:
        shrunk = False
        for job in current.jobs:
            candidate = current.without(job.id)
            if still_fails(candidate):
                logger.debug("Dropped %s, %d jobs left", job.id, len(candidate.jobs))
                current = candidate
                shrunk = True
                break
    return current


def random_instance(seed: int, index: int, max_jobs: int, horizon: int, grid_step=1) -> Instance:
    """The fuzz instance for ``seed``; psi_sigma cycles through 1, 1/2, 1/4."""
    n_jobs = random.Random(seed).randint(1, max_jobs)
    psi_sigma = PSI_SIGMA_CYCLE[index % len(PSI_SIGMA_CYCLE)]
    return gen_random_feasible(seed, n_jobs, horizon, psi_sigma=psi_sigma, grid_step=grid_step)


def structured_instances(size: Fraction = SMALL_JOB) -> List[Tuple[str, Instance]]:
    """
    Hand-built instances with a job of processing time ``size``.

    For every psi_sigma of the fuzz cycle: one tiny job, and an urgent pair
    whose second job leaves no slack beside the first.
    """
    out = []
    for psi_sigma in PSI_SIGMA_CYCLE:
        model = EnergyModel(psi_sigma)
        out.append((f"tiny-{psi_sigma}", Instance(model, (Job("tiny", 0, 10, size),))))
        pair = (Job("j1", 0, 10, size), Job("j2", Fraction(19, 2) - size, 10, Fraction(1, 2) + size))
        out.append((f"urgent-pair-{psi_sigma}", Instance(model, pair)))
    return out


def _verify_one(task: Tuple[int, int, int, int, Any, Dict[str, Any], int]) -> InstanceCheck:
    seed, index, max_jobs, horizon, grid_step, a_params, max_grid_steps = task
    instance = random_instance(seed, index, max_jobs, horizon, grid_step)
    result = check_instance(instance, seed=seed, a_params=a_params, max_grid_steps=max_grid_steps)
    if not result.ok:
        def still_fails(candidate: Instance) -> bool:
            return not check_instance(candidate, a_params=a_params, max_grid_steps=max_grid_steps).ok

        result.instance = minimize_failure(instance, still_fails)
    return result


def _fan_out(fn: Callable, tasks: Sequence, workers: int) -> List:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


@dataclass
class VerifySummary:
    checked: int
    failures: List[InstanceCheck] = field(default_factory=list)
    max_ratio: Optional[Fraction] = None

    @property
    def ok(self) -> bool:
        return not self.failures


def verify(
    seed: int,
    n: int,
    *,
    max_jobs: int = 8,
    horizon: int = 40,
    grid_step=1,
    workers: int = 1,
    a_params: Optional[Dict[str, Any]] = None,
    max_grid_steps: int = 600,
    structured: bool = True,
) -> VerifySummary:
    """
    Checks ``n`` random instances drawn from seeds ``seed, seed + 1, ...``.

    With ``structured`` the hand-built small-job instances are checked too.
    Results are merged in seed order regardless of ``workers``.
    """
    tasks = [(seed + i, i, max_jobs, horizon, grid_step, dict(a_params or {}), max_grid_steps) for i in range(n)]
    results = _fan_out(_verify_one, tasks, workers)
    if structured:
        for name, instance in structured_instances():
            results.append(check_instance(instance, label=name, a_params=a_params, max_grid_steps=max_grid_steps))
    summary = VerifySummary(checked=len(results))
    for result in results:
        if result.ratio is not None and (summary.max_ratio is None or result.ratio > summary.max_ratio):
            summary.max_ratio = result.ratio
        if not result.ok:
            logger.warning("⚠️  %s: %s", result.label, "; ".join(result.failures))
            summary.failures.append(result)
    return summary


def compare_one(name: str, instance: Instance, policy_name: str, policy_params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    One CSV row: energies and ratio of ``policy_name`` on ``instance``.

    Infeasible instances and failed runs give a row with ``status`` set and
    empty energy columns.
    """
    row: Dict[str, Any] = {
        "instance": name,
        "policy": policy_name,
        "alg_energy": "",
        "opt_energy": "",
        "ratio": "",
        "max_ratio": "",
        "status": "ok",
    }
    if not check_feasibility(instance):
        row["status"] = "skipped: infeasible"
        return row
    try:
        trace = simulate(instance, make_policy(policy_name, **(policy_params or {})))
        opt = solve_opt(instance)
    except DeadlineMiss as e:
        row["status"] = f"deadline miss: {e}"
        return row
    except (ProtocolViolation, OracleError) as e:
        row["status"] = f"error: {e}"
        return row
    alg = energy_of_trace(trace, instance.model)
    row["alg_energy"] = float(alg)
    row["opt_energy"] = float(opt.energy)
    row["ratio"] = float(alg / opt.energy) if opt.energy else ""
    return row


def _compare_task(task: Tuple[str, Instance, str, Dict[str, Any]]) -> Dict[str, Any]:
    return compare_one(*task)


def compare(
    instances: Iterable[Tuple[str, Instance]],
    policies: Sequence[str],
    *,
    policy_params: Optional[Dict[str, Dict[str, Any]]] = None,
    workers: int = 1,
) -> Tuple[List[Dict[str, Any]], Dict[str, float]]:
    """
    Runs every policy on every instance.

    Returns:
        The rows in (instance, policy) input order and the maximum ratio per
        policy over the rows that completed. Every row carries its policy's
        maximum in ``max_ratio``.
    """
    params = policy_params or {}
    tasks = [(name, inst, p, dict(params.get(p, {}))) for name, inst in instances for p in policies]
    rows = _fan_out(_compare_task, tasks, workers)
    max_ratio: Dict[str, float] = {}
    for row in rows:
        if row["ratio"] != "":
            max_ratio[row["policy"]] = max(max_ratio.get(row["policy"], 0.0), row["ratio"])
    for row in rows:
        row["max_ratio"] = max_ratio.get(row["policy"], "")
    return rows, max_ratio


def save_rows_csv(path: str, rows: List[Dict[str, Any]], fieldnames: Optional[List[str]] = None):
    """Writes ``rows`` as CSV; a header-only file when there are no rows."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fieldnames = fieldnames or (list(rows[0].keys()) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)