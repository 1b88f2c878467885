"""
Tests for the offline optimum: grid program, brute force, continuous solver
and the EDF heuristics.
"""
import random
from fractions import Fraction

import pytest

from powerdown.adversary import gen_random_feasible
from powerdown.core import ArgumentError, EnergyModel, Instance, Job, State
from powerdown.engine import validate_trace
from powerdown.oracle import (
    InfeasibleInstanceError,
    OracleSizeError,
    edf_immediate_schedule,
    edf_lazy_schedule,
    infer_grid_step,
    optimal_energy,
    optimal_energy_bruteforce,
    optimal_energy_exact,
    schedule_within,
    solve_opt,
)

F = Fraction


def _validate_single(instance, trace):
    """Checks a one-machine trace with the two-machine validator."""
    padded = type(trace)(machines=(trace.machines[0], ()), turn_ons=trace.turn_ons)
    return validate_trace(instance, padded)


def test_empty_instance():
    inst = Instance(EnergyModel(), ())
    assert optimal_energy(inst).energy == 0
    assert solve_opt(inst).energy == 0


def test_single_job():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    opt = optimal_energy(inst)
    assert opt.energy == 2
    assert opt.method == "grid"
    assert _validate_single(inst, opt.trace).ok


def test_gap_bridged_only_below_break_even():
    """Two busy periods: idle across short gaps, power down across long ones"""
    near = Instance(EnergyModel(), (Job("j1", 0, 1, 1), Job("j2", 2, 3, 1)))
    assert optimal_energy(near).energy == 1 + 2 + 1
    far = Instance(EnergyModel(), (Job("j1", 0, 1, 1), Job("j2", 5, 6, 1)))
    assert optimal_energy(far).energy == 2 + 2
    cheap_idle = Instance(EnergyModel("1/4"), (Job("j1", 0, 1, 1), Job("j2", 4, 5, 1)))
    assert optimal_energy(cheap_idle).energy == 1 + 2 + F(3, 4)
    print("[OK] Gaps bridged against the break-even time")


def test_flexible_jobs_are_batched():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1), Job("j2", 3, 6, 1), Job("j3", 5, 12, 2)))
    opt = optimal_energy(inst)
    assert opt.energy == 1 + 4
    assert len(opt.trace.turn_ons) == 1
    assert _validate_single(inst, opt.trace).ok


def test_guards():
    bad = Instance(EnergyModel(), (Job("j1", 0, 2, 2), Job("j2", 0, 2, 1)))
    with pytest.raises(InfeasibleInstanceError):
        optimal_energy(bad)
    with pytest.raises(InfeasibleInstanceError):
        optimal_energy_exact(bad)

    wide = Instance(EnergyModel(), (Job("j1", 0, 1000, 1),))
    with pytest.raises(OracleSizeError):
        optimal_energy(wide)
    with pytest.raises(OracleSizeError):
        optimal_energy_bruteforce(wide)
    assert solve_opt(wide).energy == 2

    with pytest.raises(ArgumentError):
        optimal_energy(Instance(EnergyModel(), (Job("j1", 0, "5/2", 1),)), grid_step=1)
    assert infer_grid_step(Instance(EnergyModel(), (Job("j1", 0, "5/2", 1),))) == F(1, 2)


def test_schedule_within():
    jobs = [Job("j1", 0, 4, 1), Job("j2", 0, 4, 1)]
    trace = schedule_within(jobs, [(F(2), F(4))])
    assert [(s.start, s.end, s.state) for s in trace.machines[0]] == [
        (2, 3, State.BUSY),
        (3, 4, State.BUSY),
    ]


def test_grid_matches_bruteforce():
    """EDF pruning never loses the optimum"""
    checked = 0
    for seed in range(500):
        rng = random.Random(seed)
        inst = gen_random_feasible(seed, rng.randint(1, 4), rng.randint(4, 12), psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        assert optimal_energy(inst, grid_step=1).energy == optimal_energy_bruteforce(inst, grid_step=1).energy, seed
        checked += 1
    print(f"[OK] grid == brute force on {checked} instances")


def test_exact_matches_grid():
    for seed in range(150):
        inst = gen_random_feasible(seed, 5, 20, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        grid = optimal_energy(inst, grid_step=1)
        exact = optimal_energy_exact(inst)
        assert exact.energy == grid.energy, seed
        assert _validate_single(inst, exact.trace).ok, seed
    print("[OK] Continuous solver agrees with the grid program")


def test_exact_on_tiny_jobs():
    eps = F(1, 10**6)
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, eps), Job("j2", F(19, 2) - eps, 10, F(1, 2) + eps)))
    opt = solve_opt(inst)
    assert opt.method == "exact"
    assert opt.energy == F(3, 2) + 2 * eps
    assert opt.trace.on_intervals() == [(F(19, 2) - 2 * eps, 10)]


def test_heuristics_bound_the_optimum():
    for seed in range(200):
        inst = gen_random_feasible(seed, 8, 40, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        opt = solve_opt(inst).energy
        for heuristic in (edf_immediate_schedule, edf_lazy_schedule):
            schedule = heuristic(inst)
            assert opt <= schedule.energy, (seed, schedule.method)
            assert _validate_single(inst, schedule.trace).ok
    print("[OK] Heuristics never beat the optimum")


def test_removing_a_job_never_raises_the_optimum():
    for seed in range(80):
        inst = gen_random_feasible(seed, 5, 20, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        opt = solve_opt(inst).energy
        for job in inst.jobs:
            assert solve_opt(inst.without(job.id)).energy <= opt, (seed, job.id)
    print("[OK] Optimum is monotone under job removal")


def test_halving_the_grid_keeps_the_optimum():
    """Integer instances have an integer optimal schedule, so a finer grid finds nothing cheaper"""
    for seed in range(60):
        rng = random.Random(seed)
        inst = gen_random_feasible(seed, rng.randint(1, 4), rng.randint(4, 12), psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        coarse = optimal_energy(inst, grid_step=1)
        fine = optimal_energy(inst, grid_step=F(1, 2))
        assert fine.energy == coarse.energy, seed
        assert _validate_single(inst, fine.trace).ok, seed
