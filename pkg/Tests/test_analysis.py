"""
Tests for phase extraction and the per-phase accounting.
"""
import random
from fractions import Fraction

import pytest

from powerdown.adversary import gen_random_feasible
from powerdown.algo_a import AlgorithmA
from powerdown.analysis import (
    Phase,
    PhaseAccount,
    PhaseKind,
    check_claim1,
    check_lemma3,
    competitive_report,
    phase_accounts,
    window_energy,
)
from powerdown.core import ArgumentError, EnergyModel, Instance, Job, energy_of_trace
from powerdown.engine import simulate
from powerdown.oracle import solve_opt

F = Fraction
EPS = F(1, 10**6)


def test_single_job_phase():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    report = competitive_report(inst, AlgorithmA())
    assert report.ratio == 2
    assert len(report.phases) == 1
    phase = report.phases[0].phase
    assert (phase.t0, phase.t1, phase.te, phase.kind) == (0, F(17, 2), F(23, 2), PhaseKind.SINGLE)
    account = report.phases[0].account
    assert (account.A, account.O, account.O_f, account.O_n) == (4, 2, 1, F(5, 2))
    assert (account.alpha, account.lam, account.delta) == (1, 0, 0)
    assert report.phases[0].lemma3.ok
    assert report.phases[0].claim1
    assert report.lemma4_final_ok
    print("[OK] Single-job phase account")


def test_urgent_pair_account():
    """Tiny job plus urgent follow-up: A = 4.5, O_f = 0.5, O_n = 2.5 up to 10 eps"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, EPS), Job("j2", F(19, 2) - EPS, 10, F(1, 2) + EPS)))
    report = competitive_report(inst, AlgorithmA())
    assert len(report.phases) == 1
    account = report.phases[0].account
    assert abs(account.A - F(9, 2)) <= 10 * EPS
    assert abs(account.O_f - F(1, 2)) <= 10 * EPS
    assert abs(account.O_n - F(5, 2)) <= 10 * EPS
    assert account.delta - account.lam == 0
    assert report.phases[0].lemma3.ok
    print("[OK] Urgent pair reproduces the phase values")


def test_opt_only_activity_becomes_special_phase():
    """The optimum starts the late pair while the online run is still OFF"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 2, 1), Job("j2", 3, 20, 1), Job("j3", 19, 20, 1)))
    report = competitive_report(inst, AlgorithmA())
    assert report.opt_energy == 5
    phases = [p.phase for p in report.phases]
    assert [p.kind for p in phases] == [PhaseKind.SINGLE, PhaseKind.SPECIAL, PhaseKind.SINGLE]
    assert (phases[0].t0, phases[0].t1, phases[0].te) == (0, F(1, 2), F(9, 2))
    assert (phases[1].t0, phases[1].t1, phases[1].te) == (F(9, 2), 18, 19)
    assert (phases[2].t0, phases[2].te) == (19, 22)
    special = report.phases[1].account
    assert (special.A, special.O, special.delta, special.lam) == (0, 2, 1, 0)
    assert report.phases[1].claim1 is None
    assert report.delta_minus_lambda == 0
    print("[OK] Optimum-only stretch becomes a SPECIAL phase")


def test_delta_minus_lambda_sums_to_zero():
    for seed in range(120):
        inst = gen_random_feasible(seed, 6, 30, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        report = competitive_report(inst, AlgorithmA())
        assert report.delta_minus_lambda == 0, seed
        assert report.alg_energy <= 3 * report.opt_energy, seed
        assert report.lemma4_final_ok, seed
        assert report.lemma4_prefix_failures == 0, seed
        assert report.lemma3_ok, seed
        assert report.claim1_ok, seed
    print("[OK] Accounting identities hold on 120 random runs")


def test_phase_costs_add_up():
    """Phases partition the online schedule; the optimum may idle between phases"""
    for seed in range(40):
        inst = gen_random_feasible(seed, 5, 25)
        report = competitive_report(inst, AlgorithmA())
        assert sum(p.account.A for p in report.phases) == report.alg_energy, seed
        assert sum(p.account.O for p in report.phases) <= report.opt_energy, seed


def test_check_lemma3_inequalities():
    ok = PhaseAccount(A=F(4), O=F(2), O_f=F(1), O_n=F(5, 2), alpha=F(1), lam=F(0), delta=F(0),
                      theta=F(3, 2), opt_on_at_end=False)
    result = check_lemma3(ok)
    assert result.ineq2 and result.ineq3
    bad = PhaseAccount(A=F(10), O=F(2), O_f=F(1), O_n=F(2), alpha=F(1), lam=F(0), delta=F(0),
                       theta=F(0), opt_on_at_end=False)
    result = check_lemma3(bad)
    assert not result.ineq2 and not result.ineq3 and not result.ok


def test_claim1_only_for_single_phases():
    account = PhaseAccount(A=F(4), O=F(2), O_f=F(1), O_n=F(5, 2), alpha=F(1), lam=F(0), delta=F(0),
                           theta=F(1, 2), opt_on_at_end=False)
    single = Phase(F(0), F(1), F(2), PhaseKind.SINGLE)
    assert check_claim1(single, account, 1)
    assert not check_claim1(single, account, F(0))
    with pytest.raises(ArgumentError):
        check_claim1(Phase(F(0), F(1), F(2), PhaseKind.DUAL), account, 1)


def test_phase_accounts_split_at_borders():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    alg = simulate(inst, AlgorithmA())
    opt = solve_opt(inst).trace
    early = phase_accounts(Phase(F(0), F(0), F(19, 2), PhaseKind.SINGLE), alg, opt, inst.model)
    late = phase_accounts(Phase(F(19, 2), F(19, 2), F(12), PhaseKind.SINGLE), alg, opt, inst.model)
    assert early.O + late.O == 2
    assert early.alpha + early.delta + late.alpha + late.delta == 1


def test_energy_adds_up_over_any_time_partition():
    for seed in range(60):
        inst = gen_random_feasible(seed, 6, 30, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        alg_trace = simulate(inst, AlgorithmA())
        opt_trace = solve_opt(inst).trace
        for trace in (alg_trace, opt_trace):
            start, end = trace.horizon()
            rng = random.Random(seed)
            cuts = sorted({start, end} | {start + (end - start) * F(rng.randint(1, 99), 100) for _ in range(5)})
            pieces = sum((window_energy(trace, inst.model, s, e) for s, e in zip(cuts, cuts[1:])), F(0))
            assert pieces == energy_of_trace(trace, inst.model), seed
    print("[OK] Energy is additive over time partitions")
