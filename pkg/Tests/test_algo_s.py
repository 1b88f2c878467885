"""
Tests for Algorithm S and its tight input family.
"""
from fractions import Fraction

import pytest

from powerdown.adversary import gen_random_feasible, gen_tight_s
from powerdown.algo_s import AlgoSConfig, AlgorithmS, anchor, policy_s
from powerdown.core import ArgumentError, EnergyModel, Instance, Job, Segment, State, energy_of_trace
from powerdown.engine import simulate, validate_trace
from powerdown.oracle import solve_opt

F = Fraction


def test_anchor():
    model = EnergyModel()
    assert anchor(Job("j", 0, 10, 1), model) == 9
    assert anchor(Job("j", 0, 10, 1), model, lam=2) == 8
    assert anchor(Job("j", 5, 6, 1), model) == 5
    assert anchor(Job("j", 0, 10, 1), EnergyModel("1/4")) == 6


def test_config_validation():
    assert AlgoSConfig(lam="3/2").lam == F(3, 2)
    with pytest.raises(ArgumentError):
        AlgoSConfig(lam=0)


def test_lone_machine_idles_until_break_even():
    """Turned on at the anchor, the machine stays ON for B in total"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, F(1, 2)),))
    trace = simulate(inst, policy_s())
    assert trace.machines[0] == (
        Segment(F(9), F(19, 2), State.BUSY, "j1"),
        Segment(F(19, 2), F(10), State.IDLE),
    )
    assert energy_of_trace(trace, inst.model) == 2
    print("[OK] Lone machine powers down B after its turn-on")


def test_pair_costs_four():
    """A job that does not fit M_P turns on the other machine"""
    inst = gen_tight_s(rounds=1)
    policy = AlgorithmS()
    trace = simulate(inst, policy)
    assert validate_trace(inst, trace).ok
    assert len(trace.turn_ons) == 4
    assert energy_of_trace(trace, inst.model) == 8
    print("[OK] Two pairs cost 8")


@pytest.mark.parametrize("r", [2, 10, 100])
def test_tight_family_ratio(r):
    """Measured ratio approaches 4r/(r+1)"""
    inst = gen_tight_s(k=1000, eps=F(1, 1000), eps_prime=F(1, 1000), rounds=r // 2)
    trace = simulate(inst, AlgorithmS())
    alg = energy_of_trace(trace, inst.model)
    opt = solve_opt(inst).energy
    assert alg == 4 * r
    ratio = alg / opt
    assert abs(float(ratio) - 4 * r / (r + 1)) < 1e-2
    print(f"[OK] r={r}: ratio {float(ratio):.4f}")


def test_no_deadline_misses_on_random_instances():
    for seed in range(60):
        inst = gen_random_feasible(seed, 6, 30, psi_sigma=[1, F(1, 2), F(1, 4)][seed % 3])
        trace = simulate(inst, AlgorithmS())
        assert validate_trace(inst, trace).ok, seed
    print("[OK] Algorithm S meets every deadline on 60 random instances")


def test_long_job_wakes_at_latest_start():
    """The anchor lies past the latest start, so the machine turns on at d - c"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 5),))
    trace = simulate(inst, AlgorithmS())
    assert trace.machines[0] == (Segment(F(5), F(10), State.BUSY, "j1"),)
    assert validate_trace(inst, trace).ok
    assert energy_of_trace(trace, inst.model) == 6
    print("[OK] Long job starts at its latest start")


def test_arrival_pulls_the_batch_forward():
    """A tight arrival makes the wake due at once; the waiting job starts with it"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1), Job("j2", 2, 4, 2)))
    trace = simulate(inst, AlgorithmS())
    assert [on.t for on in trace.turn_ons] == [F(2)]
    assert trace.machines[0] == (
        Segment(F(2), F(4), State.BUSY, "j2"),
        Segment(F(4), F(5), State.BUSY, "j1"),
    )
    assert energy_of_trace(trace, inst.model) == 4
