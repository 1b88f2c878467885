"""
Tests for Algorithm A: trigger time, availability, urgent swaps and the idle window.
"""
from fractions import Fraction

import pytest

from powerdown.algo_a import AlgoAConfig, AlgorithmA, available, due_trigger, latest_batch_start, trigger_time
from powerdown.analysis import PhaseKind, competitive_report
from powerdown.core import ArgumentError, EnergyModel, Instance, Job, Segment, State, TurnOn, energy_of_trace
from powerdown.engine import simulate, validate_trace
from powerdown.oracle import solve_opt
from powerdown.runner import check_instance

F = Fraction
EPS = F(1, 10**6)


def urgent_pair_instance(eps=EPS):
    """A tiny job and an urgent follow-up that cannot share its machine."""
    return Instance(EnergyModel(), (Job("j1", 0, 10, eps), Job("j2", F(19, 2) - eps, 10, F(1, 2) + eps)))


def test_trigger_time():
    jobs = [Job("j1", 0, 10, 1), Job("j2", 0, 6, 2)]
    assert latest_batch_start(jobs) == 4
    assert trigger_time(jobs) == F(7, 2)
    assert trigger_time([], F(1, 2)) is None
    assert due_trigger(jobs, F(3)) is None
    decision = due_trigger(jobs, F(7, 2), machine=1)
    assert decision.machine == 1 and decision.jobs == ("j2", "j1")
    print("[OK] Trigger time T* - u")


def test_available():
    """Availability is an EDF feasibility test of the queue plus the job"""
    queued = Job("q", 0, 10, 3)
    assert available([(queued, F(2))], Job("n", 5, 10, 3), F(5))
    assert not available([(queued, F(2))], Job("n", 5, 10, 4), F(5))
    assert available([], Job("n", 5, 6, 1), F(5))


def test_config_validation():
    assert AlgoAConfig(u="1/4").u == F(1, 4)
    with pytest.raises(ArgumentError):
        AlgoAConfig(u=-1)
    with pytest.raises(ArgumentError):
        AlgoAConfig(idle_mode="forever")
    with pytest.raises(ArgumentError):
        AlgoAConfig(idle_factor=0)


def test_single_job():
    """One job: start at T* - u, run, idle 2/psi_sigma, power down"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    trace = simulate(inst, AlgorithmA())
    assert trace.machines[0] == (
        Segment(F(17, 2), F(19, 2), State.BUSY, "j1"),
        Segment(F(19, 2), F(23, 2), State.IDLE),
    )
    assert energy_of_trace(trace, inst.model) == 4
    assert solve_opt(inst).energy == 2
    print("[OK] Single job costs 4 against an optimum of 2")


def test_idle_window_scales_with_psi_sigma():
    inst = Instance(EnergyModel("1/2"), (Job("j1", 0, 10, 1),))
    trace = simulate(inst, AlgorithmA())
    idle = [seg for _, seg in trace.segments(State.IDLE)]
    assert [seg.length for seg in idle] == [4]
    assert energy_of_trace(trace, inst.model) == 1 + 1 + 2


def test_urgent_job_turns_on_second_machine():
    """The follow-up does not fit M_P, so the other machine takes it and becomes M_P"""
    inst = urgent_pair_instance()
    policy = AlgorithmA()
    trace = simulate(inst, policy)
    start = F(19, 2) - EPS
    assert trace.machines[0] == (Segment(start, F(19, 2), State.BUSY, "j1"),)
    assert trace.machines[1] == (
        Segment(start, F(10), State.BUSY, "j2"),
        Segment(F(10), F(12), State.IDLE),
    )
    assert policy.swaps == [(start, "j2")]
    assert policy.primary == 1
    assert energy_of_trace(trace, inst.model) == F(9, 2) + 2 * EPS
    assert solve_opt(inst).energy == F(3, 2) + 2 * EPS
    assert validate_trace(inst, trace).ok
    print("[OK] Urgent job swaps the machine names")


def test_idle_budget_is_cumulative():
    """A job arriving during the idle window consumes part of the total budget"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 2, 1), Job("j2", 3, 20, 1)))
    trace = simulate(inst, AlgorithmA())
    # j1 starts at 1/2; j2 arrives while M_P idles and is served at once.
    assert trace.machines[0][0] == Segment(F(1, 2), F(3, 2), State.BUSY, "j1")
    idle = sum((seg.length for _, seg in trace.segments(State.IDLE)), F(0))
    assert idle == 2

    per_episode = simulate(inst, AlgorithmA(AlgoAConfig(idle_mode="per_episode")))
    idle = sum((seg.length for _, seg in per_episode.segments(State.IDLE)), F(0))
    assert idle == F(3, 2) + 2


def test_idle_factor_mutation():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    trace = simulate(inst, AlgorithmA(AlgoAConfig(idle_factor=1)))
    assert energy_of_trace(trace, inst.model) == 3


def test_arrival_joins_waiting_batch():
    """Jobs wait together until the shared trigger fires"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1), Job("j2", 1, 10, 1)))
    trace = simulate(inst, AlgorithmA())
    assert [on.t for on in trace.turn_ons] == [F(15, 2)]
    busy = [seg for _, seg in trace.segments(State.BUSY)]
    assert busy[0].start == F(15, 2) and busy[-1].end == F(19, 2)


def restart_instance():
    return Instance(
        EnergyModel("1/2"),
        (
            Job("j1", 18, 36, 4),
            Job("j2", 22, 23, 1),
            Job("j3", 25, 28, 1),
            Job("j4", 32, 34, 2),
            Job("j5", 34, 35, 1),
        ),
    )


def test_restart_at_power_down_instant():
    """M_P spends its budget at 34 and a job arriving at 34 turns it straight back on"""
    inst = restart_instance()
    trace = simulate(inst, AlgorithmA())
    assert trace.turn_ons == (TurnOn(0, F(22)), TurnOn(0, F(34)))
    assert trace.machines[0][-3:] == (
        Segment(F(32), F(34), State.BUSY, "j4"),
        Segment(F(34), F(35), State.BUSY, "j5"),
        Segment(F(35), F(39), State.IDLE),
    )
    assert validate_trace(inst, trace).ok
    assert energy_of_trace(trace, inst.model) == 15

    report = competitive_report(inst, AlgorithmA())
    phases = [(p.phase.t0, p.phase.t1, p.phase.te, p.phase.kind, p.phase.virtual) for p in report.phases]
    assert phases == [
        (F(18), F(22), F(34), PhaseKind.SINGLE, False),
        (F(34), F(34), F(39), PhaseKind.SINGLE, False),
    ]
    assert not any("turn-on" in failure for failure in check_instance(inst).failures)
    print("[OK] Restart pays a second turn-on and opens a new phase")


@pytest.mark.parametrize("mode, idle_end", [("cumulative", F(11, 2)), ("per_episode", F(11, 2)), ("per_phase", F(5))])
def test_idle_budget_across_swap(mode, idle_end):
    """per_phase carries the idle already spent by the old M_P over to the new one"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 2, 1), Job("j2", 2, 3, 1), Job("j3", F(5, 2), F(7, 2), 1)))
    policy = AlgorithmA(AlgoAConfig(idle_mode=mode))
    trace = simulate(inst, policy)
    assert policy.swaps == [(F(5, 2), "j3")]
    assert trace.machines[0][-1] == Segment(F(2), F(3), State.BUSY, "j2")
    assert trace.machines[1][-1] == Segment(F(7, 2), idle_end, State.IDLE)
    assert validate_trace(inst, trace).ok


def test_job_not_fitting_secondary_goes_to_primary():
    """With both machines ON a job that M_S cannot take joins M_P"""
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 2), Job("j2", 8, 9, 1), Job("j3", F(17, 2), 10, 1)))
    policy = AlgorithmA()
    trace = simulate(inst, policy)
    assert policy.swaps == [(F(8), "j2")]
    assert trace.machines[0] == (Segment(F(15, 2), F(19, 2), State.BUSY, "j1"),)
    assert trace.machines[1] == (
        Segment(F(8), F(9), State.BUSY, "j2"),
        Segment(F(9), F(10), State.BUSY, "j3"),
        Segment(F(10), F(12), State.IDLE),
    )
    assert validate_trace(inst, trace).ok
    print("[OK] M_P takes the job M_S cannot fit")


def test_idle_factor_one_fails_single_phase_bound():
    tiny = Instance(EnergyModel(), (Job("tiny", 0, 10, F(1, 1000)),))
    assert check_instance(tiny).ok
    failures = check_instance(tiny, a_params={"idle_factor": 1}).failures
    assert any("3/2" in failure for failure in failures)


def test_swap_sequence_in_one_phase():
    """x1, x2, w1 start on M_P; urgent y1 swaps the names; x3, x4 join M_S; y2 is pushed to M_P"""
    inst = Instance(
        EnergyModel(),
        (
            Job("x1", 0, 4, 1),
            Job("w1", 0, 20, 1),
            Job("x2", 3, F(9, 2), 1),
            Job("y1", 4, F(9, 2), F(1, 4)),
            Job("x3", F(17, 4), 6, F(1, 2)),
            Job("x4", F(9, 2), 6, F(1, 2)),
            Job("y2", 5, 6, F(3, 4)),
        ),
    )
    policy = AlgorithmA()
    trace = simulate(inst, policy)
    assert policy.swaps == [(F(4), "y1")]
    assert policy.primary == 1
    assert trace.machines[0] == (
        Segment(F(5, 2), F(7, 2), State.BUSY, "x1"),
        Segment(F(7, 2), F(9, 2), State.BUSY, "x2"),
        Segment(F(9, 2), F(5), State.BUSY, "x3"),
        Segment(F(5), F(11, 2), State.BUSY, "x4"),
        Segment(F(11, 2), F(13, 2), State.BUSY, "w1"),
    )
    assert trace.machines[1] == (
        Segment(F(4), F(17, 4), State.BUSY, "y1"),
        Segment(F(17, 4), F(5), State.IDLE),
        Segment(F(5), F(23, 4), State.BUSY, "y2"),
        Segment(F(23, 4), F(7), State.IDLE),
    )
    assert validate_trace(inst, trace).ok
    assert energy_of_trace(trace, inst.model) == 9

    report = competitive_report(inst, AlgorithmA())
    online = [p.phase for p in report.phases if p.phase.kind != PhaseKind.SPECIAL]
    assert [(p.t0, p.t1, p.te, p.kind) for p in online] == [(F(0), F(5, 2), F(7), PhaseKind.DUAL)]
    print("[OK] One dual phase ends when the idle time after y2 expires")
