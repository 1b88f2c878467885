"""
powerdown: online power-down scheduling on two machines.

This package simulates online policies that decide when each of two machines
turns on, idles and powers down, computes the offline single-machine optimum
exactly, and accounts every run phase by phase.

Key exports include:
- Domain types: `Job`, `EnergyModel`, `Instance`, `Trace`.
- `simulate`: the event-driven engine.
- Policies: `AlgorithmA`, `AlgorithmS`, `EagerPolicy`, `make_policy`.
- `solve_opt`: the offline optimum.
- `competitive_report`: phase accounting of a run.
- `adversary_play`, `bound_formulas`: the adaptive lower-bound game.
"""
from powerdown.core import (
    ArgumentError,
    EnergyModel,
    Instance,
    InstanceError,
    Job,
    Segment,
    State,
    Trace,
    TurnOn,
    check_feasibility,
    energy_of_trace,
    format_rational,
    parse_rational,
    remaining_work,
)
from powerdown.engine import DeadlineMiss, Policy, ProtocolViolation, simulate, validate_trace
from powerdown.algo_a import AlgoAConfig, AlgorithmA
from powerdown.algo_s import AlgoSConfig, AlgorithmS, policy_s
from powerdown.policies import EagerPolicy, make_policy
from powerdown.oracle import (
    InfeasibleInstanceError,
    OptSchedule,
    OracleSizeError,
    optimal_energy,
    optimal_energy_bruteforce,
    optimal_energy_exact,
    solve_opt,
)
from powerdown.analysis import competitive_report, extract_phases, phase_accounts
from powerdown.adversary import adversary_play, bound_formulas, gen_random_feasible, gen_tight_s

__VERSION__ = "0.1.0"
