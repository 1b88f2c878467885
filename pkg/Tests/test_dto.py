"""
Tests for the JSON file models.
"""
import json
from fractions import Fraction
from pathlib import Path

import pytest

from powerdown.adversary import AdversaryTranscript, gen_tight_s
from powerdown.algo_a import AlgorithmA
from powerdown.analysis import competitive_report
from powerdown.core import (
    EnergyModel,
    Instance,
    InstanceError,
    Job,
    check_feasibility,
    energy_of_trace,
    format_rational,
)
from powerdown.dto import (
    InstanceFile,
    JobRecord,
    ReportFile,
    SegmentRecord,
    TraceFile,
    TranscriptFile,
    ValidationError,
)
from powerdown.engine import simulate

F = Fraction


def test_job_record_normalizes_rationals():
    record = JobRecord(id="j1", a=0, d="0.5", c="2/8")
    assert (record.a, record.d, record.c) == ("0", "1/2", "1/4")
    assert record.to_job() == Job("j1", 0, F(1, 2), F(1, 4))
    with pytest.raises(ValidationError):
        JobRecord(id="j1", a="x", d="1", c="1")
    with pytest.raises(ValidationError):
        JobRecord(id="", a="0", d="1", c="1")
    with pytest.raises(ValidationError):
        JobRecord(id="j1", a="0", d="1", c="1", weight="2")


def test_instance_file():
    text = json.dumps({"name": "pair", "psi_sigma": "1/2", "jobs": [
        {"id": "j1", "a": "0", "d": "10", "c": "1"},
        {"id": "j2", "a": "1/3", "d": "4", "c": "1/2"},
    ]})
    instance = InstanceFile.from_json(text).to_instance()
    assert instance.model.psi_sigma == F(1, 2)
    assert instance.job_map["j2"].a == F(1, 3)
    again = InstanceFile.from_instance(instance, "pair")
    assert again.to_instance() == instance
    assert InstanceFile.from_json(json.dumps({"jobs": []})).psi_sigma == "1"


def test_instance_file_rejects_bad_values():
    with pytest.raises(ValidationError):
        InstanceFile.from_json(json.dumps({"psi_sigma": "0", "jobs": []}))
    with pytest.raises(ValidationError):
        InstanceFile.from_json("{not json")
    record = InstanceFile.from_json(json.dumps({"jobs": [{"id": "j1", "a": "3", "d": "4", "c": "2"}]}))
    with pytest.raises(InstanceError):
        record.to_instance()


def test_segment_record_requires_job_exactly_when_busy():
    assert SegmentRecord(start="0", end="1", state="BUSY", job="j1").job == "j1"
    with pytest.raises(ValidationError):
        SegmentRecord(start="0", end="1", state="BUSY")
    with pytest.raises(ValidationError):
        SegmentRecord(start="0", end="1", state="IDLE", job="j1")
    with pytest.raises(ValidationError):
        SegmentRecord(start="0", end="1", state="ASLEEP")


def test_trace_file_keeps_the_trace():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1), Job("j2", F(1, 3), 5, F(1, 2))))
    trace = simulate(inst, AlgorithmA())
    energy = energy_of_trace(trace, inst.model)
    record = TraceFile.from_json(TraceFile.from_trace(trace, energy, "a").to_json())
    assert record.to_trace() == trace
    assert record.energy == format_rational(energy)
    with pytest.raises(ValidationError):
        TraceFile(machines=[[]])


def test_report_file():
    inst = Instance(EnergyModel(), (Job("j1", 0, 10, 1),))
    report = ReportFile.from_report(competitive_report(inst, AlgorithmA()), "a", "one_job")
    assert report.ratio == "2"
    assert report.phases[0].kind == "SINGLE"
    assert (report.phases[0].t1, report.phases[0].te) == ("17/2", "23/2")
    row = report.csv_row()
    assert row["ratio"] == 2.0 and row["instance"] == "one_job"


def test_transcript_file():
    transcript = AdversaryTranscript(case="B", observations={"x1": F(1, 2)}, jobs=[Job("j1", 0, 10, F(1, 100))],
                                     alg_energy=F(3), opt_energy=F(1), stages=[("j1", F(3))])
    record = TranscriptFile.from_transcript(transcript, "a")
    data = json.loads(record.to_json())
    assert data["version"] == 1
    assert data["ratio"] == "3"
    assert data["observations"] == {"x1": "1/2"}
    assert data["jobs"][0]["c"] == "1/100"


SAMPLES = Path(__file__).resolve().parent.parent / "sample-lab"


@pytest.mark.parametrize("name", ["one_job", "urgent_pair", "late_pair", "tight_two_pairs"])
def test_sample_instances_load(name):
    instance = InstanceFile.from_json((SAMPLES / f"{name}.json").read_text()).to_instance()
    assert check_feasibility(instance)


def test_sample_tight_file_matches_generator():
    instance = InstanceFile.from_json((SAMPLES / "tight_two_pairs.json").read_text()).to_instance()
    assert instance == gen_tight_s(rounds=1)
