"""
File models - Pydantic internally, powerdown domain types externally
"""

from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel as PydanticBaseModel, ConfigDict, Field as PydanticField, ValidationError

from powerdown.analysis import CompetitiveReport, PhaseReport
from powerdown.core import (
    EnergyModel,
    Instance,
    Job,
    Segment,
    State,
    Trace,
    TurnOn,
    format_rational,
    parse_rational,
)

from .validators import rational_text, root_validator, validator

FORMAT_VERSION = 1


class PowerdownBaseModel(PydanticBaseModel):
    """
    Base model for every powerdown file.

    Uses Pydantic v2 for validation and JSON handling. Rational fields are
    kept as canonical "p/q" text so that files stay exact and diffable.

    Example:
        record = JobRecord(id="j1", a="0", d="10", c="1/2")
        record.to_json(indent=2)
    """

    model_config = ConfigDict(
        validate_assignment=True,
        use_enum_values=True,
        extra='forbid',
        strict=False,
        populate_by_name=True
    )

    @classmethod
    def json_schema(cls) -> Dict[str, Any]:
        """JSON schema of this file format."""
        return cls.model_json_schema()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PowerdownBaseModel':
        """
        Create model instance from dictionary with validation.

        Raises:
            ValidationError: If validation fails
        """
        return cls.model_validate(data)

    @classmethod
    def from_json(cls, text: str) -> 'PowerdownBaseModel':
        """
        Parse and validate a JSON document.

        Raises:
            ValidationError: If the document is malformed or fails validation
        """
        return cls.model_validate_json(text)

    def to_dict(self, *, exclude_none: bool = False, by_alias: bool = False) -> Dict[str, Any]:
        return self.model_dump(exclude_none=exclude_none, by_alias=by_alias)

    def to_json(self, *, exclude_none: bool = False, by_alias: bool = False, indent: Optional[int] = None) -> str:
        return self.model_dump_json(
            exclude_none=exclude_none,
            by_alias=by_alias,
            indent=indent
        )


def Field(
    default: Any = ...,
    *,
    ge: Optional[float] = None,
    le: Optional[float] = None,
    min_length: Optional[int] = None,
    max_length: Optional[int] = None,
    description: Optional[str] = None,
    example: Any = None,
    alias: Optional[str] = None,
    default_factory: Optional[Any] = None,
    **extra: Any
) -> Any:
    """
    Define a file field with validation and schema metadata.

    Args:
        default: Default value (use ... for required fields)
        ge: Greater than or equal
        le: Less than or equal
        min_length: Minimum length for strings/lists
        max_length: Maximum length for strings/lists
        description: Field description for the JSON schema
        example: Example value for the JSON schema
        alias: Alternative field name
        default_factory: Factory function for default value
        **extra: Additional Pydantic field parameters
    """
    field_kwargs = {
        'description': description,
        'examples': [example] if example is not None else None,
        'alias': alias,
        'default_factory': default_factory,
        'ge': ge,
        'le': le,
        'min_length': min_length,
        'max_length': max_length,
        **extra
    }
    field_kwargs = {k: v for k, v in field_kwargs.items() if v is not None}
    if 'default_factory' not in field_kwargs:
        field_kwargs['default'] = default
    return PydanticField(**field_kwargs)


def _text(value: Optional[Fraction]) -> Optional[str]:
    return None if value is None else format_rational(value)


class JobRecord(PowerdownBaseModel):
    id: str = Field(min_length=1, description="Job identifier", example="j1")
    a: str = Field(description="Arrival time", example="0")
    d: str = Field(description="Deadline", example="10")
    c: str = Field(description="Processing time", example="1")

    @validator('a', 'd', 'c', mode='before')
    @classmethod
    def exact(cls, value):
        return rational_text(value)

    def to_job(self) -> Job:
        """
        Raises:
            InstanceError: If the job violates c > 0 or a + c <= d.
        """
        return Job(self.id, parse_rational(self.a), parse_rational(self.d), parse_rational(self.c))

    @classmethod
    def from_job(cls, job: Job) -> 'JobRecord':
        return cls(id=job.id, a=format_rational(job.a), d=format_rational(job.d), c=format_rational(job.c))


class InstanceFile(PowerdownBaseModel):
    """
    Instance file: ``{"psi_sigma": "1", "jobs": [{"id", "a", "d", "c"}]}``.
    """

    name: Optional[str] = Field(None, description="Free-form label used in reports")
    psi_sigma: str = Field("1", description="Idle power in units where E = psi_b = 1")
    jobs: List[JobRecord] = Field(default_factory=list)

    @validator('psi_sigma', mode='before')
    @classmethod
    def exact(cls, value):
        text = rational_text(value)
        if parse_rational(text) <= 0:
            raise ValueError('psi_sigma must be positive')
        return text

    def to_instance(self) -> Instance:
        """
        Raises:
            InstanceError: For duplicate ids or malformed jobs.
        """
        model = EnergyModel(parse_rational(self.psi_sigma))
        return Instance(model, tuple(record.to_job() for record in self.jobs))

    @classmethod
    def from_instance(cls, instance: Instance, name: Optional[str] = None) -> 'InstanceFile':
        return cls(
            name=name,
            psi_sigma=format_rational(instance.model.psi_sigma),
            jobs=[JobRecord.from_job(job) for job in instance.jobs],
        )


class SegmentRecord(PowerdownBaseModel):
    start: str
    end: str
    state: Literal["OFF", "IDLE", "BUSY"]
    job: Optional[str] = None

    @validator('start', 'end', mode='before')
    @classmethod
    def exact(cls, value):
        return rational_text(value)

    @root_validator()
    def busy_has_job(self):
        if (self.state == "BUSY") != (self.job is not None):
            raise ValueError('a segment names a job exactly when it is BUSY')
        return self


class TurnOnRecord(PowerdownBaseModel):
    machine: int = Field(ge=0, le=1)
    t: str

    @validator('t', mode='before')
    @classmethod
    def exact(cls, value):
        return rational_text(value)


class TraceFile(PowerdownBaseModel):
    """
    Trace file: per-machine segment lists, the turn-on events and the energy.
    """

    policy: Optional[str] = None
    machines: List[List[SegmentRecord]] = Field(min_length=2, max_length=2)
    turn_ons: List[TurnOnRecord] = Field(default_factory=list)
    energy: Optional[str] = None

    @validator('energy', mode='before')
    @classmethod
    def exact(cls, value):
        return None if value is None else rational_text(value)

    @classmethod
    def from_trace(cls, trace: Trace, energy: Optional[Fraction] = None, policy: Optional[str] = None) -> 'TraceFile':
        machines = [
            [
                SegmentRecord(
                    start=format_rational(seg.start),
                    end=format_rational(seg.end),
                    state=seg.state.value,
                    job=seg.job,
                )
                for seg in timeline
            ]
            for timeline in trace.machines
        ]
        turn_ons = [TurnOnRecord(machine=on.machine, t=format_rational(on.t)) for on in trace.turn_ons]
        return cls(policy=policy, machines=machines, turn_ons=turn_ons, energy=_text(energy))

    def to_trace(self) -> Trace:
        machines = tuple(
            tuple(
                Segment(parse_rational(s.start), parse_rational(s.end), State(s.state), s.job)
                for s in timeline
            )
            for timeline in self.machines
        )
        turn_ons = tuple(TurnOn(on.machine, parse_rational(on.t)) for on in self.turn_ons)
        return Trace(machines=machines, turn_ons=turn_ons)


class PhaseRecord(PowerdownBaseModel):
    t0: str
    t1: str
    te: str
    kind: Literal["SINGLE", "DUAL", "SPECIAL"]
    virtual: bool = False
    A: str
    O: str  # noqa: E741
    O_f: str
    O_n: str
    alpha: str
    lam: str
    delta: str
    theta: str
    opt_on_at_end: bool
    lemma3_ineq2: bool
    lemma3_ineq3: bool
    claim1: Optional[bool] = None

    @classmethod
    def from_phase_report(cls, report: PhaseReport) -> 'PhaseRecord':
        phase, account = report.phase, report.account
        return cls(
            t0=format_rational(phase.t0),
            t1=format_rational(phase.t1),
            te=format_rational(phase.te),
            kind=phase.kind.value,
            virtual=phase.virtual,
            A=format_rational(account.A),
            O=format_rational(account.O),
            O_f=format_rational(account.O_f),
            O_n=format_rational(account.O_n),
            alpha=format_rational(account.alpha),
            lam=format_rational(account.lam),
            delta=format_rational(account.delta),
            theta=format_rational(account.theta),
            opt_on_at_end=account.opt_on_at_end,
            lemma3_ineq2=report.lemma3.ineq2,
            lemma3_ineq3=report.lemma3.ineq3,
            claim1=report.claim1,
        )


class MarginRecord(PowerdownBaseModel):
    margin: str
    required: str


class ReportFile(PowerdownBaseModel):
    """
    Competitive report of one run: energies, ratio and the per-phase accounts.
    """

    instance: Optional[str] = None
    policy: str
    alg_energy: str
    opt_energy: str
    ratio: Optional[str] = None
    phases: List[PhaseRecord] = Field(default_factory=list)
    lemma4_margins: List[MarginRecord] = Field(default_factory=list)
    worst_margin: Optional[str] = None

    @classmethod
    def from_report(cls, report: CompetitiveReport, policy: str, instance: Optional[str] = None) -> 'ReportFile':
        return cls(
            instance=instance,
            policy=policy,
            alg_energy=format_rational(report.alg_energy),
            opt_energy=format_rational(report.opt_energy),
            ratio=_text(report.ratio),
            phases=[PhaseRecord.from_phase_report(p) for p in report.phases],
            lemma4_margins=[
                MarginRecord(margin=format_rational(m), required=format_rational(r))
                for m, r in report.lemma4_margins
            ],
            worst_margin=_text(report.worst_margin),
        )

    def csv_row(self) -> Dict[str, Any]:
        """Flat row for aggregation; floats only appear here."""
        return {
            "instance": self.instance or "",
            "policy": self.policy,
            "alg_energy": float(parse_rational(self.alg_energy)),
            "opt_energy": float(parse_rational(self.opt_energy)),
            "ratio": "" if self.ratio is None else float(parse_rational(self.ratio)),
            "worst_margin": "" if self.worst_margin is None else float(parse_rational(self.worst_margin)),
        }


class StageRecord(PowerdownBaseModel):
    label: str
    ratio: str


class TranscriptFile(PowerdownBaseModel):
    """
    Adversary transcript: the case taken, the observed reactions, the emitted
    jobs and the energies of both sides.
    """

    version: int = FORMAT_VERSION
    policy: str
    case: str
    observations: Dict[str, str] = Field(default_factory=dict)
    jobs: List[JobRecord] = Field(default_factory=list)
    alg_energy: Optional[str] = None
    opt_energy: Optional[str] = None
    ratio: Optional[str] = None
    stages: List[StageRecord] = Field(default_factory=list)
    retries: int = Field(0, ge=0)
    stopped_early: bool = False
    w1_exceeds_one: bool = False
    deadline_miss: Optional[str] = None

    @classmethod
    def from_transcript(cls, transcript, policy: str) -> 'TranscriptFile':
        return cls(
            policy=policy,
            case=transcript.case,
            observations={k: format_rational(v) for k, v in transcript.observations.items()},
            jobs=[JobRecord.from_job(job) for job in transcript.jobs],
            alg_energy=_text(transcript.alg_energy),
            opt_energy=_text(transcript.opt_energy),
            ratio=_text(transcript.ratio),
            stages=[StageRecord(label=label, ratio=format_rational(r)) for label, r in transcript.stages],
            retries=transcript.retries,
            stopped_early=transcript.stopped_early,
            w1_exceeds_one=transcript.w1_exceeds_one,
            deadline_miss=transcript.deadline_miss,
        )


__all__ = [
    'FORMAT_VERSION',
    'PowerdownBaseModel',
    'Field',
    'ValidationError',
    'JobRecord',
    'InstanceFile',
    'SegmentRecord',
    'TurnOnRecord',
    'TraceFile',
    'PhaseRecord',
    'MarginRecord',
    'ReportFile',
    'StageRecord',
    'TranscriptFile',
]
