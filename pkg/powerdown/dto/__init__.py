"""
powerdown file formats - Pydantic models for instances, traces, reports and
adversary transcripts.

Every time and energy value travels as exact rational text ("p/q" or a
decimal string) and is parsed into a Fraction on load.
"""

from .models import (
    Field,
    InstanceFile,
    JobRecord,
    MarginRecord,
    PhaseRecord,
    PowerdownBaseModel,
    ReportFile,
    SegmentRecord,
    StageRecord,
    TraceFile,
    TranscriptFile,
    TurnOnRecord,
    ValidationError,
)
from .validators import rational_text, root_validator, validator

__all__ = [
    'PowerdownBaseModel',
    'Field',
    'ValidationError',
    'validator',
    'root_validator',
    'rational_text',
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
