"""Frame-to-event simulation of a DVS and a center-surround DVS."""

from csdvs.config import SimConfig
from csdvs.errors import ConfigError, CSDVSError, DataError, FitError, FormatError, SolverError
from csdvs.pipeline import SimResult, run_pipeline
from csdvs.stimgen import StimulusSpec, generate
from csdvs.videoio import EventStream, FrameSequence, load_frames, read_events, write_events

__version__ = "0.1.0"

__all__ = [
    "SimConfig", "SimResult", "run_pipeline", "StimulusSpec", "generate",
    "EventStream", "FrameSequence", "load_frames", "read_events", "write_events",
    "CSDVSError", "ConfigError", "DataError", "FitError", "FormatError", "SolverError",
]
