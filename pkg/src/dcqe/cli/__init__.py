"""Command-line harness: configs, stream files, reports."""

from .config import ConfigError, ScenarioConfig, config_from_dict, config_hash, list_presets, load_preset, parse_scenario
from .main import analyze, main, simulate
from .report import AnalysisReport, analyze_stream
from .streams import StreamFormatError, StreamHeader, read_stream, write_stream

__all__ = [
    "AnalysisReport",
    "ConfigError",
    "ScenarioConfig",
    "StreamFormatError",
    "StreamHeader",
    "analyze",
    "analyze_stream",
    "config_from_dict",
    "config_hash",
    "list_presets",
    "load_preset",
    "main",
    "parse_scenario",
    "read_stream",
    "simulate",
    "write_stream",
]
