"""Python bindings for the earlydet streaming early audio-event detector."""

from ._earlydet import (
    ConfigError,
    ContractViolation,
    DetectedEvent,
    EventInterval,
    InputError,
    MissingArtifact,
    RunConfig,
    check_gradients,
    command_names,
    detect,
    extract_features,
    match_metrics,
    read_wav,
    run_command,
    segment,
    synthesize_benchmark_stream,
    write_wav,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DetectedEvent",
    "EventInterval",
    "InputError",
    "MissingArtifact",
    "RunConfig",
    "check_gradients",
    "command_names",
    "detect",
    "extract_features",
    "match_metrics",
    "read_wav",
    "run_command",
    "segment",
    "synthesize_benchmark_stream",
    "write_wav",
]
