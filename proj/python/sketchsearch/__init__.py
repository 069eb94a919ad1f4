"""Human-assisted dynamic target search: POMCP planning with sketch-driven model updates."""

from ._core import (
    PROTOCOL_VERSION,
    ConfigError,
    ProtocolError,
    Session,
    SketchSearchError,
    binomial_test,
    binomial_test_two_sided,
    build_sketch,
    class_probability,
    default_config,
    default_map,
    pseud_generate,
    replay_log,
    run_batch,
    run_episode,
)

__all__ = [
    "PROTOCOL_VERSION",
    "ConfigError",
    "ProtocolError",
    "Session",
    "SketchSearchError",
    "binomial_test",
    "binomial_test_two_sided",
    "build_sketch",
    "class_probability",
    "default_config",
    "default_map",
    "pseud_generate",
    "replay_log",
    "run_batch",
    "run_episode",
]
