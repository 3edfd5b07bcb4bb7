"""OFDM channel estimation: fading simulator, LS/MMSE baselines and ChannelNet."""

from ._channelnet import (
    ChannelNet,
    CorrelationModel,
    ExperimentConfig,
    PilotPattern,
    baseline,
    evaluate,
    generate,
    generate_channel_grid,
    interpolate,
    ls_estimate,
    mmse_estimate,
    oracle_correlations,
)

__all__ = [
    "ChannelNet",
    "CorrelationModel",
    "ExperimentConfig",
    "PilotPattern",
    "baseline",
    "evaluate",
    "generate",
    "generate_channel_grid",
    "interpolate",
    "ls_estimate",
    "mmse_estimate",
    "oracle_correlations",
]
