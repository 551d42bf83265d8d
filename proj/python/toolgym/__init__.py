from ._core import (
    EpisodeManager,
    ToolgymError,
    astar,
    clipped_surrogate,
    extract_boxed,
    group_advantages,
    offline_breakdown,
    parse_turn,
    score_tool_call,
)

__all__ = [
    "EpisodeManager",
    "ToolgymError",
    "astar",
    "clipped_surrogate",
    "extract_boxed",
    "group_advantages",
    "offline_breakdown",
    "parse_turn",
    "score_tool_call",
]
