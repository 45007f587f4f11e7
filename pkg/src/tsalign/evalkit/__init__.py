"""Evaluation kit: answer parsers, metrics, perfect tools and the benchmark runner."""

from .bench import (
    COLUMNS,
    EndpointModel,
    EvalReport,
    ModelUnderTest,
    PoolEchoOracle,
    ScoreRow,
    render_prompt,
    run_benchmark,
    score_answer,
    score_record,
)
from .metrics import (
    choice_accuracy,
    f1,
    keyword_score,
    pair_f1,
    parse_categorical,
    parse_choice,
    parse_number,
    parse_partition,
    relative_accuracy,
)
from .tools import TOOL_KINDS, ToolAnswer, ToolAnswerer, ToolQuery, perfect_tool, tool_answerer

__all__ = [
    "COLUMNS", "EndpointModel", "EvalReport", "ModelUnderTest", "PoolEchoOracle", "ScoreRow",
    "TOOL_KINDS", "ToolAnswer", "ToolAnswerer", "ToolQuery", "choice_accuracy", "f1",
    "keyword_score", "pair_f1", "parse_categorical", "parse_choice", "parse_number",
    "parse_partition", "perfect_tool", "relative_accuracy", "render_prompt", "run_benchmark",
    "score_answer", "score_record", "tool_answerer",
]
