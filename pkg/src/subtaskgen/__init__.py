"""Synthesis of subtask progressions for block-based programming tasks."""

from .dsl import Code, parse, serialize
from .metrics import KAPPA, code_complexity, max_jump, normalized_diversity, progression_complexity
from .progression import (
    Progression,
    SynthesisConfig,
    SynthesisError,
    same_code,
    same_taskcode,
    synthesize,
    synthesize_grids,
    synthesize_single,
)
from .world import Grid, Task

__version__ = "0.1.0"
