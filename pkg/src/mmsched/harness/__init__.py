from .config import PRESETS, ConfigError, ExperimentConfig, load_config
from .experiments import (RunSummary, TrainingDiverged, bench_timing, build_trace, compare, evaluate,
                          run_scheduler, train)

__all__ = ["PRESETS", "ConfigError", "ExperimentConfig", "RunSummary", "TrainingDiverged", "bench_timing",
           "build_trace", "compare", "evaluate", "load_config", "run_scheduler", "train"]
