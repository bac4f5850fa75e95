"""pemsim: a 2D driving micro-simulator with trainable perception error
models, planners and an evaluation metric suite."""

__version__ = "0.1.0"
