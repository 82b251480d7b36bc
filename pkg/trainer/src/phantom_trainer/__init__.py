"""Toy-scale trainer that consumes the HYBA batch-stream protocol.

Training data arrives exclusively over the byte stream (file, pipe, or
TCP); validation images are read from a manifest of original, unchanged
files. Outputs are loss and prediction CSVs shaped for the pipeline
CLI's plot-loss and evaluate subcommands.
"""

from .protocol import Frame, Header, ProtocolError, StreamReader
from .replicate import SummaryStat, replicate_suite, ttest_args
from .train import LossCurve, TrainConfig, TrainResult, train

__version__ = "0.1.0"
