"""Cost-sensitive portfolio selection: exact-cost backtests, classical baselines,
and a two-stream policy network trained by direct policy gradient."""

__version__ = "0.1.0"
