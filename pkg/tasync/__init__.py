"""
5G NR timing-advance based device synchronization: timing constants, TOA error
models, Monte Carlo engine, error budgets and the reference-time pipeline.
"""

__version__ = "0.3.0"
