"""attrikit: attribute annotation workflow for road-scene vision datasets.

Provides a canonical interchange format for per-image agent records,
dataset ingestion, annotation work allocation with a shared control pool,
a networked annotation service, inter-rater agreement statistics and
attribute distribution reports.
"""

__version__ = "0.1.0"
