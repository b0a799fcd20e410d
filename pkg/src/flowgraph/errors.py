"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: configuration and schema problems exit
with 1, data problems (rows that cannot be parsed, unsorted input) exit
with 2. Library callers can catch them separately.
"""

from __future__ import annotations


class ConfigError(Exception):
    """Invalid configuration: bad flag value, unknown key, malformed config file."""


class SchemaError(ConfigError):
    """A schema or aggregation spec is inconsistent or names a missing column."""


class DataError(Exception):
    """Input rows that cannot be processed (unparseable fields, unsorted timestamps)."""
