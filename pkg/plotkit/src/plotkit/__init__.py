"""Read-only figure renderer for vsrd simulation CSVs."""

__version__ = "0.1.0"


class SchemaError(Exception):
    """A CSV file does not match the declared snapshot schema."""
