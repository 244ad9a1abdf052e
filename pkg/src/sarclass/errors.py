class DataError(ValueError):
    """Bad input data: malformed records, label/task mismatches, starvation."""


class ModelFileError(DataError):
    """A model file that cannot be loaded (checksum, version, structure)."""
