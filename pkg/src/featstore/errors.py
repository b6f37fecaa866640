"""Error taxonomy shared by every featstore module.

Each error class doubles as a stable machine code (``.code``) used by the
HTTP layer and the CLI, and carries the HTTP status the service maps it to.
"""


class FeatStoreError(Exception):
    """Base class for all featstore errors."""

    http_status = 400

    @property
    def code(self) -> str:
        return type(self).__name__


# --- storage ---------------------------------------------------------------

class DuplicateDatabase(FeatStoreError):
    http_status = 409


class UnknownDatabase(FeatStoreError):
    http_status = 404


class DuplicateTable(FeatStoreError):
    http_status = 409


class UnknownTable(FeatStoreError):
    http_status = 404


class TableInUse(FeatStoreError):
    http_status = 409


class InvalidSchema(FeatStoreError):
    pass


class TypeMismatch(FeatStoreError):
    pass


class NullViolation(FeatStoreError):
    pass


class MissingIndexKey(FeatStoreError):
    pass


class UnknownIndex(FeatStoreError):
    pass


class IndexOutOfRange(FeatStoreError):
    pass


class CorruptRow(FeatStoreError):
    pass


# --- sql front end ----------------------------------------------------------

class SqlSyntaxError(FeatStoreError):
    """Parse failure; carries a 1-based position and the expected token set."""

    def __init__(self, message, line=None, column=None, expected=()):
        super().__init__(message)
        self.line = line
        self.column = column
        self.expected = tuple(expected)


class UnknownColumn(FeatStoreError):
    pass


class SqlTypeError(FeatStoreError):
    pass


class NoMatchingIndex(FeatStoreError):
    pass


class CyclicDag(FeatStoreError):
    pass


class MultipleSinks(FeatStoreError):
    pass


class ArityMismatch(FeatStoreError):
    pass


# --- executors ---------------------------------------------------------------

class SchemaMismatch(FeatStoreError):
    pass


class MissingDataset(FeatStoreError):
    http_status = 404


# --- pre-aggregation ---------------------------------------------------------

class NonDecomposableAggregate(FeatStoreError):
    pass


class UnknownSpec(FeatStoreError):
    http_status = 404


# --- feature views / deployments ---------------------------------------------

class DuplicateView(FeatStoreError):
    http_status = 409


class UnknownView(FeatStoreError):
    http_status = 404


class UnknownFeature(FeatStoreError):
    http_status = 404


class DuplicateVersion(FeatStoreError):
    http_status = 409


class IncompatibleViews(FeatStoreError):
    pass


class UnknownDeployment(FeatStoreError):
    http_status = 404


# --- consistency ---------------------------------------------------------------

class DatasetStoreChecksumMismatch(FeatStoreError):
    http_status = 409


# --- ingest --------------------------------------------------------------------

class UnknownJob(FeatStoreError):
    http_status = 404


class FileNotFound(FeatStoreError):
    http_status = 404


# --- signatures ------------------------------------------------------------------

class RoleTypeMismatch(FeatStoreError):
    pass


# --- service ----------------------------------------------------------------------

class BindFailure(FeatStoreError):
    http_status = 500
