"""Exception hierarchy.

``ConfigError`` and ``DataError`` map to distinct CLI exit codes (2 and 3).
"""


class FraudNetError(Exception):
    """Base class for all package errors."""


class ConfigError(FraudNetError):
    """Invalid configuration or arguments."""


class DataError(FraudNetError):
    """Input data violates a contract."""


class EmptyInput(DataError):
    pass


class NonPositiveWeight(DataError):
    def __init__(self, row, weight):
        super().__init__(f"row {row}: edge weight must be > 0, got {weight!r}")
        self.row = row
        self.weight = weight


class ConflictingPartyKind(DataError):
    def __init__(self, party_id, first, second):
        super().__init__(f"party {party_id!r} seen as both {first} and {second}")
        self.party_id = party_id


class UnknownNode(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnsupportedOrder(DataError, ValueError):
    pass


class CorruptFile(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class TooLarge(DataError):
    pass


class SingularSystem(DataError):
    pass


class UnknownClaimId(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DegenerateClass(DataError):
    pass


class DegenerateFold(DataError):
    pass


class DegenerateTarget(DataError):
    pass


class TooFewMinority(DataError):
    pass


class SingleClass(DataError, ValueError):
    pass


class LeakageError(DataError):
    pass


class InfeasibleConfig(ConfigError):
    pass


class NoLabeledClaims(DataError):
    pass


class CutoffOutOfRange(ConfigError):
    pass
