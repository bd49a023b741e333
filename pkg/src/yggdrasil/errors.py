"""Exception hierarchy shared by the client, cloud and harness layers."""


class YggdrasilError(Exception):
    """Base class for every error raised by this package."""


class ParamsError(YggdrasilError, ValueError):
    """Invalid protocol parameters (k, n_o, n_b, tau, s_h)."""


class LengthMismatchError(YggdrasilError, ValueError):
    """Two strings that must share a length (or symbol width) do not."""


class CorruptedDeviationError(YggdrasilError):
    """A local deviation or edit script cannot be applied to its string."""


class CorruptedStoreError(YggdrasilError):
    """A persisted store or base file failed to parse."""


class UnknownIdError(YggdrasilError, KeyError):
    """The requested chunk id is not held by the store.

    The cloud raises this for queries it ignores; it is deliberately not a
    subclass of the corruption errors.
    """


class DuplicateIdError(YggdrasilError, KeyError):
    """A chunk id was submitted twice."""


class InstanceTooLargeError(YggdrasilError, ValueError):
    """An exhaustive oracle was asked to run beyond its size guard."""


class VerificationError(YggdrasilError):
    """A reconstructed chunk differs from the original."""

    def __init__(self, chunk_id, message=None):
        self.chunk_id = chunk_id
        super().__init__(message or f"reconstruction mismatch for chunk id {chunk_id}")
