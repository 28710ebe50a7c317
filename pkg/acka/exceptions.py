class ParamsValueError(ValueError):
    """Exception raised when a protocol parameter violates its invariant."""


class DomainError(ValueError):
    """Exception raised when a numeric argument is outside its domain."""


class PartyIdError(LookupError):
    """Exception raised for an unknown party or a send to oneself."""


class BroadcastOrderError(RuntimeError):
    """Exception raised when a broadcast breaks the declared order."""


class HashLengthError(ValueError):
    """Exception raised when the hash input length does not match the
    family index."""


class OracleSizeError(ValueError):
    """Exception raised when the joint distribution oracle is asked for
    more than four parties."""


class InfeasibleSupplyError(ArithmeticError):
    """Exception raised when the Bell pairs cannot refill the private
    channels (non-positive secret bit supply)."""


class NoExtractableKeyError(ArithmeticError):
    """Exception raised when privacy amplification gets ``ell <= 0``."""


class ConfigError(ValueError):
    """Exception raised for unknown keys, bad values or unreadable files in a
    scenario configuration."""


class ChannelEmptyError(LookupError):
    """Exception raised when a party reads a private channel with no
    pending message."""
