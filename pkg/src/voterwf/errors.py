"""Exception hierarchy shared by all modules."""


class VoterWFError(Exception):
    """Base class for every error raised by this package."""


class KernelError(VoterWFError):
    pass


class NotIrreducible(KernelError):
    pass


class NegativeRate(KernelError):
    pass


class BadIndex(KernelError):
    pass


class Disconnected(KernelError):
    pass


class ZeroDegree(KernelError):
    pass


class AsymmetricAdjacency(KernelError):
    pass


class SingularSystem(VoterWFError):
    pass


class BadParam(VoterWFError, ValueError):
    pass


class TooLarge(VoterWFError):
    pass


class PersistentlyDisconnected(VoterWFError):
    pass


class NotReversible(VoterWFError):
    pass


class ConvergenceFailure(VoterWFError):
    pass


class EmptySet(VoterWFError, ValueError):
    pass


class FullSet(VoterWFError, ValueError):
    pass


class TooLargeForExhaustive(TooLarge):
    pass


class StrategyMismatch(VoterWFError):
    pass


class AbsorbedState(VoterWFError):
    """Raised when stepping a voter configuration that is already a consensus."""


class TooFewSamples(VoterWFError, ValueError):
    pass


class TooFewPoints(VoterWFError, ValueError):
    pass


class Overflow(VoterWFError):
    pass


class ConfigError(VoterWFError):
    pass
