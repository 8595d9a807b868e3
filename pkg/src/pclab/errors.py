"""Exception hierarchy shared by every pclab module."""


class PclabError(Exception):
    """Base class for all library errors."""


class EmptySet(PclabError, ValueError):
    pass


class EmptyIntersection(PclabError, ValueError):
    pass


class NotOnSigma(PclabError, ValueError):
    pass


class WouldDisconnectAll(PclabError, ValueError):
    pass


class Disconnected(PclabError, ValueError):
    pass


class GlueOutsideDomain(PclabError, ValueError):
    pass


class MeshFailure(PclabError, RuntimeError):
    pass


class SolverStalled(PclabError, RuntimeError):
    """Nonlinear solve did not reach its tolerance.

    ``residual`` holds the last measured relative residual.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NotACertificate(PclabError, ValueError):
    pass


class NoFeasibleMove(PclabError, RuntimeError):
    pass


class NotAdmissible(PclabError, ValueError):
    pass


class NotAChordConfiguration(PclabError, ValueError):
    pass


class ConfigError(PclabError, ValueError):
    pass
