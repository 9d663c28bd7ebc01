"""Exception hierarchy shared by all modules."""


class SMCFError(Exception):
    """Base class for every error raised by the package."""


class GridError(SMCFError):
    pass


class NonFinite(SMCFError):
    pass


class RankDeficient(SMCFError):
    pass


class FrameMismatch(SMCFError):
    pass


class NotNormal(SMCFError):
    pass


class SeedNotNormal(SMCFError):
    pass


class NotTransversal(SMCFError):
    pass


class NonInteger(SMCFError):
    pass


class Obstructed(SMCFError):
    pass


class Degenerate(SMCFError):
    pass


class Unstable(SMCFError):
    pass


class InsufficientSamples(SMCFError):
    pass


class NotDiffeomorphism(SMCFError):
    pass


class ConfigError(SMCFError):
    pass


class CapExceeded(SMCFError):
    pass


class FamilyTooShort(SMCFError):
    pass


class BadDelta(SMCFError):
    pass


class NoNearestPoint(SMCFError):
    pass


class NotGraphLike(SMCFError):
    pass


class ParseError(SMCFError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class ValidationError(SMCFError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class UnknownGenerator(SMCFError):
    pass


class ExperimentFailed(SMCFError):
    """An experiment aborted; the message names the affected criteria."""
