"""Exception hierarchy.  Every error raised on purpose derives from
:class:`OscillonError` so the CLI can surface it verbatim."""


class OscillonError(Exception):
    pass


class InvalidPotential(OscillonError, ValueError):
    pass


class OddQ(OscillonError, ValueError):
    pass


class DegreeMismatch(OscillonError, ValueError):
    pass


class UncertifiedInput(OscillonError, ValueError):
    pass


class UnknownName(OscillonError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NonPowerOfTwo(OscillonError, ValueError):
    pass


class ArgumentOverflow(OscillonError, OverflowError):
    """Phase argument beyond the range where trig reduction stays exact."""


class CflViolation(OscillonError, ValueError):
    pass


class NonFinite(OscillonError, FloatingPointError):
    pass


class StepUnderflow(OscillonError, RuntimeError):
    pass


class TimeOrder(OscillonError, ValueError):
    pass


class ZeroEnergy(OscillonError, ValueError):
    pass


class InsufficientDecades(OscillonError, ValueError):
    pass


class DegenerateCloud(OscillonError, ValueError):
    pass


class AbsorberViolation(OscillonError, ValueError):
    pass


class ParseError(OscillonError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(OscillonError, ValueError):
    pass
