"""Exception hierarchy shared by all itermem modules."""


class ItermemError(Exception):
    """Base class for every error raised by itermem."""


class ExprSyntaxError(ItermemError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UndeclaredVariableError(ItermemError, ValueError):
    def __init__(self, name, offset=None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"undeclared variable {name!r}{where}")
        self.name = name
        self.offset = offset


class DomainError(ItermemError, ArithmeticError):
    """Evaluation left the domain of log or division."""


class FormError(ItermemError, ValueError):
    pass


class NotClosedError(FormError):
    pass


class BasisError(FormError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GeometryError(ItermemError, ValueError):
    pass


class QuadratureError(ItermemError, ArithmeticError):
    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class ShuffleError(ItermemError, ValueError):
    pass


class IntegrandError(ItermemError, ValueError):
    pass


class SeriesError(ItermemError, ValueError):
    pass


class DocumentError(ItermemError, ValueError):
    def __init__(self, message, location=None):
        text = message if location is None else f"{location}: {message}"
        super().__init__(text)
        self.location = location
