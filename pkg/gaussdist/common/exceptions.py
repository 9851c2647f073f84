class GaussDistError(Exception):
    pass


class InvalidInputError(GaussDistError, ValueError):
    pass


class PreconditionError(GaussDistError, ValueError):
    pass


class InternalError(GaussDistError, RuntimeError):
    pass
