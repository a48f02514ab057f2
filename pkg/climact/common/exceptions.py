class ClimactError(Exception):
    pass


class ValidationError(ClimactError, ValueError):
    """Raised on schema, dimension or domain violations of the inputs."""
    def __init__(self, message, path=None, line=None, user_id=None):
        self.path = path
        self.line = line
        self.user_id = user_id
        context = []
        if path is not None:
            context.append(str(path))
        if line is not None:
            context.append("line {}".format(line))
        if user_id is not None:
            context.append("user {}".format(user_id))
        if context:
            message = "{} ({})".format(message, ", ".join(context))
        super(ValidationError, self).__init__(message)


class InferenceError(ClimactError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or []
        if self.diagnostics:
            message = message + "\n" + "\n".join("  " + str(d) for d in self.diagnostics)
        super(InferenceError, self).__init__(message)


class NonFiniteGradientError(InferenceError):
    def __init__(self, index, name=None):
        self.index = index
        self.name = name
        where = "coordinate {}".format(index) if name is None else "coordinate {} ({})".format(index, name)
        super(NonFiniteGradientError, self).__init__("non-finite ELBO gradient at " + where)
