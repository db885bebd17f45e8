class IabSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(IabSimError):
    pass


class ParseError(IabSimError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class TopologyError(IabSimError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class RoutingError(IabSimError):
    pass
