"""Exception hierarchy shared across the engine."""


class MicropassError(Exception):
    """Base class for all errors raised by this package."""


class TreeError(MicropassError):
    """Filesystem tree cannot be loaded or written."""


class ParseError(MicropassError):
    """Macro source does not parse."""

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
                if column is not None:
                    where += f"{column}:"
            where += " "
        super().__init__(where + message)


class ExpansionError(MicropassError):
    """Macro expansion failed (unbound name, bad include, ...)."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(prefix + message)


class UnsafeMacroError(MicropassError):
    """A macro unit uses cross-file state beyond dependency recording."""

    def __init__(self, sites: list[tuple[str, int, int]]):
        # sites: (path, start offset, end offset), first offender first
        self.sites = sites
        path, start, end = sites[0]
        more = f" (+{len(sites) - 1} more)" if len(sites) > 1 else ""
        super().__init__(f"unsafe macro unit in {path} at bytes {start}..{end}{more}")


class AuditError(MicropassError):
    """A transformation audit failed; no output snapshot was produced."""


class PlanError(MicropassError):
    """A pipeline plan or pass definition is invalid."""


class GraphError(MicropassError):
    """A dependency-graph operation was called with invalid arguments."""


class SquashError(MicropassError):
    """Journal records cannot be squashed."""

    def __init__(self, message: str, conflicting_files: list[str] | None = None):
        self.conflicting_files = conflicting_files or []
        super().__init__(message)
