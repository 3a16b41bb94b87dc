"""Exception hierarchy shared by the pipeline stages.

Each class carries the process exit code the command line front end maps it to.
"""


class CrashcovError(Exception):
    exit_code = 4


class InputError(CrashcovError, ValueError):
    """Bad input data or configuration (exit code 2)."""

    exit_code = 2


class ConfigError(InputError):
    pass


class IncidentParseError(InputError):
    def __init__(self, incident_id, message):
        super().__init__(f"{incident_id}: {message}")
        self.incident_id = incident_id


class IncidentStructureError(InputError):
    def __init__(self, incident_id, message, field=None):
        super().__init__(f"{incident_id}: {message}")
        self.incident_id = incident_id
        self.field = field


class CorpusError(InputError):
    pass


class CoverageParseError(InputError):
    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class CoverageStructureError(InputError):
    pass


class OverrideError(InputError):
    def __init__(self, rows):
        lines = "\n".join(f"  line {lineno}: {row}" for lineno, row in rows)
        super().__init__(f"override rows reference unknown paths:\n{lines}")
        self.rows = rows


class EmptyScopeError(CrashcovError):
    exit_code = 3


class InvariantError(CrashcovError):
    exit_code = 4
