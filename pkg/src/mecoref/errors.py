"""Exception hierarchy shared by every module.

Anything derived from :class:`InputError` is a problem with the data handed
to the toolkit; the CLI maps those to exit code 1.
"""


class MecError(Exception):
    """Base class for all toolkit errors."""


class InputError(MecError):
    """Bad user-supplied data (files, shapes, ids)."""


class UnknownVerb(InputError, KeyError):
    def __init__(self, verb):
        super().__init__(verb)
        self.verb = verb

    def __str__(self):
        return f"unknown verb sense: {self.verb!r}"


class ParseError(InputError):
    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = f"{path}: " if path else ""
        at = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"{where}{message}{at}")


class SchemaError(InputError):
    def __init__(self, message, field=None, video_id=None, path=None):
        self.field = field
        self.video_id = video_id
        self.path = path
        bits = []
        if path:
            bits.append(str(path))
        if video_id is not None:
            bits.append(f"video {video_id}")
        if field:
            bits.append(f"field {field}")
        prefix = ", ".join(bits)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class FormatError(InputError):
    pass


class TruncationError(FormatError):
    pass


class NonFiniteTensor(InputError, ValueError):
    """A tensor payload contains NaN or infinity."""


class ConsistencyError(InputError):
    def __init__(self, message, expected=None, found=None, video_id=None):
        self.expected = expected
        self.found = found
        self.video_id = video_id
        detail = ""
        if expected is not None or found is not None:
            detail = f" (expected {expected}, found {found})"
        vid = f"video {video_id}: " if video_id is not None else ""
        super().__init__(f"{vid}{message}{detail}")


class DegenerateEmbedding(InputError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"embedding row {row} has zero norm")


class DegenerateCluster(InputError):
    pass


class DomainError(InputError):
    def __init__(self, extra, missing):
        self.extra = sorted(extra)
        self.missing = sorted(missing)
        super().__init__(
            f"role-slot universes differ: extra in pred {self.extra}, missing from pred {self.missing}"
        )


class IoError(InputError, OSError):
    pass
