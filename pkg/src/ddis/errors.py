"""Exception types raised by the toolkit."""


class InputError(ValueError):
    """Invalid argument or inconsistent input data."""


class FormatError(InputError):
    """A file does not follow its declared binary format."""


class BadMagicError(FormatError):
    pass


class HeaderError(FormatError):
    """Malformed header, or a header declaring non-positive dimensions."""


class TruncatedError(FormatError):
    """Payload shorter (or longer) than the header promises."""


class SizeGuardError(InputError):
    """Refusal to run a computation whose cost exceeds a configured guard."""
