"""Shared helpers for the binary artifact files."""


class FormatError(ValueError):
    """Raised on magic/version mismatch or truncated binary files."""


def read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError("truncated file: expected %d bytes for %s, got %d" % (n, what, len(data)))
    return data
