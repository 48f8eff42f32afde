"""Plain-text matrix files.

Layout::

    mare 1
    # comment lines may appear anywhere
    n m
    k11 k12 ... (n+m)^2 whitespace-separated entries of K, row-major

Entries are written with ``repr`` so a write/read round trip is exact.
"""

import numpy as np

from .errors import ParseError

HEADER = "mare 1"


def parse(text):
    """Parse file contents into ``(K, n, m)``."""
    lines = [
        (no, raw.strip())
        for no, raw in enumerate(text.splitlines(), start=1)
        if raw.strip() and not raw.strip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty file", 1)
    no, head = lines[0]
    if head != HEADER:
        raise ParseError(f"expected header {HEADER!r}, got {head!r}", no)
    if len(lines) < 2:
        raise ParseError("missing dimension line 'n m'", no)
    no, dims = lines[1]
    parts = dims.split()
    if len(parts) != 2:
        raise ParseError(f"dimension line must be 'n m', got {dims!r}", no)
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"dimensions must be integers, got {dims!r}", no) from None
    if n < 1 or m < 1:
        raise ParseError(f"dimensions must be >= 1, got n={n} m={m}", no)
    size = n + m
    values = []
    for no, line in lines[2:]:
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", no) from None
            if not np.isfinite(values[-1]):
                raise ParseError(f"non-finite entry {tok!r}", no)
    if len(values) != size * size:
        last = lines[-1][0]
        raise ParseError(f"expected {size * size} entries, found {len(values)}", last)
    return np.array(values).reshape(size, size), n, m


def read(path):
    with open(path) as fh:
        return parse(fh.read())


def format_matrix_file(K, n, comments=()):
    K = np.asarray(K, dtype=float)
    m = K.shape[0] - n
    out = [HEADER]
    out.extend(f"# {c}" for c in comments)
    out.append(f"{n} {m}")
    for row in K:
        out.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(out) + "\n"


def write(path, K, n, comments=()):
    with open(path, "w") as fh:
        fh.write(format_matrix_file(K, n, comments))
