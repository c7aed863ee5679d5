"""Core binary-code types, Hamming-space primitives, and packed file formats.

Codewords live in {-1,+1}^q.  On disk a codeword is bit-packed MSB-first:
bit j goes to byte j//8 at bit position 7-(j%8), with 1 for +1 and 0 for -1;
trailing pad bits are zero.  Header integers are unsigned 32-bit
little-endian.  All types are immutable after construction and safe to
share across threads.
"""

import struct
from contextlib import contextmanager

import numpy as np

__all__ = [
    "ShcError",
    "DimensionMismatchError",
    "ValidationError",
    "FormatError",
    "DegenerateInputError",
    "MissingClassError",
    "InfeasibleError",
    "BinaryCode",
    "CenterSet",
    "SimilarityMatrix",
    "CodeDatabase",
    "hamming_distance",
    "inner_product",
    "pack_code_rows",
    "unpack_code_rows",
    "write_centers",
    "read_centers",
    "write_codes",
    "read_codes",
]

CENTERS_MAGIC = b"SHC1"
CODES_MAGIC = b"SHCD"

_U32X2 = struct.Struct("<II")


class ShcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(ShcError):
    """Operands have incompatible shapes or code lengths."""


class ValidationError(ShcError):
    """A value violates a type invariant or declared range."""


class FormatError(ShcError):
    """A byte or text stream is not a well-formed file of the expected kind."""


class DegenerateInputError(ShcError):
    """Structurally valid input for which the operation has no meaningful result."""


class MissingClassError(ShcError):
    """One or more class ids have no records."""

    def __init__(self, missing):
        self.missing = sorted(int(m) for m in missing)
        super().__init__(f"no records for classes: {self.missing}")


class InfeasibleError(ShcError):
    """The requested configuration admits no solution (e.g. C > 2^q)."""


def _pm1_array(values, ndim, what):
    """Validate a {-1,+1} array and return it as read-only int8."""
    arr = np.asarray(values)
    if arr.ndim != ndim:
        raise ValidationError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (-1, 1)).all():
        raise ValidationError(f"{what} entries must be exactly -1 or +1")
    out = arr.astype(np.int8)
    out.flags.writeable = False
    return out


class BinaryCode:
    """A single immutable codeword in {-1,+1}^q."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        arr = _pm1_array(bits, 1, "code")
        if arr.size == 0:
            raise ValidationError("code length must be at least 1")
        self.bits = arr

    @property
    def q(self) -> int:
        return int(self.bits.size)

    def __len__(self) -> int:
        return self.q

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __repr__(self) -> str:
        return "BinaryCode({!r})".format("".join("+" if b > 0 else "-" for b in self.bits))


class CenterSet:
    """C codewords of common length q; row i is the center of class id i."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        arr = _pm1_array(matrix, 2, "center matrix")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"center matrix must be at least 1x1, got shape {arr.shape}")
        self.matrix = arr

    @classmethod
    def from_codes(cls, codes) -> "CenterSet":
        codes = list(codes)
        if not codes:
            raise ValidationError("center set needs at least one code")
        q = codes[0].q
        if any(c.q != q for c in codes):
            raise DimensionMismatchError("all centers must share the same code length")
        return cls(np.stack([c.bits for c in codes]))

    @property
    def C(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def q(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return self.C

    def __getitem__(self, i) -> BinaryCode:
        return BinaryCode(self.matrix[i])

    def __iter__(self):
        for row in self.matrix:
            yield BinaryCode(row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CenterSet):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self) -> int:
        return hash((self.matrix.shape, self.matrix.tobytes()))

    def __repr__(self) -> str:
        return f"CenterSet(C={self.C}, q={self.q})"


class SimilarityMatrix:
    """Symmetric C x C matrix of inter-class similarities in [-1, 1], unit diagonal.

    The constructor enforces the invariants exactly; use :meth:`snap` to
    build one from nearly-symmetric data (e.g. a parsed file) with a
    tolerance.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"similarity matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValidationError("similarity matrix needs at least one class")
        if not np.isfinite(arr).all():
            raise ValidationError("similarity entries must be finite")
        if not np.array_equal(arr, arr.T):
            raise ValidationError("similarity matrix must be exactly symmetric")
        if not (np.diag(arr) == 1.0).all():
            raise ValidationError("similarity diagonal must equal 1 exactly")
        if np.abs(arr).max() > 1.0:
            raise ValidationError("similarity entries must lie in [-1, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        self.values = arr

    @classmethod
    def snap(cls, values, tol: float = 1e-9) -> "SimilarityMatrix":
        """Validate near-symmetry/diagonal within ``tol``, then snap exactly."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"similarity matrix must be square, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("similarity entries must be finite")
        asym = np.abs(arr - arr.T).max() if arr.size else 0.0
        if asym > tol:
            raise ValidationError(f"similarity matrix asymmetry {asym:g} exceeds tolerance {tol:g}")
        diag_dev = np.abs(np.diag(arr) - 1.0).max()
        if diag_dev > tol:
            raise ValidationError(f"similarity diagonal deviates from 1 by {diag_dev:g} (> {tol:g})")
        overflow = max(0.0, float(np.abs(arr).max()) - 1.0)
        if overflow > tol:
            raise ValidationError(f"similarity entries exceed [-1, 1] by {overflow:g} (> {tol:g})")
        snapped = (arr + arr.T) / 2.0
        np.clip(snapped, -1.0, 1.0, out=snapped)
        np.fill_diagonal(snapped, 1.0)
        return cls(snapped)

    @property
    def C(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimilarityMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.C, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"SimilarityMatrix(C={self.C})"


class CodeDatabase:
    """N labeled binary codes of common length q."""

    __slots__ = ("labels", "codes")

    def __init__(self, labels, codes):
        code_arr = np.asarray(codes)
        if code_arr.ndim != 2:
            raise ValidationError(f"codes must be 2-dimensional, got shape {code_arr.shape}")
        if code_arr.shape[1] < 1:
            raise ValidationError("code length must be at least 1")
        code_arr = _pm1_array(code_arr, 2, "codes")
        label_arr = np.asarray(labels)
        if label_arr.ndim != 1:
            raise ValidationError("labels must be 1-dimensional")
        if label_arr.shape[0] != code_arr.shape[0]:
            raise DimensionMismatchError(
                f"{label_arr.shape[0]} labels for {code_arr.shape[0]} codes"
            )
        if label_arr.size and (not np.issubdtype(label_arr.dtype, np.integer) or label_arr.min() < 0):
            raise ValidationError("labels must be nonnegative integers")
        label_arr = label_arr.astype(np.int64)
        label_arr.flags.writeable = False
        self.labels = label_arr
        self.codes = code_arr

    @property
    def q(self) -> int:
        return int(self.codes.shape[1])

    def __len__(self) -> int:
        return int(self.codes.shape[0])

    def validate_labels(self, class_count: int) -> None:
        if len(self) and int(self.labels.max()) >= class_count:
            raise ValidationError(
                f"label {int(self.labels.max())} out of range for {class_count} classes"
            )

    def record(self, i) -> tuple[int, BinaryCode]:
        return int(self.labels[i]), BinaryCode(self.codes[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeDatabase):
            return NotImplemented
        return (
            self.q == other.q
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.codes, other.codes)
        )

    def __hash__(self) -> int:
        return hash((self.q, self.labels.tobytes(), self.codes.tobytes()))

    def __repr__(self) -> str:
        return f"CodeDatabase(N={len(self)}, q={self.q})"


def _check_same_length(a: BinaryCode, b: BinaryCode) -> None:
    if a.q != b.q:
        raise DimensionMismatchError(f"code lengths differ: {a.q} vs {b.q}")


def hamming_distance(a: BinaryCode, b: BinaryCode) -> int:
    """Number of positions where two equal-length codes differ."""
    _check_same_length(a, b)
    return int(np.count_nonzero(a.bits != b.bits))


def inner_product(a: BinaryCode, b: BinaryCode) -> int:
    """Integer inner product of two equal-length codes; in [-q, q]."""
    _check_same_length(a, b)
    return int(a.bits.astype(np.int64) @ b.bits)


def pack_code_rows(matrix) -> np.ndarray:
    """Pack (N, q) rows of {-1,+1} into (N, ceil(q/8)) bytes, MSB-first."""
    arr = np.asarray(matrix)
    return np.packbits((arr > 0).astype(np.uint8), axis=1)


def unpack_code_rows(packed, q: int) -> np.ndarray:
    """Inverse of :func:`pack_code_rows`; returns int8 rows of {-1,+1}."""
    bits = np.unpackbits(np.asarray(packed, dtype=np.uint8), axis=1)[:, :q]
    return (bits.astype(np.int8) * 2) - 1


@contextmanager
def _binary_stream(f, mode):
    if hasattr(f, "read" if mode == "rb" else "write"):
        yield f
    else:
        with open(f, mode) as fh:
            yield fh


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated stream while reading {what}")
    return data


def write_centers(centers: CenterSet, sink) -> None:
    """Write a center set: magic ``SHC1`` | u32 C | u32 q | C packed rows."""
    with _binary_stream(sink, "wb") as fh:
        fh.write(CENTERS_MAGIC)
        fh.write(_U32X2.pack(centers.C, centers.q))
        fh.write(pack_code_rows(centers.matrix).tobytes())


def read_centers(source) -> CenterSet:
    """Read a center set written by :func:`write_centers`."""
    with _binary_stream(source, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CENTERS_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CENTERS_MAGIC!r}")
        C, q = _U32X2.unpack(_read_exact(fh, 8, "header"))
        if C == 0 or q == 0:
            raise FormatError(f"invalid header: C={C}, q={q}")
        row_bytes = (q + 7) // 8
        payload = _read_exact(fh, C * row_bytes, "center payload")
        packed = np.frombuffer(payload, dtype=np.uint8).reshape(C, row_bytes)
        return CenterSet(unpack_code_rows(packed, q))


def write_codes(db: CodeDatabase, sink) -> None:
    """Write a code database: magic ``SHCD`` | u32 N | u32 q | N records.

    Each record is u32 label followed by the packed code row.
    """
    with _binary_stream(sink, "wb") as fh:
        fh.write(CODES_MAGIC)
        fh.write(_U32X2.pack(len(db), db.q))
        row_bytes = (db.q + 7) // 8
        records = np.zeros(len(db), dtype=[("label", "<u4"), ("code", "u1", (row_bytes,))])
        records["label"] = db.labels
        records["code"] = pack_code_rows(db.codes)
        fh.write(records.tobytes())


def read_codes(source, classes: int | None = None) -> CodeDatabase:
    """Read a code database; with ``classes`` given, validate the label range."""
    with _binary_stream(source, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CODES_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CODES_MAGIC!r}")
        N, q = _U32X2.unpack(_read_exact(fh, 8, "header"))
        if q == 0:
            raise FormatError("invalid header: q=0")
        row_bytes = (q + 7) // 8
        payload = _read_exact(fh, N * (4 + row_bytes), "code records")
        records = np.frombuffer(payload, dtype=[("label", "<u4"), ("code", "u1", (row_bytes,))])
        if N:
            codes = unpack_code_rows(records["code"], q)
            labels = records["label"].astype(np.int64)
        else:
            codes = np.zeros((0, q), dtype=np.int8)
            labels = np.zeros(0, dtype=np.int64)
        db = CodeDatabase(labels, codes)
        if classes is not None:
            db.validate_labels(classes)
        return db
