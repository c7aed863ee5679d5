"""Data-dependent class-similarity construction from classifier logits.

Pipeline: per image, softmax the logits with the image's own class masked
out; average those distributions per class; shift/scale each class row to
[-1, 1]; then symmetrize and force a unit diagonal.  A cosine variant
builds the matrix from per-class embedding vectors instead.
"""

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DegenerateInputError,
    DimensionMismatchError,
    FormatError,
    MissingClassError,
    SimilarityMatrix,
    ValidationError,
)

__all__ = [
    "MASK_GROUND_TRUTH",
    "MASK_ARGMAX",
    "LogitRecord",
    "masked_softmax",
    "class_similarity_rows",
    "normalize_row",
    "symmetrize_and_unit_diag",
    "build_similarity",
    "cosine_similarity_matrix",
    "read_logits",
    "read_embeddings",
    "read_similarity",
    "write_similarity",
]

# Which logit entry gets masked before the softmax: the record's ground-truth
# label (default; keeps per-class averages off the diagonal) or the argmax of
# its logits (the predicted class).
MASK_GROUND_TRUTH = "ground-truth"
MASK_ARGMAX = "argmax"
_MASK_MODES = (MASK_GROUND_TRUTH, MASK_ARGMAX)


@dataclass(frozen=True)
class LogitRecord:
    """One image's classifier output: opaque id, true label, raw logits."""

    image_id: str
    label: int
    logits: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.logits, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError(f"logits must be a nonempty vector, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError(f"record {self.image_id!r}: logits must be finite")
        if self.label < 0:
            raise ValidationError(f"record {self.image_id!r}: negative label {self.label}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "logits", arr)


def masked_softmax(logits, masked_index: int) -> np.ndarray:
    """Softmax over all entries except ``masked_index``, which is pinned to 0.

    The masked entry is excluded from the normalization (equivalent to
    setting its logit to -inf) and the rest use max-subtraction for
    stability, so the output always sums to 1.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"logits must be a vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("logits must be finite")
    C = arr.size
    if C < 2:
        raise DegenerateInputError("masked softmax needs at least 2 classes")
    if not 0 <= masked_index < C:
        raise ValidationError(f"masked index {masked_index} out of range for {C} classes")
    keep = np.ones(C, dtype=bool)
    keep[masked_index] = False
    z = arr[keep]
    e = np.exp(z - z.max())
    out = np.zeros(C)
    out[keep] = e / e.sum()
    return out


def class_similarity_rows(records, C: int, mask: str = MASK_GROUND_TRUTH) -> np.ndarray:
    """Mean masked-softmax vector per class; rows indexed by class id.

    Every class 0..C-1 must have at least one record.  ``mask`` selects
    whether each record masks its ground-truth label or its predicted
    (argmax) class.
    """
    if mask not in _MASK_MODES:
        raise ValidationError(f"mask must be one of {_MASK_MODES}, got {mask!r}")
    sums = np.zeros((C, C))
    counts = np.zeros(C, dtype=np.int64)
    for rec in records:
        if rec.logits.size != C:
            raise DimensionMismatchError(
                f"record {rec.image_id!r}: {rec.logits.size} logits for {C} classes"
            )
        if rec.label >= C:
            raise ValidationError(f"record {rec.image_id!r}: label {rec.label} >= C={C}")
        idx = rec.label if mask == MASK_GROUND_TRUTH else int(np.argmax(rec.logits))
        sums[rec.label] += masked_softmax(rec.logits, idx)
        counts[rec.label] += 1
    if (counts == 0).any():
        raise MissingClassError(np.nonzero(counts == 0)[0])
    return sums / counts[:, None]


def normalize_row(row) -> np.ndarray:
    """Center a row at its mean and scale the largest deviation to magnitude 1."""
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"row must be a nonempty vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("row entries must be finite")
    centered = arr - arr.mean()
    scale = np.abs(centered).max()
    if scale == 0.0:
        raise DegenerateInputError("cannot normalize a constant row")
    return centered / scale


def symmetrize_and_unit_diag(rows) -> SimilarityMatrix:
    """Average a square matrix with its transpose and force the diagonal to 1."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("matrix entries must be finite")
    if arr.size and np.abs(arr).max() > 1.0:
        raise ValidationError("matrix entries must lie in [-1, 1]")
    sym = (arr + arr.T) / 2.0
    np.fill_diagonal(sym, 1.0)
    return SimilarityMatrix(sym)


def build_similarity(records, C: int, mask: str = MASK_GROUND_TRUTH) -> SimilarityMatrix:
    """Full logits-to-similarity pipeline for a labeled logit dataset."""
    rows = class_similarity_rows(records, C, mask=mask)
    normalized = np.stack([normalize_row(r) for r in rows])
    return symmetrize_and_unit_diag(normalized)


def cosine_similarity_matrix(embeddings) -> SimilarityMatrix:
    """Pairwise cosine similarities of per-class embedding vectors."""
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"embeddings must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"embeddings must be at least 1x1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError("embeddings must be finite")
    norms = np.linalg.norm(arr, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise DegenerateInputError(f"zero-norm embeddings for classes: {zero.tolist()}")
    unit = arr / norms[:, None]
    gram = unit @ unit.T
    np.clip(gram, -1.0, 1.0, out=gram)
    gram = (gram + gram.T) / 2.0
    np.fill_diagonal(gram, 1.0)
    return SimilarityMatrix(gram)


@contextmanager
def _text_stream(f, mode):
    if hasattr(f, "read" if mode == "r" else "write"):
        yield f
    else:
        with open(f, mode, encoding="utf-8") as fh:
            yield fh


def _parse_header_int(text, key, what):
    prefix = key + "="
    if not text.startswith(prefix):
        raise FormatError(f"{what}: expected '{prefix}<int>', got {text!r}")
    try:
        value = int(text[len(prefix):])
    except ValueError:
        raise FormatError(f"{what}: expected '{prefix}<int>', got {text!r}") from None
    if value < 1:
        raise FormatError(f"{what}: {key} must be positive, got {value}")
    return value


def read_logits(source) -> tuple[list[LogitRecord], int]:
    """Parse a logit file: first line ``C=<int>``, then ``id,label,logit_0,...`` lines."""
    with _text_stream(source, "r") as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty logit file")
        C = _parse_header_int(header.strip(), "C", "logit file header")
        records = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + C:
                raise FormatError(
                    f"logit file line {lineno}: expected {2 + C} fields, got {len(parts)}"
                )
            try:
                label = int(parts[1])
                logits = np.array([float(p) for p in parts[2:]])
            except ValueError as exc:
                raise FormatError(f"logit file line {lineno}: {exc}") from None
            if not np.isfinite(logits).all():
                raise FormatError(f"logit file line {lineno}: non-finite logit")
            if not 0 <= label < C:
                raise FormatError(f"logit file line {lineno}: label {label} out of range")
            records.append(LogitRecord(parts[0], label, logits))
    return records, C


def read_embeddings(source) -> np.ndarray:
    """Parse an embedding file: ``C=<int>,D=<int>`` then C rows of D reals."""
    with _text_stream(source, "r") as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty embedding file")
        fields = header.strip().split(",")
        if len(fields) != 2:
            raise FormatError(f"embedding header must be 'C=<int>,D=<int>', got {header.strip()!r}")
        C = _parse_header_int(fields[0], "C", "embedding header")
        D = _parse_header_int(fields[1], "D", "embedding header")
        rows = np.zeros((C, D))
        for i in range(C):
            line = fh.readline()
            if not line:
                raise FormatError(f"embedding file: expected {C} rows, got {i}")
            parts = line.strip().split(",")
            if len(parts) != D:
                raise FormatError(
                    f"embedding file row {i}: expected {D} values, got {len(parts)}"
                )
            try:
                rows[i] = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(f"embedding file row {i}: {exc}") from None
        if not np.isfinite(rows).all():
            raise FormatError("embedding file: non-finite value")
    return rows


def write_similarity(matrix: SimilarityMatrix, sink) -> None:
    """Write a similarity matrix: first line C, then C comma-separated rows."""
    with _text_stream(sink, "w") as fh:
        fh.write(f"{matrix.C}\n")
        for row in matrix.values:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def read_similarity(source, tol: float = 1e-9) -> SimilarityMatrix:
    """Read a similarity matrix file; validates within ``tol`` and snaps exactly."""
    with _text_stream(source, "r") as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty similarity file")
        try:
            C = int(header.strip())
        except ValueError:
            raise FormatError(
                f"similarity header must be an integer class count, got {header.strip()!r}"
            ) from None
        if C < 1:
            raise FormatError(f"similarity class count must be positive, got {C}")
        values = np.zeros((C, C))
        for i in range(C):
            line = fh.readline()
            if not line:
                raise FormatError(f"similarity file: expected {C} rows, got {i}")
            parts = line.strip().split(",")
            if len(parts) != C:
                raise FormatError(
                    f"similarity file row {i}: expected {C} values, got {len(parts)}"
                )
            try:
                values[i] = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(f"similarity file row {i}: {exc}") from None
    return SimilarityMatrix.snap(values, tol=tol)
