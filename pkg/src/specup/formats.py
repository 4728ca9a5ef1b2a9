"""Text file formats: symmetric coordinate matrices, eigenpair files,
point-cloud CSV, vectors, and run manifests.

Everything is plain diffable text.  Floats in matrix/eigenpair files use 17
significant digits so 64-bit values round-trip exactly; all writes go
through a temp file plus rename so readers never observe partial output.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .core import PartialEigen, SymmetricMatrix
from .errors import InputError, NotDescending, NotOrthonormal
from .graph import PointCloud

MATRIX_MAGIC = "%%sym-coo"

F17 = "{:.17g}"


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _open_lines(path):
    try:
        with open(path, "r") as fh:
            return fh.read().splitlines()
    except FileNotFoundError:
        raise InputError(f"cannot read {path}: no such file") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- symmetric coordinate matrices -----------------------------------------


def matrix_to_text(a: SymmetricMatrix):
    upper = a.upper_csr.tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [f"{MATRIX_MAGIC} {a.n} {upper.nnz}"]
    for i in order:
        lines.append(f"{upper.row[i]} {upper.col[i]} "
                     + F17.format(upper.data[i]))
    return "\n".join(lines) + "\n"


def write_matrix(path, a: SymmetricMatrix):
    atomic_write_text(path, matrix_to_text(a))


def read_matrix(path) -> SymmetricMatrix:
    lines = _open_lines(path)
    if not lines:
        raise InputError(f"{path}:1: empty matrix file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != MATRIX_MAGIC:
        raise InputError(f"{path}:1: expected header '{MATRIX_MAGIC} n nnz'")
    try:
        n, nnz = int(head[1]), int(head[2])
    except ValueError:
        raise InputError(f"{path}:1: malformed header counts") from None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 'i j value'")
        try:
            i, j, x = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed entry") from None
        if i > j:
            raise InputError(f"{path}:{lineno}: entry below the diagonal")
        rows.append(i)
        cols.append(j)
        vals.append(x)
    if len(rows) != nnz:
        raise InputError(f"{path}: header promises {nnz} entries, found {len(rows)}")
    return SymmetricMatrix.from_coo(n, rows, cols, vals)


# --- eigenpair files ---------------------------------------------------------


def eigs_to_text(values, vectors):
    values = np.asarray(values, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    n, m = vectors.shape
    lines = [f"{n} {m}", " ".join(F17.format(v) for v in values)]
    for i in range(n):
        lines.append(" ".join(F17.format(x) for x in vectors[i]))
    return "\n".join(lines) + "\n"


def write_eigs(path, values, vectors):
    atomic_write_text(path, eigs_to_text(values, vectors))


def read_eigs(path, validate=True):
    """Read an eigenpair file; returns (values, vectors).

    With ``validate`` the invariants are enforced: descending values and a
    column-orthonormal vector block.
    """
    lines = _open_lines(path)
    if len(lines) < 2:
        raise InputError(f"{path}: truncated eigenpair file")
    head = lines[0].split()
    if len(head) != 2:
        raise InputError(f"{path}:1: expected 'n m'")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise InputError(f"{path}:1: malformed sizes") from None
    try:
        values = np.array([float(x) for x in lines[1].split()], dtype=np.float64)
    except ValueError:
        raise InputError(f"{path}:2: malformed eigenvalues") from None
    if values.shape != (m,):
        raise InputError(f"{path}:2: expected {m} eigenvalues")
    data = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            row = [float(x) for x in line.split()]
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed vector row") from None
        if len(row) != m:
            raise InputError(f"{path}:{lineno}: expected {m} columns")
        data.append(row)
    if len(data) != n:
        raise InputError(f"{path}: expected {n} vector rows, found {len(data)}")
    vectors = np.array(data, dtype=np.float64)
    if validate:
        if np.any(np.diff(values) > 0):
            raise NotDescending(f"{path}: eigenvalues are not descending")
        defect = np.linalg.norm(vectors.T @ vectors - np.eye(m), "fro")
        if defect > 1e-10 * m:
            raise NotOrthonormal(
                f"{path}: eigenvector block defect {defect:.3e} exceeds 1e-10*m")
    return values, vectors


def read_vector(path):
    lines = _open_lines(path)
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            out.extend(float(x) for x in line.split())
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed number") from None
    if not out:
        raise InputError(f"{path}: empty vector file")
    return np.array(out, dtype=np.float64)


# --- point-cloud CSV ---------------------------------------------------------


def load_point_cloud(path) -> PointCloud:
    """One point per row, comma-separated coordinates, optional header."""
    lines = _open_lines(path)
    rows = []
    expected = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        parts = [p.strip() for p in stripped.split(",")]
        try:
            row = [float(p) for p in parts]
        except ValueError:
            if lineno == 1 and not rows:
                continue  # header row
            raise InputError(f"{path}:{lineno}: malformed coordinate") from None
        if expected is None:
            expected = len(row)
        elif len(row) != expected:
            raise InputError(
                f"{path}:{lineno}: expected {expected} coordinates, got {len(row)}")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no points found")
    return PointCloud(np.array(rows, dtype=np.float64))


def save_point_cloud(path, points):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lines = [",".join(F17.format(x) for x in row) for row in points]
    atomic_write_text(path, "\n".join(lines) + "\n")


# --- run manifests -----------------------------------------------------------


def write_manifest(path, subcommand, config, input_paths=None, seed=None,
                   version=None):
    """Record everything needed to reproduce an output file."""
    digests = {}
    for p in input_paths or []:
        digests[os.path.basename(os.fspath(p))] = sha256_file(p)
    payload = {
        "subcommand": subcommand,
        "config": config,
        "input_digests": digests,
        "seed": seed,
        "tool_version": version,
    }
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
