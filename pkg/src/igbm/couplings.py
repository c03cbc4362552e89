"""Quenched disorder: diluted random couplings with tunable symmetry and an
optional Hebbian (pattern-embedding) part."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import sparse

from .errors import ParameterError
from .numerics import RngStream

FULL = "full"


@dataclass(frozen=True)
class CouplingSpec:
    N: int = 50
    mean_degree: Union[float, str] = FULL
    J0: float = 0.5
    J: float = 0.5
    alpha: float = 0.5
    hebbian_p: int = 0

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        if self.mean_degree != FULL:
            c = self.mean_degree
            if isinstance(c, str) or not 0 < c <= self.N:
                raise ParameterError(f"mean_degree must be 'full' or in (0, N], got {c!r}")
        if not -1.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [-1, 1], got {self.alpha}")
        if self.J < 0:
            raise ParameterError("J must be non-negative")
        if not isinstance(self.hebbian_p, (int, np.integer)) or self.hebbian_p < 0:
            raise ParameterError("hebbian_p must be a non-negative integer")

    @property
    def is_full(self) -> bool:
        return self.mean_degree == FULL

    @property
    def scale_c(self) -> float:
        """Connectivity used to scale the coupling moments."""
        return float(self.N) if self.is_full else float(self.mean_degree)


@dataclass(frozen=True)
class PatternSet:
    xi: np.ndarray  # shape (p, N), entries +-1

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=np.int8)
        if xi.ndim != 2 or not np.all(np.abs(xi) == 1):
            raise ParameterError("patterns must be a 2-d array of +-1 entries")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def p(self) -> int:
        return self.xi.shape[0]

    @property
    def N(self) -> int:
        return self.xi.shape[1]


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Sparse ``J_ij`` (row ``i`` receives from column ``j``) without diagonal.

    Entries are kept as a row-major sorted coordinate list.
    """

    N: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    full: bool = False
    patterns: Optional[PatternSet] = None
    spec: Optional[CouplingSpec] = field(default=None, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if not rows.shape == cols.shape == vals.shape:
            raise ParameterError("rows, cols and values must have equal length")
        if np.any(rows == cols):
            raise ParameterError("coupling matrix may not have diagonal entries")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        for a in (rows, cols, vals):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CouplingMatrix):
            return NotImplemented
        same_patterns = (self.patterns is None) == (other.patterns is None) and (
            self.patterns is None or np.array_equal(self.patterns.xi, other.patterns.xi))
        return (self.N == other.N and self.full == other.full and same_patterns
                and np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def nnz(self) -> int:
        return self.values.size

    def csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.values, (self.rows, self.cols)), shape=(self.N, self.N))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.N, self.N))
        out[self.rows, self.cols] = self.values
        return out

    def degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.N)

    def save(self, path: Union[str, Path], seed: Optional[int] = None) -> tuple[Path, Path]:
        """Write ``<path>.csv`` (``i,j,J_ij``) and a ``<path>.json`` header."""
        path = Path(path)
        csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            fh.write("i,j,J_ij\n")
            for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
                fh.write(f"{i},{j},{v:.17g}\n")
        header = {
            "N": self.N,
            "full": self.full,
            "seed": seed,
            "spec": None if self.spec is None else asdict(self.spec),
            "patterns": None if self.patterns is None else self.patterns.xi.tolist(),
        }
        json_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
        return csv_path, json_path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CouplingMatrix":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        with open(path.with_suffix(".csv"), newline="") as fh:
            reader = csv.reader(fh)
            if next(reader) != ["i", "j", "J_ij"]:
                raise ParameterError(f"{path}: unexpected coupling CSV header")
            triples = [(int(i), int(j), float(v)) for i, j, v in reader]
        rows, cols, vals = (np.array(t) for t in zip(*triples)) if triples else ([], [], [])
        spec = CouplingSpec(**header["spec"]) if header.get("spec") else None
        pats = PatternSet(np.array(header["patterns"])) if header.get("patterns") else None
        return cls(header["N"], rows, cols, vals, full=header["full"], patterns=pats, spec=spec)


def generate_couplings(spec: CouplingSpec, rng: RngStream) -> CouplingMatrix:
    """Draw ``J_ij = c_ij (J0/c + J/sqrt(c) x_ij)`` on an undirected random graph.

    Each unordered pair is visited once in row-major order: it is linked with
    probability ``c/(N-1)`` and, if linked, receives a correlated pair
    ``(x_ij, x_ji)`` with correlation ``alpha``.
    """
    N = spec.N
    if N < 2:
        raise ParameterError("need at least two assets")
    gen = rng.generator()
    iu, ju = np.triu_indices(N, k=1)
    if spec.is_full:
        linked = np.ones(iu.size, dtype=bool)
    else:
        linked = gen.random(iu.size) < spec.mean_degree / (N - 1)
    iu, ju = iu[linked], ju[linked]
    z = gen.standard_normal((2, iu.size))
    a = spec.alpha
    x_ij = z[0]
    x_ji = a * z[0] + math.sqrt(max(1.0 - a * a, 0.0)) * z[1]
    c = spec.scale_c
    mean, scale = spec.J0 / c, spec.J / math.sqrt(c)
    rows = np.concatenate([iu, ju])
    cols = np.concatenate([ju, iu])
    vals = np.concatenate([mean + scale * x_ij, mean + scale * x_ji])
    return CouplingMatrix(N, rows, cols, vals, full=spec.is_full, spec=spec)


def generate_patterns(N: int, p: int, rng: RngStream) -> PatternSet:
    if N < 1 or p < 1:
        raise ParameterError("need N >= 1 and p >= 1")
    gen = rng.generator()
    return PatternSet(np.where(gen.random((p, N)) < 0.5, -1, 1))


def add_hebbian(matrix: CouplingMatrix, patterns: PatternSet) -> CouplingMatrix:
    """Add ``(1/N) sum_mu xi_i^mu xi_j^mu`` to every off-diagonal entry."""
    if not matrix.full:
        raise ParameterError("Hebbian couplings require a fully connected matrix")
    if patterns.N != matrix.N:
        raise ParameterError(f"pattern length {patterns.N} does not match N={matrix.N}")
    N = matrix.N
    xi = patterns.xi.astype(float)
    hebb = xi.T @ xi / N
    dense = matrix.to_dense()
    # a full matrix stores every off-diagonal entry, including exact zeros
    rows, cols = np.nonzero(~np.eye(N, dtype=bool))
    vals = dense[rows, cols] + hebb[rows, cols]
    return CouplingMatrix(N, rows, cols, vals, full=True, patterns=patterns, spec=matrix.spec)


def overlap_matrix(patterns: PatternSet) -> np.ndarray:
    """Pairwise overlaps ``(1/N) xi^mu . xi^nu``."""
    xi = patterns.xi.astype(float)
    return xi @ xi.T / patterns.N
