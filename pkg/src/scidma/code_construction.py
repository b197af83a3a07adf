"""Protograph codes: base matrices, terminated spatial coupling, lifting and encoding.

Three refinement levels are modelled:

* :class:`Protograph` -- a small base matrix of edge multiplicities,
* :class:`CoupledProtograph` -- ``W`` component matrices stacked into the
  terminated band matrix of ``L`` spatial positions,
* :class:`ParityCheck` -- the binary matrix obtained by lifting every
  protograph edge to a ``Z x Z`` permutation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Protograph:
    """Base matrix; rows are check types, columns are variable types."""

    entries: np.ndarray

    def __post_init__(self):
        b = np.array(self.entries, dtype=np.int64, copy=True)
        if b.ndim != 2 or b.size == 0:
            raise ValueError("protograph must be a non-empty 2-D matrix")
        if np.any(b < 0):
            raise ValueError("protograph entries must be non-negative")
        b.setflags(write=False)
        object.__setattr__(self, "entries", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def n_checks(self) -> int:
        return self.entries.shape[0]

    @property
    def n_vars(self) -> int:
        return self.entries.shape[1]

    @property
    def design_rate(self) -> float:
        return 1.0 - self.n_checks / self.n_vars

    @property
    def var_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def check_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def validate_base(self) -> None:
        """Check the stand-alone ensemble invariants (no empty rows/cols, rate in (0, 1))."""
        if np.any(self.check_degrees == 0) or np.any(self.var_degrees == 0):
            raise ValueError("protograph has an all-zero row or column")
        if not 0.0 < self.design_rate < 1.0:
            raise ValueError(f"design rate {self.design_rate:.3f} outside (0, 1)")

    def __eq__(self, other):
        return isinstance(other, Protograph) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))

    def to_text(self) -> str:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.entries) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Protograph":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("protograph text must be a rectangular integer matrix")
        return cls(np.array([[int(v) for v in r] for r in rows]))


def make_regular_protograph(d_v: int, d_c: int) -> Protograph:
    """Smallest all-equal base matrix with variable degree ``d_v`` and check degree ``d_c``.

    With ``a = gcd(d_v, d_c)`` the matrix is ``(d_v/a) x (d_c/a)`` with every
    entry equal to ``a``; e.g. (3, 6) gives ``[3 3]``.
    """
    if d_v < 1 or d_c < 1:
        raise ValueError("degrees must be positive")
    if d_v >= d_c:
        raise ValueError(f"d_v={d_v} >= d_c={d_c} gives a non-positive rate")
    a = math.gcd(d_v, d_c)
    proto = Protograph(np.full((d_v // a, d_c // a), a))
    proto.validate_base()
    return proto


def split_uniform(base: Protograph, W: int) -> list[Protograph]:
    """Spread every entry of ``base`` evenly over ``W`` component matrices."""
    if W < 1:
        raise ValueError("W must be >= 1")
    if np.any(base.entries % W):
        raise ValueError(f"entries of base are not divisible by W={W}")
    part = Protograph(base.entries // W)
    return [part] * W


# C_2 component matrices (edge-spread (3, 4) protograph, W = 2)
_C2_B0 = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]])
_C2_B1 = np.array([[0, 0, 1, 1], [1, 0, 0, 1], [1, 1, 0, 0]])


def coupling_parts(d_v: int, d_c: int) -> list[Protograph]:
    """Component matrices ``B_0 .. B_{W-1}`` of the regular (d_v, d_c) coupled ensemble.

    Multiples ``(3a, 4a)`` of the (3, 4) ensemble chain the explicit
    edge-spread pair ``a`` times (``W = 2a``).  Otherwise, for
    ``a = gcd(d_v, d_c) > 1``, the all-``a`` base matrix is split into
    ``W = a`` all-ones components.
    """
    if d_v % 3 == 0 and d_c * 3 == d_v * 4:
        return [Protograph(_C2_B0), Protograph(_C2_B1)] * (d_v // 3)
    base = make_regular_protograph(d_v, d_c)
    a = math.gcd(d_v, d_c)
    if a == 1:
        raise ValueError(f"no built-in edge spreading for ({d_v}, {d_c})")
    return split_uniform(base, a)


CODES = {
    "c1": (3, 6),
    "c2": (3, 4),
}


def named_code_parts(name: str) -> list[Protograph]:
    """Component matrices of the named ensembles ``c1`` = (3,6), W=3 and ``c2`` = (3,4), W=2."""
    try:
        d_v, d_c = CODES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown code {name!r}; expected one of {sorted(CODES)}") from None
    return coupling_parts(d_v, d_c)


@dataclass(frozen=True, eq=False)
class CoupledProtograph:
    parts: tuple[Protograph, ...]
    L: int
    matrix: np.ndarray = field(repr=False)

    @property
    def W(self) -> int:
        return len(self.parts)

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.parts[0].shape

    @property
    def n_positions(self) -> int:
        """Check-side spatial positions ``L + W - 1``."""
        return self.L + self.W - 1

    @property
    def design_rate(self) -> float:
        m, n = self.matrix.shape
        return 1.0 - m / n

    @property
    def asymptotic_rate(self) -> float:
        """Design rate for ``L -> inf`` (termination loss ignored)."""
        mp, np_ = self.block_shape
        return 1.0 - mp / np_

    @property
    def uncoupled(self) -> Protograph:
        """The underlying block ensemble ``sum_w B_w``."""
        return Protograph(sum(p.entries for p in self.parts))

    def var_position(self) -> np.ndarray:
        """Spatial position of each column of the assembled matrix."""
        return np.repeat(np.arange(self.L), self.block_shape[1])

    def check_position(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_positions), self.block_shape[0])


def couple(parts: Sequence[Protograph], L: int) -> CoupledProtograph:
    """Terminated band matrix of size ``(L+W-1) M' x L N'``.

    Block column ``t`` carries ``B_0 .. B_{W-1}`` in block rows ``t .. t+W-1``.
    """
    parts = tuple(p if isinstance(p, Protograph) else Protograph(p) for p in parts)
    if not parts:
        raise ValueError("need at least one component matrix")
    shape = parts[0].shape
    if any(p.shape != shape for p in parts):
        raise ValueError("all component matrices must share the same dimensions")
    W = len(parts)
    if L < W:
        raise ValueError(f"L={L} must be >= W={W}")
    mp, np_ = shape
    mat = np.zeros(((L + W - 1) * mp, L * np_), dtype=np.int64)
    for t in range(L):
        for w, part in enumerate(parts):
            mat[(t + w) * mp:(t + w + 1) * mp, t * np_:(t + 1) * np_] = part.entries
    mat.setflags(write=False)
    return CoupledProtograph(parts=parts, L=L, matrix=mat)


# ---------------------------------------------------------------------------
# lifting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParityCheck:
    """Lifted binary parity-check matrix with its protograph bookkeeping."""

    H: sp.csr_matrix
    Z: int
    proto: CoupledProtograph
    seed: int | None
    permutations: dict = field(repr=False, default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.H.shape

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    def var_position(self) -> np.ndarray:
        """Spatial position of every code bit."""
        return np.repeat(np.arange(self.proto.L), self.proto.block_shape[1] * self.Z)

    def check_position(self) -> np.ndarray:
        return np.repeat(np.arange(self.proto.n_positions), self.proto.block_shape[0] * self.Z)

    @property
    def bits_per_position(self) -> int:
        return self.proto.block_shape[1] * self.Z

    @property
    def checks_per_position(self) -> int:
        return self.proto.block_shape[0] * self.Z

    def four_cycles(self) -> int:
        """Number of length-4 cycles in the Tanner graph."""
        Hc = self.H.tocsc().astype(np.int64)
        overlap = (Hc.T @ Hc).tocoo()
        mask = overlap.row < overlap.col
        k = overlap.data[mask]
        return int(np.sum(k * (k - 1) // 2))

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        return (self.H @ np.asarray(bits, dtype=np.int64).T) % 2


def _distinct_perms(rng: np.random.Generator, Z: int, t: int, max_tries: int = 1000) -> list[np.ndarray]:
    """``t`` permutations of ``range(Z)`` with no common fixed point pairwise (no parallel edges)."""
    perms: list[np.ndarray] = []
    while len(perms) < t:
        for _ in range(max_tries):
            p = rng.permutation(Z)
            if all(not np.any(p == q) for q in perms):
                perms.append(p)
                break
        else:
            raise RuntimeError("could not draw disjoint permutations; increase Z")
    return perms


def lift(cp: CoupledProtograph, Z: int, seed: int | None = 0, style: str = "random") -> ParityCheck:
    """Replace every protograph edge by a ``Z x Z`` permutation.

    ``style='random'`` draws independent permutations per edge (entries with
    multiplicity ``t`` get ``t`` mutually disjoint permutations so the lifted
    graph has no parallel edges).  ``style='circulant'`` uses cyclic shifts,
    chosen at random but distinct within one entry.  ``Z == 1`` with all
    multiplicities <= 1 gives the binary image of the protograph.
    """
    if Z < 1:
        raise ValueError("Z must be >= 1")
    B = cp.matrix
    if Z < B.max():
        raise ValueError(f"Z={Z} smaller than the largest multiplicity {B.max()}")
    if style not in ("random", "circulant"):
        raise ValueError(f"unknown lifting style {style!r}")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    perms = {}
    for j, i in zip(*np.nonzero(B)):
        t = int(B[j, i])
        if Z == 1:
            ps = [np.zeros(1, dtype=np.int64)]
        elif style == "random":
            ps = _distinct_perms(rng, Z, t)
        else:
            shifts = rng.choice(Z, size=t, replace=False)
            ps = [(np.arange(Z) + s) % Z for s in shifts]
        perms[(int(j), int(i))] = ps
        for p in ps:
            # row j*Z + r connects to column i*Z + p[r]
            rows.append(j * Z + np.arange(Z))
            cols.append(i * Z + p)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    H = sp.csr_matrix((np.ones(r.size, dtype=np.uint8), (r, c)), shape=(B.shape[0] * Z, B.shape[1] * Z))
    H.sum_duplicates()
    H.sort_indices()
    return ParityCheck(H=H, Z=Z, proto=cp, seed=seed, permutations=perms)


# ---------------------------------------------------------------------------
# alist I/O
# ---------------------------------------------------------------------------


def write_alist(H, path_or_buf=None) -> str:
    """Serialise a binary matrix in MacKay's alist format; returns the text."""
    H = sp.csr_matrix(H.H if isinstance(H, ParityCheck) else H)
    m, n = H.shape
    Hc = H.tocsc()
    col_w = np.diff(Hc.indptr)
    row_w = np.diff(H.indptr)
    out = io.StringIO()
    out.write(f"{n} {m}\n")
    out.write(f"{col_w.max() if n else 0} {row_w.max() if m else 0}\n")
    out.write(" ".join(map(str, col_w)) + "\n")
    out.write(" ".join(map(str, row_w)) + "\n")
    for i in range(n):
        out.write(" ".join(str(v + 1) for v in Hc.indices[Hc.indptr[i]:Hc.indptr[i + 1]]) + "\n")
    for j in range(m):
        out.write(" ".join(str(v + 1) for v in H.indices[H.indptr[j]:H.indptr[j + 1]]) + "\n")
    text = out.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            Path(path_or_buf).write_text(text)
    return text


def read_alist(source) -> sp.csr_matrix:
    """Parse alist text (or a path to an alist file) into a CSR matrix."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        source = Path(source).read_text()
    lines = [ln.split() for ln in source.splitlines() if ln.strip()]
    n, m = int(lines[0][0]), int(lines[0][1])
    rows, cols = [], []
    for i in range(n):
        for v in lines[4 + i]:
            v = int(v)
            if v > 0:  # some writers zero-pad
                rows.append(v - 1)
                cols.append(i)
    H = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
    H.sort_indices()
    return H


# ---------------------------------------------------------------------------
# GF(2) encoder
# ---------------------------------------------------------------------------


def _gf2_rref(packed: np.ndarray, n: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of a bit-packed GF(2) matrix (rows packed along axis 1)."""
    A = packed.copy()
    m = A.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        byte, bit = divmod(c, 8)
        mask = np.uint8(0x80 >> bit)
        col = (A[r:, byte] & mask) != 0
        hit = np.flatnonzero(col)
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        rows = np.flatnonzero((A[:, byte] & mask) != 0)
        rows = rows[rows != r]
        if rows.size:
            A[rows] ^= A[r]
        pivots.append(c)
        r += 1
    return A[:r], pivots


def gf2_rank(H) -> int:
    """Rank over GF(2) of a dense or sparse 0/1 matrix."""
    dense = np.asarray(H.toarray() if sp.issparse(H) else H, dtype=np.uint8) & 1
    _, piv = _gf2_rref(np.packbits(dense, axis=1), dense.shape[1])
    return len(piv)


@dataclass(frozen=True, eq=False)
class Encoder:
    """Systematic GF(2) encoder derived from a parity-check matrix.

    Information bits occupy the non-pivot columns; each pivot (parity) bit is
    the XOR of the information bits selected by its row of the reduced matrix.
    """

    n: int
    k: int
    rank: int
    info_cols: np.ndarray
    parity_cols: np.ndarray
    parity_map: np.ndarray = field(repr=False)  # (rank, k) uint8

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode a length-``k`` word or a ``(batch, k)`` array of words."""
        u = np.asarray(info, dtype=np.uint8) & 1
        single = u.ndim == 1
        u = np.atleast_2d(u)
        if u.shape[1] != self.k:
            raise ValueError(f"expected {self.k} information bits, got {u.shape[1]}")
        c = np.zeros((u.shape[0], self.n), dtype=np.uint8)
        c[:, self.info_cols] = u
        parity = (u.astype(np.int64) @ self.parity_map.T.astype(np.int64)) % 2
        c[:, self.parity_cols] = parity
        return c[0] if single else c


def build_encoder(H) -> Encoder:
    """Gaussian elimination over GF(2); rank deficiency shrinks ``k`` accordingly."""
    mat = H.H if isinstance(H, ParityCheck) else H
    dense = np.asarray(mat.toarray() if sp.issparse(mat) else mat, dtype=np.uint8) & 1
    if dense.size == 0:
        raise ValueError("empty parity-check matrix")
    m, n = dense.shape
    R, pivots = _gf2_rref(np.packbits(dense, axis=1), n)
    rank = len(pivots)
    R = np.unpackbits(R, axis=1, count=n)
    pivot_cols = np.array(pivots, dtype=np.int64)
    info_cols = np.setdiff1d(np.arange(n), pivot_cols)
    # row r of R: c[pivot r] + sum_{info cols} R[r, col] c[col] = 0
    parity_map = np.ascontiguousarray(R[:, info_cols])
    return Encoder(n=n, k=n - rank, rank=rank, info_cols=info_cols, parity_cols=pivot_cols, parity_map=parity_map)
