"""Problem data for integer D-optimal design.

An instance asks for integer repetition counts ``x`` with ``sum(x) == s`` and
``l <= x <= u`` maximizing ``log det(base + A^T diag(x) A)``. ``base`` is zero
for freshly generated or loaded instances and carries ``sum_l l_l v_l v_l^T``
after :func:`normalize_to_zero_lower`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class InstanceError(ValueError):
    """Raised for malformed or infeasible instance data."""


def _full_column_rank(A: np.ndarray) -> bool:
    if A.shape[0] < A.shape[1]:
        return False
    return np.linalg.matrix_rank(A) == A.shape[1]


@dataclass(frozen=True, eq=False)
class Instance:
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray
    s: int
    base: np.ndarray | None = None
    # lower bounds removed by normalize_to_zero_lower; rows of A counted into base
    offset: np.ndarray | None = None
    name: str = field(default="")

    def __post_init__(self):
        A = np.ascontiguousarray(self.A, dtype=float)
        if A.ndim != 2:
            raise InstanceError("A must be a 2-d array")
        n, m = A.shape
        l = np.asarray(self.l, dtype=np.int64).reshape(-1)
        u = np.asarray(self.u, dtype=np.int64).reshape(-1)
        if l.shape != (n,) or u.shape != (n,):
            raise InstanceError(f"bounds must have length n={n}")
        if np.any(l < 0) or np.any(l >= u):
            raise InstanceError("bounds must satisfy 0 <= l < u")
        s = int(self.s)
        if not l.sum() <= s <= u.sum():
            raise InstanceError(f"budget s={s} outside [{l.sum()}, {u.sum()}]")
        shift = 0 if self.offset is None else int(np.sum(self.offset))
        if s + shift < m:
            raise InstanceError(f"budget s={s} smaller than m={m}")
        A.setflags(write=False)
        l.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)
        if self.base is not None:
            base = np.array(self.base, dtype=float)
            if base.shape != (m, m):
                raise InstanceError("base must be m x m")
            base.setflags(write=False)
            object.__setattr__(self, "base", base)
        if self.offset is not None:
            off = np.array(self.offset, dtype=np.int64)
            off.setflags(write=False)
            object.__setattr__(self, "offset", off)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def fim(self, x) -> np.ndarray:
        """Information matrix ``base + A^T diag(x) A``."""
        B = self.A.T @ (np.asarray(x, dtype=float)[:, None] * self.A)
        if self.base is not None:
            B = B + self.base
        return B

    def is_feasible(self, x) -> bool:
        x = np.asarray(x)
        return bool(
            x.shape == (self.n,)
            and np.all(x >= self.l)
            and np.all(x <= self.u)
            and int(round(x.sum())) == self.s
            and np.allclose(x, np.round(x))
        )

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        same_base = (self.base is None and other.base is None) or (
            self.base is not None
            and other.base is not None
            and np.array_equal(self.base, other.base)
        )
        return (
            self.s == other.s
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.l, other.l)
            and np.array_equal(self.u, other.u)
            and same_base
        )

    __hash__ = None


def generate_random(
    n: int,
    seed: int = 0,
    density: float = 0.5,
    u_max: int = 3,
    m: int | None = None,
    s: int | None = None,
    max_attempts: int = 100,
) -> Instance:
    """Random instance following the sparse-uniform recipe.

    ``m = floor(n/4)`` and ``s = floor(n/2)`` unless overridden; ``l = 0`` and
    ``u`` is uniform on ``{1, ..., u_max}``. Entries of ``A`` are nonzero with
    probability ``density`` and uniform on (0, 1) when nonzero. Draws without
    full column rank are discarded.
    """
    if n < 8 and m is None:
        raise InstanceError("n must be at least 8")
    if not 0.0 < density <= 1.0:
        raise InstanceError("density must lie in (0, 1]")
    if u_max < 1:
        raise InstanceError("u_max must be >= 1")
    m = n // 4 if m is None else int(m)
    s = n // 2 if s is None else int(s)
    rng = np.random.default_rng(seed)
    u = rng.integers(1, u_max + 1, size=n)
    for _ in range(max_attempts):
        mask = rng.random((n, m)) < density
        A = np.where(mask, rng.random((n, m)), 0.0)
        if _full_column_rank(A):
            return Instance(A=A, l=np.zeros(n, dtype=np.int64), u=u, s=s,
                            name=f"rand-n{n}-m{m}-s{s}-seed{seed}")
    raise InstanceError(
        f"no full-rank draw after {max_attempts} attempts (n={n}, m={m}, density={density})"
    )


def normalize_to_zero_lower(inst: Instance):
    """Shift bounds so that ``l = 0``.

    Returns ``(shifted, base, s_shifted)``. A design ``x'`` of the shifted
    instance maps back to ``x' + l`` with the same objective value.
    """
    l = inst.l
    base = inst.A.T @ (l[:, None] * inst.A)
    if inst.base is not None:
        base = base + inst.base
    s2 = inst.s - int(l.sum())
    offset = l if inst.offset is None else l + inst.offset
    shifted = Instance(
        A=inst.A,
        l=np.zeros(inst.n, dtype=np.int64),
        u=inst.u - l,
        s=s2,
        base=base,
        offset=offset,
        name=inst.name,
    )
    return shifted, base, s2


def restore_design(inst: Instance, x) -> np.ndarray:
    """Map a design of a normalized instance back to the original bounds."""
    x = np.asarray(x, dtype=np.int64)
    return x if inst.offset is None else x + inst.offset


def save(inst: Instance, path) -> None:
    """Write the text format: ``n m s``, then l, then u, then the rows of A."""
    lines = [f"{inst.n} {inst.m} {inst.s}",
             " ".join(str(int(v)) for v in inst.l),
             " ".join(str(int(v)) for v in inst.u)]
    lines += [" ".join(repr(float(v)) for v in row) for row in inst.A]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load(path, check_rank: bool = True) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise InstanceError("header must be 'n m s'")
    try:
        n, m, s = (int(t) for t in rows[0])
    except ValueError as exc:
        raise InstanceError(f"malformed header: {rows[0]}") from exc
    if len(rows) != 3 + n:
        raise InstanceError(f"expected {3 + n} non-empty lines, found {len(rows)}")
    try:
        l = np.array([int(t) for t in rows[1]], dtype=np.int64)
        u = np.array([int(t) for t in rows[2]], dtype=np.int64)
        A = np.array([[float(t) for t in r] for r in rows[3:]], dtype=float)
    except ValueError as exc:
        raise InstanceError(f"malformed numeric field: {exc}") from exc
    if l.size != n or u.size != n:
        raise InstanceError("bound vectors must have n entries")
    if A.shape != (n, m):
        raise InstanceError(f"A must be {n} x {m}, got rows of varying length or count")
    inst = Instance(A=A, l=l, u=u, s=s, name=Path(path).stem)
    if check_rank and not _full_column_rank(A):
        warnings.warn(f"{path}: A does not have full column rank", stacklevel=2)
    return inst
