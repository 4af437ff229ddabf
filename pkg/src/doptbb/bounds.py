"""Combinatorial upper bounds and variable-bound tightening.

With ``l = 0`` a design picks ``s`` rows (with repetition up to ``u_i``) from
the expanded matrix ``A_u`` that repeats row ``i`` ``u_i`` times. Both bounds
below dominate ``log det(I + A_S^T A_S)`` for any such row selection ``S`` and
hence the D-optimal objective.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance
from .relaxation import DualCertificate

# slack on floor((zeta - LB) / multiplier) against rounding in the dual value
FLOOR_EPS = 1e-9


class EmptyBox(ValueError):
    """Tightening proved that no design in the box beats the lower bound."""


@dataclass
class BoundsReport:
    hadamard: float
    spectral: float
    row_norms: np.ndarray
    sing_vals: np.ndarray


@dataclass
class TightenResult:
    new_l: np.ndarray
    new_u: np.ndarray
    n_tightened: int
    n_fixed: int


def expand_to_binary(inst: Instance, u=None) -> np.ndarray:
    u = inst.u if u is None else np.asarray(u, dtype=np.int64)
    return np.repeat(inst.A, u, axis=0)


def hadamard_bound(Au: np.ndarray, s: int) -> float:
    """Sum of ``log(1 + phi^2)`` over the ``s`` largest squared row norms."""
    sq = np.sort((np.asarray(Au) ** 2).sum(axis=1))[::-1]
    if s > sq.size:
        raise ValueError("s exceeds the number of rows")
    return float(np.log1p(sq[:s]).sum())


def spectral_bound(Au: np.ndarray, s: int) -> float:
    """Sum of ``log(1 + sigma^2)`` over the ``s`` largest singular values."""
    Au = np.asarray(Au, dtype=float)
    ev = np.clip(np.linalg.eigvalsh(Au.T @ Au), 0.0, None)[::-1]
    return float(np.log1p(ev[:s]).sum())


def node_bounds(inst: Instance, u=None) -> BoundsReport:
    """Both bounds for the box ``0 <= x <= u`` without materializing ``A_u``.

    Rows already folded into ``inst.base`` by normalization are counted back
    in, so the values bound the objective including the base matrix.
    """
    u = inst.u if u is None else np.asarray(u, dtype=np.int64)
    counts = u if inst.offset is None else u + inst.offset
    picks = inst.s if inst.offset is None else inst.s + int(inst.offset.sum())
    norms = (inst.A ** 2).sum(axis=1)
    row_sq = np.sort(np.repeat(norms, counts))[::-1]
    G = inst.A.T @ (counts[:, None] * inst.A)
    sv = np.clip(np.linalg.eigvalsh(G), 0.0, None)[::-1]
    h = float(np.log1p(row_sq[:picks]).sum())
    sp = float(np.log1p(sv[:picks]).sum())
    return BoundsReport(h, sp, row_sq, sv)


def vbt_tighten(l, u, LB: float, dual: DualCertificate) -> TightenResult:
    """Shrink ``[l, u]`` so that every design with objective >= LB survives.

    ``x_k <= l_k + floor((zeta - LB) / theta_k)`` for ``theta_k > 0`` and
    ``x_k >= u_k - floor((zeta - LB) / lam_k)`` for ``lam_k > 0``.
    """
    l = np.asarray(l, dtype=np.int64)
    u = np.asarray(u, dtype=np.int64)
    gap = max(0.0, dual.zeta_hat - LB)
    new_l = l.copy()
    new_u = u.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        th = dual.theta
        lm = dual.lam
        cap_u = np.where(th > 0, np.floor(gap / np.where(th > 0, th, 1.0) + FLOOR_EPS), np.inf)
        cap_l = np.where(lm > 0, np.floor(gap / np.where(lm > 0, lm, 1.0) + FLOOR_EPS), np.inf)
    mask = th > 0
    new_u[mask] = np.minimum(u[mask], l[mask] + np.minimum(cap_u[mask], u[mask] - l[mask]).astype(np.int64))
    mask = lm > 0
    new_l[mask] = np.maximum(l[mask], u[mask] - np.minimum(cap_l[mask], u[mask] - l[mask]).astype(np.int64))
    if np.any(new_l > new_u):
        raise EmptyBox("tightened bounds cross")
    n_tightened = int(np.sum(new_u < u) + np.sum(new_l > l))
    n_fixed = int(np.sum((new_l == new_u) & (l < u)))
    return TightenResult(new_l, new_u, n_tightened, n_fixed)
