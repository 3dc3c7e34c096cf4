"""Determinantal point processes on finite spaces.

Correlation kernels, gap probabilities, L-ensembles (conditional ones too,
with signed weights), Karlin-McGregor determinants, and the non-intersecting
walk kernel.  Spaces are small and dense by design: everything here is meant
to be checkable against exhaustive enumeration.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

ENUM_CAP = 64  # hard cap on space size for the enumeration oracles
_SING_RCOND = 1e-12


def _as_tuple(p):
    return tuple(p) if isinstance(p, (list, tuple)) else p


@dataclass
class FiniteDpp:
    """Point process on an ordered finite set determined by det[K]·Πμ."""

    points: tuple
    kernel: np.ndarray
    measure: np.ndarray
    index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.points = tuple(_as_tuple(p) for p in self.points)
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.measure = np.asarray(self.measure, dtype=float)
        n = len(self.points)
        if self.kernel.shape != (n, n):
            raise ValueError("kernel shape does not match point set")
        if self.measure.shape != (n,):
            raise ValueError("measure shape does not match point set")
        if not np.all(np.isfinite(self.kernel)):
            raise ValueError("kernel has non-finite entries")
        if not np.all(self.measure > 0):
            raise ValueError("measure must be strictly positive")
        self.index = {p: i for i, p in enumerate(self.points)}


@dataclass
class LEnsembleSpec:
    """L-ensemble on a finite space, possibly conditioned on a subset Z.

    Weights may be signed; the only structural requirement is that
    det(1_Z + L) is nonzero, which is verified here.
    """

    space: tuple
    L: np.ndarray
    conditioning_subset: tuple

    def __post_init__(self) -> None:
        self.space = tuple(_as_tuple(p) for p in self.space)
        self.L = np.asarray(self.L, dtype=float)
        self.conditioning_subset = tuple(_as_tuple(p) for p in self.conditioning_subset)
        n = len(self.space)
        if self.L.shape != (n, n):
            raise ValueError("L shape does not match space")
        zset = set(self.conditioning_subset)
        if not zset <= set(self.space):
            raise ValueError("conditioning subset must lie inside the space")
        self._z_mask = np.array([p in zset for p in self.space])
        m = self.one_z_plus_l()
        sign, _ = np.linalg.slogdet(m)
        if sign == 0 or np.linalg.cond(m) > 1.0 / _SING_RCOND:
            raise ValueError("1_Z + L is singular (or numerically so)")

    def one_z_plus_l(self) -> np.ndarray:
        return np.diag(self._z_mask.astype(float)) + self.L

    @property
    def z_indices(self) -> np.ndarray:
        return np.flatnonzero(self._z_mask)

    @property
    def zc_indices(self) -> np.ndarray:
        return np.flatnonzero(~self._z_mask)

    def index_of(self, p) -> int:
        return self.space.index(_as_tuple(p))


def dpp_correlation(dpp: FiniteDpp, pts: Sequence) -> float:
    """n-point correlation det[K(x_i,x_j)] Π μ(x_k); 0 on repeated points."""
    idx = [dpp.index[_as_tuple(p)] for p in pts]
    if len(set(idx)) != len(idx):
        return 0.0
    sub = dpp.kernel[np.ix_(idx, idx)]
    return float(np.linalg.det(sub) * np.prod(dpp.measure[idx]))


def gap_probability(dpp: FiniteDpp, B: Sequence) -> float:
    """det(I - K) on l^2(B, mu): probability that B holds no points."""
    idx = [dpp.index[_as_tuple(p)] for p in B]
    if not idx:
        return 1.0
    sub = dpp.kernel[np.ix_(idx, idx)] * dpp.measure[idx][None, :]
    return float(np.linalg.det(np.eye(len(idx)) - sub))


def l_to_k(spec: LEnsembleSpec) -> FiniteDpp:
    """Unconditioned correlation kernel K = L(1+L)^{-1} (requires Z = space)."""
    if len(spec.conditioning_subset) != len(spec.space):
        raise ValueError("l_to_k needs Z = space; use conditional_l_to_k")
    n = len(spec.space)
    K = np.linalg.solve((np.eye(n) + spec.L).T, spec.L.T).T
    return FiniteDpp(spec.space, K, np.ones(n))


def conditional_l_to_k(spec: LEnsembleSpec) -> FiniteDpp:
    """Correlation kernel of the conditional ensemble: 1_Z - (1_Z+L)^{-1} on Z."""
    inv = np.linalg.inv(spec.one_z_plus_l())
    zi = spec.z_indices
    K = np.eye(len(zi)) - inv[np.ix_(zi, zi)]
    pts = tuple(spec.space[i] for i in zi)
    return FiniteDpp(pts, K, np.ones(len(zi)))


def conditional_weight(spec: LEnsembleSpec, Y: Sequence) -> float:
    """Signed weight W(Y) = det(L_{Y ∪ Z^c}) / det(1_Z + L) for Y ⊆ Z."""
    zset = set(spec.conditioning_subset)
    ypts = [_as_tuple(p) for p in Y]
    if not set(ypts) <= zset:
        raise ValueError("Y must be a subset of Z")
    idx = sorted({spec.index_of(p) for p in ypts} | set(spec.zc_indices.tolist()))
    sub = spec.L[np.ix_(idx, idx)]
    den = np.linalg.det(spec.one_z_plus_l())
    num = np.linalg.det(sub) if idx else 1.0
    return float(num / den)


def enumerate_weights(spec: LEnsembleSpec) -> dict:
    """All signed weights {frozenset(Y): W(Y)} for Y ⊆ Z.  Exponential; the
    space is capped so this stays a desk-scale oracle."""
    z = spec.conditioning_subset
    if len(z) > 20 or len(spec.space) > ENUM_CAP:
        raise ValueError("enumeration oracle capped at |Z| <= 20, |space| <= 64")
    out = {}
    for r in range(len(z) + 1):
        for comb in itertools.combinations(z, r):
            out[frozenset(comb)] = conditional_weight(spec, comb)
    return out


def correlation_from_weights(weights: Mapping, pts: Sequence) -> float:
    """Oracle: rho(pts) = sum of W(X) over configurations X containing pts."""
    want = {_as_tuple(p) for p in pts}
    return float(sum(w for X, w in weights.items() if want <= X))


def gap_from_weights(weights: Mapping, B: Sequence) -> float:
    """Oracle: P(no point in B) = sum of W(X) over X disjoint from B."""
    avoid = {_as_tuple(p) for p in B}
    return float(sum(w for X, w in weights.items() if not (X & avoid)))


def karlin_mcgregor_det(
    p: Callable[[int, int], float],
    starts: Sequence[int],
    ends: Sequence[int],
    t: int,
) -> float:
    """Non-intersection probability det[p_t(k_i, l_j)] for one-step ±1 walks.

    `p(a, b)` is the one-step transition probability; the t-step transitions
    are built by forward dynamic programming.
    """
    starts = [int(s) for s in starts]
    ends = [int(e) for e in ends]
    n = len(starts)
    mat = np.empty((n, n))
    for i, k in enumerate(starts):
        dist = {k: 1.0}
        for _ in range(int(t)):
            nxt: dict[int, float] = {}
            for a, w in dist.items():
                for b in (a - 1, a + 1):
                    q = p(a, b)
                    if q:
                        nxt[b] = nxt.get(b, 0.0) + w * q
            dist = nxt
        for j, e in enumerate(ends):
            mat[i, j] = dist.get(e, 0.0)
    return float(np.linalg.det(mat))


def vicious_walk_kernel(
    space: Sequence,
    p_t: Callable,
    pi: Mapping,
    xs: Sequence,
) -> FiniteDpp:
    """Mid-position kernel for walks pinned to the same configuration.

    Walks start at xs, run for time t, and return over another t; the
    mid-time configuration is determinantal with kernel
    K(u,v) = sum_i psi_i(u) phi_i(v),
    psi_i(u) = sum_k (A^{-1/2})_{ik} p_t(x_k,u)/pi(u)  (phi likewise),
    A_{ik} = p_{2t}(x_i,x_k)/pi(x_k).  The principal symmetric square root of
    A is used; a non-symmetric or near-singular A means the reversibility or
    invertibility preconditions are violated and raises.
    """
    space = tuple(space)
    n = len(xs)
    pivec = np.array([pi[u] for u in space], dtype=float)
    P = np.array([[p_t(x, u) for u in space] for x in xs], dtype=float)
    # p_{2t}(x_i, x_k) by Chapman-Kolmogorov over the (closed) finite space
    Pback = np.array([[p_t(u, x) for x in xs] for u in space], dtype=float)
    p2t = P @ Pback
    xloc = [space.index(x) for x in xs]
    A = p2t / pivec[xloc][None, :]
    if not np.allclose(A, A.T, atol=1e-10 * max(1.0, float(np.abs(A).max()))):
        raise ValueError("A is not symmetric: pi is not reversible for p_t")
    evals, evecs = np.linalg.eigh(0.5 * (A + A.T))
    if evals.min() <= 1e-10 * evals.max():
        raise ValueError("A is numerically singular or not positive definite")
    a_isqrt = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
    psi = (a_isqrt @ P) / pivec[None, :]  # psi[i, u]
    K = psi.T @ psi
    return FiniteDpp(space, K, pivec)


def dpp_to_json(dpp: FiniteDpp) -> str:
    return json.dumps(
        {
            "points": [list(p) if isinstance(p, tuple) else p for p in dpp.points],
            "kernel": dpp.kernel.tolist(),
            "measure": dpp.measure.tolist(),
        }
    )


def dpp_from_json(text: str) -> FiniteDpp:
    obj = json.loads(text)
    return FiniteDpp(tuple(obj["points"]), np.array(obj["kernel"]), np.array(obj["measure"]))


def lensemble_to_json(spec: LEnsembleSpec) -> str:
    return json.dumps(
        {
            "space": [list(p) if isinstance(p, tuple) else p for p in spec.space],
            "L": spec.L.tolist(),
            "conditioning_subset": [
                list(p) if isinstance(p, tuple) else p for p in spec.conditioning_subset
            ],
        }
    )


def lensemble_from_json(text: str) -> LEnsembleSpec:
    obj = json.loads(text)
    return LEnsembleSpec(
        tuple(obj["space"]), np.array(obj["L"]), tuple(obj["conditioning_subset"])
    )
