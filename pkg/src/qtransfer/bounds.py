"""Closed-form memory bounds and channels that attain them.

For non-ideal diagonal transfer (factors ``eps_u`` on the transferred
diagonal elements) the memory about ``lam[x, y]`` is at most
``sqrt((1 - eps_x)(1 - eps_y))`` with ``eps = 0`` for elements that are not
transferred. For non-ideal non-diagonal transfer with a one-dimensional
ancilla it is at most ``sqrt(1 - eps**2)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelSpec
from .constraints import (
    DiagonalIdeal,
    DiagonalNonIdeal,
    NondiagonalIdeal,
    NondiagonalNonIdeal,
    TransferConstraint,
    TwoStateDiagonal,
)
from .errors import BoundViolation, OutOfRange
from .memory import memory_table

BOUND_TOL = 1e-8
# ideal transfers force exact zeros; numerically those are only reached to ~1e-10
THEOREM_TOL = 1e-7
CHAIN_TOL = 1e-10


def _in_range(name, x, lo, hi, lo_open=False):
    if not (lo < x <= hi if lo_open else lo <= x <= hi):
        interval = f"({lo}, {hi}]" if lo_open else f"[{lo}, {hi}]"
        raise OutOfRange(f"{name}={x} outside {interval}")


def bound_diagonal(eps_a: float, eps_b: float) -> float:
    """Memory bound on ``lam[a, b]`` when both diagonal elements are transferred."""
    _in_range("eps_a", eps_a, 0.0, 1.0, lo_open=True)
    _in_range("eps_b", eps_b, 0.0, 1.0, lo_open=True)
    return math.sqrt((1.0 - eps_a) * (1.0 - eps_b))


def bound_diagonal_other(eps_a: float) -> float:
    """Memory bound on ``lam[a, c]`` for ``c`` not among the transferred indices."""
    _in_range("eps_a", eps_a, 0.0, 1.0)
    return math.sqrt(1.0 - eps_a)


def bound_nondiagonal(eps: float) -> float:
    _in_range("eps", eps, 0.0, 1.0)
    return math.sqrt(1.0 - eps * eps)


def _embed(c3: np.ndarray, dc: int) -> np.ndarray:
    n = c3.shape[0]
    c = np.zeros((n, n, n, dc), dtype=complex)
    c[..., 0] = c3
    return c


def diagonal_witness(n: int, eps: dict, spare: int | None = None, dc: int = 1) -> ChannelSpec:
    """Channel transferring ``lam[u,u]`` with factor ``eps[u]`` (1-based keys).

    Each source basis vector stays put in A; B is sent to ``|u>`` with
    amplitude ``sqrt(eps_u)`` and to a spare, non-transferred ``|s>``
    otherwise. All memory bounds are attained at once.
    """
    c = np.zeros((n, n, n), dtype=complex)
    free = [i for i in range(1, n + 1) if i not in eps]
    if spare is None:
        spare = free[0] if free else None
    if spare is None:
        if any(e < 1.0 for e in eps.values()):
            raise OutOfRange("every diagonal element is transferred; all eps must be 1")
        for p in range(n):
            c[p, p, p] = 1.0
        return ChannelSpec(n, dc, _embed(c, dc))
    if spare in eps:
        raise OutOfRange(f"spare index {spare} is itself transferred")
    s = spare - 1
    for p in range(1, n + 1):
        p0 = p - 1
        if p in eps:
            c[p0, p0, p0] = math.sqrt(eps[p])
            c[p0, p0, s] = math.sqrt(1.0 - eps[p])
        else:
            c[p0, p0, s] = 1.0
    return ChannelSpec(n, dc, _embed(c, dc))


def build_saturating_diagonal(n: int, eps_1: float, eps_2: float) -> ChannelSpec:
    """The ``n = 3`` optimal construction, with ``c^p_{p3} = 1`` for ``p >= 3``."""
    if n < 3:
        raise OutOfRange("the saturating diagonal construction needs n >= 3")
    _in_range("eps_1", eps_1, 0.0, 1.0, lo_open=True)
    _in_range("eps_2", eps_2, 0.0, 1.0, lo_open=True)
    if eps_1 == 1.0 or eps_2 == 1.0:
        raise OutOfRange("eps must lie strictly inside (0, 1)")
    return diagonal_witness(n, {1: eps_1, 2: eps_2}, spare=3)


def nondiagonal_witness(n: int, a: int, b: int, eps: float, dc: int = 1) -> ChannelSpec:
    """``c^a_aa = 1``, ``c^b_ba = sqrt(1-eps^2)``, ``c^b_ab = eps``; ``c^p_pa = 1`` otherwise."""
    a0, b0 = a - 1, b - 1
    c = np.zeros((n, n, n), dtype=complex)
    for p in range(n):
        c[p, p, a0] = 1.0
    c[b0, b0, a0] = math.sqrt(max(0.0, 1.0 - eps * eps))
    c[b0, a0, b0] = eps
    return ChannelSpec(n, dc, _embed(c, dc))


def build_saturating_nondiagonal(n: int, eps: float) -> ChannelSpec:
    if n < 2:
        raise OutOfRange("n must be at least 2")
    if not 0.0 < eps < 1.0:
        raise OutOfRange(f"eps={eps} outside (0, 1)")
    return nondiagonal_witness(n, 1, 2, eps)


def warm_start(tc: TransferConstraint, dc: int = 1) -> ChannelSpec | None:
    """A channel attaining the closed-form bounds for ``tc``, when one is known."""
    if isinstance(tc, DiagonalIdeal):
        return diagonal_witness(tc.n, {tc.a: 1.0}, dc=dc)
    if isinstance(tc, DiagonalNonIdeal):
        if tc.infeasibility_reason():
            return None
        return diagonal_witness(tc.n, tc.eps, dc=dc)
    if isinstance(tc, NondiagonalNonIdeal):
        return nondiagonal_witness(tc.n, tc.a, tc.b, tc.eps, dc=dc)
    if isinstance(tc, NondiagonalIdeal):
        return nondiagonal_witness(tc.n, tc.a, tc.b, 1.0, dc=dc)
    return None


@dataclass
class BoundReport:
    constraint: str
    pair: tuple
    theoretical: float
    achieved: float
    tolerance: float = BOUND_TOL

    @property
    def slack(self) -> float:
        return self.theoretical - self.achieved

    @property
    def violated(self) -> bool:
        return self.slack < -self.tolerance

    def to_dict(self):
        return {**asdict(self), "pair": list(self.pair), "slack": self.slack, "violated": self.violated}


def memory_bound(tc: TransferConstraint, pair: tuple, dc: int) -> tuple[float, float] | None:
    """``(bound, tolerance)`` on the memory about ``lam[pair]``, or None if no closed form applies."""
    x, y = pair
    if x == y:
        return None
    if isinstance(tc, (DiagonalIdeal, DiagonalNonIdeal)):
        eps = {tc.a: 1.0} if isinstance(tc, DiagonalIdeal) else tc.eps
        if x not in eps and y not in eps:
            return None
        ex, ey = eps.get(x, 0.0), eps.get(y, 0.0)
        bound = math.sqrt(max(0.0, (1.0 - ex) * (1.0 - ey)))
        return bound, THEOREM_TOL if bound == 0.0 else BOUND_TOL
    if isinstance(tc, NondiagonalIdeal) and {x, y} == {tc.a, tc.b}:
        return 0.0, THEOREM_TOL
    if isinstance(tc, NondiagonalNonIdeal) and {x, y} == {tc.a, tc.b} and dc == 1:
        bound = bound_nondiagonal(tc.eps)
        return bound, THEOREM_TOL if bound == 0.0 else BOUND_TOL
    if isinstance(tc, TwoStateDiagonal) and {x, y} == {1, 2}:
        return 0.0, THEOREM_TOL
    return None


def bound_reports(ch: ChannelSpec, tc: TransferConstraint) -> list[BoundReport]:
    table = memory_table(ch)
    out = []
    for (x, y), achieved in sorted(table.entries.items()):
        b = memory_bound(tc, (x, y), ch.dc)
        if b is not None:
            out.append(BoundReport(tc.kind, (x, y), b[0], achieved, b[1]))
    return out


def audit_bounds(ch: ChannelSpec, tc: TransferConstraint) -> list[BoundReport]:
    """Bound reports for ``ch``; raises :class:`BoundViolation` on any violation."""
    reports = bound_reports(ch, tc)
    bad = [r for r in reports if r.violated]
    if bad:
        raise BoundViolation(bad, channel=ch)
    return reports


def chain_function(phi_aa: float, phi_ab: float, phi_ba: float, phi_bb: float) -> float:
    """Right-hand side ``F`` of the c-number non-diagonal estimate.

    ``phi_uv = sum_k |c^u_kv|^2``; the square-root arguments are clipped at 0.
    """
    left = max(0.0, 1.0 - (phi_aa + phi_ab) ** 2)
    right = max(0.0, 1.0 - (phi_ba + phi_bb) ** 2)
    return phi_aa * phi_ba + phi_ab * phi_bb + math.sqrt(left * right)


def maximize_chain_function(eps: float, starts: int = 24, seed: int = 0) -> float:
    """Numerical maximum of :func:`chain_function` over its admissible region.

    Region: ``phi_aa * phi_bb >= eps^2``, ``phi_aa + phi_ab <= 1``,
    ``phi_bb + phi_ba <= 1``, all ``phi >= 0``.
    """
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    cons = [
        {"type": "ineq", "fun": lambda z: z[0] * z[3] - eps * eps},
        {"type": "ineq", "fun": lambda z: 1.0 - z[0] - z[1]},
        {"type": "ineq", "fun": lambda z: 1.0 - z[3] - z[2]},
    ]
    best = -np.inf
    for _ in range(starts):
        z0 = rng.uniform(0, 1, 4)
        z0[0] = z0[3] = rng.uniform(eps, 1.0)
        z0[1] = rng.uniform(0, 1 - z0[0])
        z0[2] = rng.uniform(0, 1 - z0[3])
        res = minimize(lambda z: -chain_function(*z), z0, method="SLSQP", bounds=[(0, 1)] * 4, constraints=cons)
        z = res.x
        feasible = z[0] * z[3] >= eps * eps - 1e-9 and z[0] + z[1] <= 1 + 1e-9 and z[3] + z[2] <= 1 + 1e-9
        if feasible:
            best = max(best, chain_function(*np.clip(z, 0, 1)))
    return float(best)


@dataclass
class ChainDiagnostic:
    """Each link of the c-number estimate for one ``dc = 1`` channel."""

    norm_sq: float
    phi: dict
    lam: complex
    expansion_gap: float  # |norm_sq - (phi phi + phi phi + Lambda)|
    expansion_rhs: float  # phi^a_a phi^b_a + phi^a_b phi^b_b + |Lambda|
    s1: float  # sum' (sum_k |c^a||c^a|)(sum_n |c^b||c^b|)
    s2: float  # sum' sqrt(phi phi phi phi)
    s3: float  # sqrt(sum' phi^a phi^a * sum' phi^b phi^b)
    s3_closed: float
    chain_f: float
    bound_sq: float

    def links(self) -> dict:
        """Named inequalities as ``lhs - rhs``; each must be <= CHAIN_TOL."""
        return {
            "expansion_identity": self.expansion_gap,
            "expansion": self.norm_sq - self.expansion_rhs,
            "triangle": abs(self.lam) - self.s1,
            "cauchy_schwarz_inner": self.s1 - self.s2,
            "cauchy_schwarz_outer": self.s2 - self.s3,
            "closed_form": abs(self.s3 - self.s3_closed),
            "product_bound": self.norm_sq - self.chain_f,
            "final_bound": self.chain_f - self.bound_sq,
        }

    def holds(self, tol: float = CHAIN_TOL) -> bool:
        return all(v <= tol for v in self.links().values())

    def to_dict(self):
        return {"norm_sq": self.norm_sq, "links": self.links(), "holds": self.holds()}


def inequality_chain(ch: ChannelSpec, tc: NondiagonalNonIdeal) -> ChainDiagnostic:
    """Evaluate the chain bounding ``||Theta_ab||^2`` for a ``dc = 1`` channel."""
    if ch.dc != 1:
        raise ValueError("the inequality chain is stated for a one-dimensional ancilla")
    a, b, n = tc.a - 1, tc.b - 1, ch.n
    c = ch.c[..., 0]  # c[u, k, l]
    phi = np.sum(np.abs(c) ** 2, axis=1)  # phi[u, v] = sum_k |c^u_kv|^2
    theta = np.einsum("kl,nl->kn", c[a], c[b].conj())
    norm_sq = float(np.sum(np.abs(theta) ** 2))
    amat = np.einsum("kl,ks->ls", c[a], c[a].conj())  # A[l, s]
    bmat = np.einsum("ns,nl->sl", c[b], c[b].conj())  # B[s, l]
    abs_a = np.einsum("kl,ks->ls", np.abs(c[a]), np.abs(c[a]))
    abs_b = np.einsum("ns,nl->sl", np.abs(c[b]), np.abs(c[b]))
    mask = np.ones((n, n), dtype=bool)
    for i in (a, b):
        for j in (a, b):
            mask[i, j] = False
    lam = complex(np.sum((amat * bmat.T)[mask]))
    s1 = float(np.sum((abs_a * abs_b.T)[mask]))
    pa, pb = phi[a], phi[b]
    s2 = float(np.sum(np.sqrt(np.outer(pa, pa) * np.outer(pb, pb))[mask]))
    s3 = float(np.sqrt(np.sum(np.outer(pa, pa)[mask]) * np.sum(np.outer(pb, pb)[mask])))
    s3_closed = math.sqrt(
        max(0.0, 1 - (pa[a] + pa[b]) ** 2) * max(0.0, 1 - (pb[a] + pb[b]) ** 2)
    )
    direct = pa[a] * pb[a] + pa[b] * pb[b]
    return ChainDiagnostic(
        norm_sq=norm_sq,
        phi={"aa": float(pa[a]), "ab": float(pa[b]), "ba": float(pb[a]), "bb": float(pb[b])},
        lam=lam,
        expansion_gap=float(abs(norm_sq - (direct + lam))),
        expansion_rhs=float(direct + abs(lam)),
        s1=s1,
        s2=s2,
        s3=s3,
        s3_closed=s3_closed,
        chain_f=chain_function(pa[a], pa[b], pb[a], pb[b]),
        bound_sq=1.0 - tc.eps**2,
    )
