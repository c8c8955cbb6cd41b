"""Which matrix elements of the source must reappear in the target, and how well.

Because ``lam -> r_tilde`` is linear, "for every initial state" reduces to
linear conditions on the transfer tensor. Each constraint compiles to a list
of :class:`Row` objects, ``sum_terms sum_{p,r} W[p,r] t[a,b,p,r] = target``,
which both the residual check and the optimizer consume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .channel import ChannelSpec, transfer_tensor
from .errors import ConstraintNotSatisfied, DimensionMismatch, InvalidConstraint
from .qcore import DensityMatrix, complex_from_json, complex_to_json, validate_density

RELATION_TOL = 1e-12
DISTINCT_TOL = 1e-9
STRUCTURAL_ZERO_TOL = 1e-7


@dataclass(frozen=True)
class Row:
    terms: tuple  # ((a, b, W), ...) with 0-based a, b
    target: complex


def _unit(n, p, r):
    w = np.zeros((n, n))
    w[p, r] = 1.0
    return w


def _element_rows(n, a, b, target_of):
    """One row per matrix unit ``E_pr`` on the ``(a, b)`` slice of ``t``."""
    return [Row(((a, b, _unit(n, p, r)),), target_of(p, r)) for p in range(n) for r in range(n)]


def _check_index(n, *idx):
    for i in idx:
        if not 1 <= i <= n:
            raise InvalidConstraint(f"index {i} outside 1..{n}")


def _check_eps(eps):
    if not 0.0 < eps <= 1.0:
        raise InvalidConstraint(f"non-ideality {eps} outside (0, 1]")


@dataclass(frozen=True)
class TransferConstraint:
    n: int
    kind: ClassVar[str] = ""

    def rows(self) -> list[Row]:
        raise NotImplementedError

    def infeasibility_reason(self) -> str | None:
        """Non-None when the constraint is provably unsatisfiable."""
        return None

    def structural_zero_blocks(self) -> dict:
        """Named groups of ``(p, k, l)`` blocks (0-based) forced to vanish."""
        return {}

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": {"n": self.n, **self.params()}}

    def residual_for(self, ch: ChannelSpec) -> float:
        return check_constraint(ch, self)


@dataclass(frozen=True)
class DiagonalIdeal(TransferConstraint):
    a: int = 1
    kind: ClassVar[str] = "diag-ideal"

    def __post_init__(self):
        _check_index(self.n, self.a)

    def rows(self):
        a = self.a - 1
        return _element_rows(self.n, a, a, lambda p, r: float(p == a and r == a))

    def structural_zero_blocks(self):
        a, n = self.a - 1, self.n
        return {
            f"c^{self.a}_kl, l!={self.a}": [(a, k, l) for k in range(n) for l in range(n) if l != a],
            f"c^p_k{self.a}, p!={self.a}": [(p, k, a) for p in range(n) if p != a for k in range(n)],
        }

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True)
class DiagonalNonIdeal(TransferConstraint):
    pairs: tuple = ()  # ((u, eps_u), ...) with 1-based u
    kind: ClassVar[str] = "diag-nonideal"

    def __post_init__(self):
        pairs = tuple((int(u), float(e)) for u, e in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise InvalidConstraint("at least one (index, eps) pair required")
        us = [u for u, _ in pairs]
        if len(set(us)) != len(us):
            raise InvalidConstraint("duplicate transferred index")
        for u, e in pairs:
            _check_index(self.n, u)
            _check_eps(e)

    @property
    def eps(self) -> dict:
        return dict(self.pairs)

    def rows(self):
        out = []
        for u, e in self.pairs:
            u0 = u - 1
            out += _element_rows(self.n, u0, u0, lambda p, r, u0=u0, e=e: e * float(p == u0 and r == u0))
        return out

    def infeasibility_reason(self):
        # trace conservation: if every diagonal element is transferred, tr r_tilde = sum eps_u lam_uu
        if len(self.pairs) == self.n and any(e < 1.0 for _, e in self.pairs):
            return (
                f"all {self.n} diagonal elements transferred with some eps < 1: "
                "the target trace could not be conserved"
            )
        return None

    def structural_zero_blocks(self):
        n = self.n
        blocks = {}
        for u, _ in self.pairs:
            u0 = u - 1
            blocks[f"c^p_k{u}, p!={u}"] = [(p, k, u0) for p in range(n) if p != u0 for k in range(n)]
        return blocks

    def params(self):
        return {"pairs": [[u, e] for u, e in self.pairs]}


@dataclass(frozen=True)
class NondiagonalIdeal(TransferConstraint):
    a: int = 1
    b: int = 2
    kind: ClassVar[str] = "nondiag-ideal"

    def __post_init__(self):
        _check_index(self.n, self.a, self.b)
        if self.a == self.b:
            raise InvalidConstraint("non-diagonal transfer needs a != b")

    def rows(self):
        a, b = self.a - 1, self.b - 1
        return _element_rows(self.n, a, b, lambda p, r: float(p == a and r == b))

    def structural_zero_blocks(self):
        a, b, n = self.a - 1, self.b - 1, self.n
        return {
            f"c^{self.a}_kl, l!={self.a}": [(a, k, l) for k in range(n) for l in range(n) if l != a],
            f"c^{self.b}_kl, l!={self.b}": [(b, k, l) for k in range(n) for l in range(n) if l != b],
        }

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class NondiagonalNonIdeal(TransferConstraint):
    a: int = 1
    b: int = 2
    eps: float = 1.0
    kind: ClassVar[str] = "nondiag-nonideal"

    def __post_init__(self):
        _check_index(self.n, self.a, self.b)
        if self.a == self.b:
            raise InvalidConstraint("non-diagonal transfer needs a != b")
        _check_eps(self.eps)

    def rows(self):
        a, b, e = self.a - 1, self.b - 1, self.eps
        return _element_rows(self.n, a, b, lambda p, r: e * float(p == a and r == b))

    def params(self):
        return {"a": self.a, "b": self.b, "eps": self.eps}


@dataclass(frozen=True)
class RealPartIdeal(TransferConstraint):
    """``Re r_tilde[a,b] = Re lam[a,b]`` for every Hermitian ``lam``.

    With ``r_tilde`` Hermitian this is ``t[a,b] + t[b,a] = E_ab + E_ba`` as
    matrices over ``(p, r)``.
    """

    a: int = 1
    b: int = 2
    kind: ClassVar[str] = "real-part-ideal"

    def __post_init__(self):
        _check_index(self.n, self.a, self.b)
        if self.a == self.b:
            raise InvalidConstraint("real-part transfer needs a != b")

    def rows(self):
        a, b, n = self.a - 1, self.b - 1, self.n
        out = []
        for p in range(n):
            for r in range(n):
                w = _unit(n, p, r)
                target = float((p == a and r == b) or (p == b and r == a))
                out.append(Row(((a, b, w), (b, a, w)), target))
        return out

    def params(self):
        return {"a": self.a, "b": self.b}


def relation_residual(rho, chi) -> float:
    rho, chi = np.asarray(rho), np.asarray(chi)
    return float(abs(rho[0, 0] * chi[0, 1] - chi[0, 0] * rho[0, 1]))


def check_two_state_relation(rho, chi) -> None:
    from .errors import CastroViolated

    res = relation_residual(rho, chi)
    if res > RELATION_TOL:
        raise CastroViolated(f"rho_11 chi_12 != chi_11 rho_12 (residual {res:.3e})")
    if abs(rho[0, 0] - chi[0, 0]) <= DISTINCT_TOL:
        raise CastroViolated("rho_11 must differ from chi_11")
    if abs(rho[0, 1] - chi[0, 1]) <= DISTINCT_TOL:
        raise CastroViolated("rho_12 must differ from chi_12")


@dataclass(frozen=True, eq=False)
class _TwoState(TransferConstraint):
    rho: DensityMatrix = None
    chi: DensityMatrix = None

    def _validate_states(self):
        if self.n != 2:
            raise InvalidConstraint("two-state constraints are defined for n = 2")
        rho = self.rho if isinstance(self.rho, DensityMatrix) else validate_density(self.rho)
        chi = self.chi if isinstance(self.chi, DensityMatrix) else validate_density(self.chi)
        if rho.dim != 2 or chi.dim != 2:
            raise InvalidConstraint("two-state constraints need 2x2 states")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "chi", chi)
        try:
            check_two_state_relation(rho.mat, chi.mat)
        except Exception as exc:
            raise InvalidConstraint(str(exc)) from exc

    def params(self):
        return {"rho": complex_to_json(self.rho.mat), "chi": complex_to_json(self.chi.mat)}


@dataclass(frozen=True, eq=False)
class TwoStateDiagonal(_TwoState):
    """``r_tilde[a,a] = lam[a,a]`` only for ``lam`` in ``{rho, chi}``."""

    a: int = 1
    kind: ClassVar[str] = "two-state-diag"

    def __post_init__(self):
        self._validate_states()
        _check_index(self.n, self.a)

    def rows(self):
        a = self.a - 1
        return [Row(((a, a, lam.mat),), lam.mat[a, a]) for lam in (self.rho, self.chi)]

    def structural_zero_blocks(self):
        return DiagonalIdeal(self.n, self.a).structural_zero_blocks()

    def params(self):
        return {**super().params(), "a": self.a}


@dataclass(frozen=True, eq=False)
class TwoStateNondiagonal(_TwoState):
    """``r_tilde[a,b] = lam[a,b]`` only for ``lam`` in ``{rho, chi}``."""

    a: int = 1
    b: int = 2
    kind: ClassVar[str] = "two-state-nondiag"

    def __post_init__(self):
        self._validate_states()
        _check_index(self.n, self.a, self.b)
        if self.a == self.b:
            raise InvalidConstraint("non-diagonal transfer needs a != b")

    def rows(self):
        a, b = self.a - 1, self.b - 1
        return [Row(((a, b, lam.mat),), lam.mat[a, b]) for lam in (self.rho, self.chi)]

    def params(self):
        return {**super().params(), "a": self.a, "b": self.b}


KINDS = {
    cls.kind: cls
    for cls in (
        DiagonalIdeal,
        DiagonalNonIdeal,
        NondiagonalIdeal,
        NondiagonalNonIdeal,
        RealPartIdeal,
        TwoStateDiagonal,
        TwoStateNondiagonal,
    )
}


def constraint_from_dict(d: dict) -> TransferConstraint:
    try:
        cls = KINDS[d["kind"]]
    except KeyError as exc:
        raise InvalidConstraint(f"unknown constraint kind {d.get('kind')!r}") from exc
    params = dict(d.get("params", {}))
    for key in ("rho", "chi"):
        if key in params:
            params[key] = complex_from_json(params[key])
    if "pairs" in params:
        params["pairs"] = tuple(tuple(p) for p in params["pairs"])
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidConstraint(f"bad parameters for {cls.kind}: {exc}") from exc


def row_values(c: np.ndarray, rows) -> np.ndarray:
    t = np.einsum("pkam,rkbm->abpr", c, c.conj(), optimize=True)
    vals = np.empty(len(rows), dtype=complex)
    for i, row in enumerate(rows):
        vals[i] = sum(np.sum(w * t[a, b]) for a, b, w in row.terms) - row.target
    return vals


def check_constraint(ch: ChannelSpec, tc: TransferConstraint) -> float:
    """Largest deviation over the constraint's linear conditions."""
    if ch.n != tc.n:
        raise DimensionMismatch(f"channel dimension {ch.n} != constraint dimension {tc.n}")
    if isinstance(tc, _TwoState):
        # only two states are constrained; evaluate the target state directly
        tt = transfer_tensor(ch)
        devs = []
        for row in tc.rows():
            (a, b, lam), = row.terms
            devs.append(abs(tt.target_state(lam)[a, b] - row.target))
        return float(max(devs))
    return float(np.max(np.abs(row_values(ch.c, tc.rows()))))


@dataclass
class StructuralZeroReport:
    constraint: str
    residual: float
    blocks: dict = field(default_factory=dict)  # name -> max vector norm

    @property
    def max_norm(self) -> float:
        return max(self.blocks.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_norm <= STRUCTURAL_ZERO_TOL

    def to_dict(self):
        return {"constraint": self.constraint, "residual": self.residual, "blocks": self.blocks, "ok": self.ok}


def structural_zero_report(ch: ChannelSpec, tc: TransferConstraint, tol: float = 1e-8) -> StructuralZeroReport:
    """Norms of the ancilla vectors that satisfying the constraint forces to zero."""
    res = check_constraint(ch, tc)
    if res > tol:
        raise ConstraintNotSatisfied(f"constraint {tc.kind} residual {res:.3e} exceeds {tol:.0e}")
    blocks = {}
    for name, idx in tc.structural_zero_blocks().items():
        blocks[name] = float(max(np.linalg.norm(ch.c[p, k, l]) for p, k, l in idx)) if idx else 0.0
    if isinstance(tc, NondiagonalIdeal):
        a, b = tc.a - 1, tc.b - 1
        blocks[f"c^{tc.b}_k{tc.b} - c^{tc.a}_k{tc.a}"] = float(np.linalg.norm(ch.c[b, :, b] - ch.c[a, :, a]))
    return StructuralZeroReport(tc.kind, res, blocks)


def sample_satisfying_channel(
    tc: TransferConstraint, n: int | None = None, dc: int = 1, seed: int = 0, tol: float = 1e-10
) -> ChannelSpec:
    """Random channel satisfying ``tc``, found by feasibility search from a seeded start."""
    from .optimizer import OptimizerConfig, find_feasible

    if n is not None and n != tc.n:
        raise DimensionMismatch(f"requested n={n} but constraint has n={tc.n}")
    cfg = OptimizerConfig(seed=seed, dc=dc)
    return find_feasible(tc, cfg, tol=tol)
