"""Scenarios beyond basis-complete transfer.

Two-state prior: the source is known to be one of two non-commuting 2x2 states
``rho`` or ``chi``.

With ``rho_11 chi_12 = chi_11 rho_12`` (and the two states otherwise
distinct), transferring the diagonal element for both states still erases all
memory about the off-diagonal element, whereas transferring the off-diagonal
element for both states does not force any such erasure.

Real-part transfer: only ``Re lam_ab`` is transferred. Writing
``lam_ab = x + i y``, the source keeps ``x (Theta_ba + Theta_ab)`` and
``i y (Theta_ba - Theta_ab)``, so the memory about the imaginary part is
``||Theta_ba - Theta_ab|| / 2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .channel import ChannelSpec, channel_from_dict, channel_to_dict
from .constraints import (
    DISTINCT_TOL,
    RealPartIdeal,
    TwoStateDiagonal,
    TwoStateNondiagonal,
    relation_residual,
    check_two_state_relation,
    check_constraint,
    sample_satisfying_channel,
    structural_zero_report,
)
from .errors import ConstraintNotSatisfied, DegenerateStates, StatesCommute
from .memory import memory_table, theta_tensor
from .optimizer import OptimizerConfig, OptResult, maximize_memory
from .qcore import DensityMatrix, complex_from_json, complex_to_json, frobenius_norm, validate_density

EXAMPLE_RHO = np.array([[0.5, 0.125], [0.125, 0.5]])
EXAMPLE_CHI = np.array([[0.25, 0.0625], [0.0625, 0.75]])
COUNTEREXAMPLE_THRESHOLD = 0.05
GOLDEN_FILE = "two_state_counterexample.json"


@dataclass(frozen=True, eq=False)
class TwoStateSetup:
    rho: DensityMatrix
    chi: DensityMatrix
    relation_residual: float
    commutator_norm: float

    def diagonal_constraint(self, a: int = 1) -> TwoStateDiagonal:
        return TwoStateDiagonal(2, self.rho, self.chi, a)

    def nondiagonal_constraint(self) -> TwoStateNondiagonal:
        return TwoStateNondiagonal(2, self.rho, self.chi, 1, 2)

    def to_dict(self):
        return {
            "rho": complex_to_json(self.rho.mat),
            "chi": complex_to_json(self.chi.mat),
            "relation_residual": self.relation_residual,
            "commutator_norm": self.commutator_norm,
        }


def make_two_state_setup(rho, chi) -> TwoStateSetup:
    rho, chi = validate_density(rho), validate_density(chi)
    if rho.dim != 2 or chi.dim != 2:
        raise ValueError("the two-state scenario is defined for 2x2 states")
    if frobenius_norm(rho.mat - chi.mat) <= DISTINCT_TOL:
        raise DegenerateStates("rho and chi coincide")
    comm = frobenius_norm(rho.mat @ chi.mat - chi.mat @ rho.mat)
    if comm <= DISTINCT_TOL:
        raise StatesCommute(f"rho and chi commute (||[rho, chi]|| = {comm:.3e})")
    check_two_state_relation(rho.mat, chi.mat)
    return TwoStateSetup(rho, chi, relation_residual(rho.mat, chi.mat), comm)


def example_setup() -> TwoStateSetup:
    return make_two_state_setup(EXAMPLE_RHO, EXAMPLE_CHI)


@dataclass
class DiagonalTheoremReport:
    channels: int
    max_theta_12: float
    max_structural_zero: float
    max_residual: float
    per_channel: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.max_theta_12 <= 1e-7

    def to_dict(self):
        return {
            "channels": self.channels,
            "max_theta_12": self.max_theta_12,
            "max_structural_zero": self.max_structural_zero,
            "max_residual": self.max_residual,
            "holds": self.holds,
            "per_channel": self.per_channel,
        }


def sample_two_state_diagonal_channels(setup: TwoStateSetup, count: int, dc: int, seed: int = 0) -> list[ChannelSpec]:
    tc = setup.diagonal_constraint()
    return [sample_satisfying_channel(tc, dc=dc, seed=seed + i) for i in range(count)]


def verify_two_state_diagonal_theorem(setup: TwoStateSetup, channels, tol: float = 1e-10) -> DiagonalTheoremReport:
    """Memory about ``lam_12`` for channels transferring ``lam_11`` for both states."""
    tc = setup.diagonal_constraint()
    rows = []
    for ch in channels:
        res = check_constraint(ch, tc)
        if res > tol:
            raise ConstraintNotSatisfied(f"channel does not transfer rho_11 and chi_11 (residual {res:.3e})")
        zeros = structural_zero_report(ch, tc, tol=tol)
        table = memory_table(ch)
        rows.append(
            {
                "dc": ch.dc,
                "residual": res,
                "theta_12": max(table.entries[(1, 2)], table.entries[(2, 1)]),
                "structural_zero": zeros.max_norm,
            }
        )
    return DiagonalTheoremReport(
        channels=len(rows),
        max_theta_12=max((r["theta_12"] for r in rows), default=0.0),
        max_structural_zero=max((r["structural_zero"] for r in rows), default=0.0),
        max_residual=max((r["residual"] for r in rows), default=0.0),
        per_channel=rows,
    )


def search_two_state_nondiagonal_counterexample(setup: TwoStateSetup, cfg: OptimizerConfig | None = None) -> OptResult:
    """Maximize the memory about ``lam_12`` while ``lam_12`` is transferred for both states."""
    cfg = cfg or OptimizerConfig(dc=2)
    return maximize_memory(setup.nondiagonal_constraint(), (1, 2), cfg)


def counterexample_document(setup: TwoStateSetup, result: OptResult, cfg: OptimizerConfig) -> dict:
    table = memory_table(result.channel)
    return {
        "setup": setup.to_dict(),
        "config": dict(cfg.__dict__),
        "memory_12": result.achieved,
        "memory_rows": table.rows(),
        "constraint_residual": result.constraint_residual,
        "channel": channel_to_dict(result.channel),
    }


def load_golden() -> dict:
    text = resources.files("qtransfer").joinpath("data", GOLDEN_FILE).read_text()
    return json.loads(text)


@dataclass
class GoldenCheck:
    recorded: float
    memory_12: float
    constraint_residual: float

    @property
    def ok(self) -> bool:
        return (
            self.constraint_residual <= 1e-8
            and self.memory_12 >= self.recorded - 1e-6
            and self.memory_12 >= COUNTEREXAMPLE_THRESHOLD
        )


def verify_golden(doc: dict | None = None) -> GoldenCheck:
    """Re-verify the stored counterexample channel from scratch."""
    doc = doc or load_golden()
    setup = make_two_state_setup(complex_from_json(doc["setup"]["rho"]), complex_from_json(doc["setup"]["chi"]))
    ch = channel_from_dict(doc["channel"])
    res = check_constraint(ch, setup.nondiagonal_constraint())
    return GoldenCheck(float(doc["memory_12"]), memory_table(ch).entries[(1, 2)], res)


REAL_PART_TOL = 1e-6


@dataclass
class RealPartReport:
    """Largest memory norms over channels transferring ``Re lam_ab`` ideally."""

    channels: int
    diag_diff: float
    imag_memory: float
    real_memory: float
    max_residual: float

    @property
    def holds(self) -> bool:
        return self.diag_diff <= REAL_PART_TOL and self.imag_memory <= REAL_PART_TOL

    def to_dict(self):
        return {**self.__dict__, "holds": self.holds}


def real_part_memory(ch: ChannelSpec, a: int, b: int) -> tuple[float, float, float]:
    """``(||Theta_aa - Theta_bb||, imaginary-part memory, real-part memory)``."""
    th = theta_tensor(ch)
    tab, tba = th.block(a, b), th.block(b, a)
    return (
        frobenius_norm(th.block(a, a) - th.block(b, b)),
        0.5 * frobenius_norm(tba - tab),
        0.5 * frobenius_norm(tba + tab),
    )


def verify_real_part_claim(n: int, a: int, b: int, dc: int, count: int, seed: int = 0) -> RealPartReport:
    """Sample ``count`` channels satisfying ``RealPartIdeal`` and report their memory."""
    tc = RealPartIdeal(n, a, b)
    vals, res = [], []
    for i in range(count):
        ch = sample_satisfying_channel(tc, dc=dc, seed=seed + i)
        res.append(check_constraint(ch, tc))
        vals.append(real_part_memory(ch, a, b))
    worst = np.max(np.array(vals), axis=0) if vals else np.zeros(3)
    return RealPartReport(count, float(worst[0]), float(worst[1]), float(worst[2]), max(res, default=0.0))
