"""Constrained search over channel tensors.

Two modes share one compiled residual system (isometry rows + constraint
rows):

* feasibility: Gauss-Newton with minimum-norm steps. Residuals are evaluated
  in extended precision, because several constraints force vectors to zero
  only through squared norms and double-precision rounding would otherwise
  stall them near ``1e-8``. Degenerate faces are handled by restricting the
  support (see :meth:`Problem.project`);
* maximize: quadratic-penalty stages (L-BFGS on
  ``-||Theta||^2 + mu * |residual|^2``) followed by the same projection onto
  the admissible set and a polar re-orthonormalization.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import _forms
from .bounds import audit_bounds, memory_bound, warm_start
from .channel import ChannelSpec, channel_to_dict, check_isometry, polar_project, random_isometry_channel
from .constraints import TransferConstraint, check_constraint
from .errors import Infeasible
from .memory import memory_table

log = logging.getLogger(__name__)

ADMISSIBLE_TOL = 1e-8
PROJECTION_FLOOR = 1e-19
CONVERGED = 1e-17
FACE_RATIO = 1e-2
FACE_ITERS = 40


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 2000
    penalty_initial: float = 10.0
    penalty_factor: float = 10.0
    penalty_stages: int = 4
    tol: float = 1e-10
    seed: int = 0
    dc: int = 1
    warm_start: bool = True
    feasibility_restarts: int = 8
    projection_iters: int = 300
    workers: int = 1

    def __post_init__(self):
        for name in ("restarts", "max_iters", "penalty_stages", "dc", "feasibility_restarts", "projection_iters", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.penalty_initial <= 0 or self.penalty_factor <= 0 or self.tol <= 0:
            raise ValueError("penalty weights and tolerance must be positive")

    def penalties(self) -> list[float]:
        return [self.penalty_initial * self.penalty_factor**i for i in range(self.penalty_stages)]


class Problem:
    """Residual system and objective for one constraint, ancilla size and pair."""

    def __init__(self, tc: TransferConstraint, dc: int, pair: tuple | None = None):
        self.tc, self.n, self.dc, self.pair = tc, tc.n, dc, pair
        self.forms = _forms.admissibility_system(tc.n, dc, tc.rows())
        # memory about lam[a, c] is ||Theta[c, a]||
        self.theta = None if pair is None else _forms.theta_system(tc.n, dc, pair[1] - 1, pair[0] - 1)
        self.size = 2 * tc.n**3 * dc

    def residual_long(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.longdouble)
        return self.forms.real_values(x)

    def system(self, x):
        """Real residual vector and its Jacobian at ``x``."""
        return self.forms.real_system(x)

    def memory_terms(self, x):
        return self.theta.real_system(x)

    def penalized(self, x, mu):
        """``-||Theta||^2 + mu * |R|^2`` and its gradient (minimized)."""
        r, jr = self.system(x)
        if self.theta is None:
            return mu * (r @ r), 2 * mu * (jr.T @ r)
        m, jm = self.memory_terms(x)
        return -(m @ m) + mu * (r @ r), -2 * (jm.T @ m) + 2 * mu * (jr.T @ r)

    # -- projection ------------------------------------------------------

    def _gauss_newton(self, x, iters: int, mask=None, floor: float = PROJECTION_FLOOR):
        x = np.array(x, dtype=np.longdouble)
        if mask is not None:
            x[~mask] = 0
        r = self.residual_long(x)
        best = float(np.max(np.abs(r)))
        stall = 0
        for _ in range(iters):
            if best < floor:
                break
            _, jac = self.system(x.astype(float))
            step = np.zeros(x.size)
            cols = slice(None) if mask is None else mask
            step[cols] = np.linalg.lstsq(jac[:, cols], r.astype(float), rcond=1e-12)[0]
            t = 1.0
            for _ in range(12):
                x_new = x - t * step
                r_new = self.residual_long(x_new)
                if float(np.max(np.abs(r_new))) < best or t < 1e-3:
                    break
                t *= 0.5
            new = float(np.max(np.abs(r_new)))
            stall = stall + 1 if new > 0.9 * best else 0
            x, r = x_new, r_new
            best = min(best, new)
            if stall >= 8:
                break
        return x, best

    def _block_mask(self, zero) -> np.ndarray:
        keep = np.broadcast_to(~zero[:, None, :, None], (self.n,) * 3 + (self.dc,)).ravel()
        return np.concatenate([keep, keep])

    def project(self, x, iters: int = 300) -> np.ndarray:
        """Gauss-Newton with minimum-norm steps onto ``R(x) = 0``.

        Some constraints pin the feasible set to a face on which whole
        blocks ``c[p, :, a, :]`` vanish, and near that face the residual only
        falls off like the fourth power of the distance. When plain
        iteration stalls, the smallest blocks are set to zero one at a time
        and the iteration is restarted on that support; a face is kept only
        if the restricted problem converges to ``CONVERGED``.
        """
        x, best = self._gauss_newton(x, iters)
        if best < CONVERGED:
            return x.astype(float)
        c = _forms.unpack(x.astype(float), self.n, self.dc)
        norms = np.linalg.norm(c, axis=(1, 3))  # [p, a]
        order = np.argsort(norms, axis=None)
        small = order[norms.ravel()[order] <= FACE_RATIO * norms.max()]
        zero = np.zeros((self.n, self.n), dtype=bool)
        for j in small:
            zero.ravel()[j] = True
            xf, bf = self._gauss_newton(x, FACE_ITERS, self._block_mask(zero))
            if bf < CONVERGED:
                log.debug("projection settled on a face with %d zero blocks", zero.sum())
                return xf.astype(float)
        return x.astype(float)

    def channel(self, x) -> ChannelSpec:
        return ChannelSpec(self.n, self.dc, _forms.unpack(np.asarray(x, dtype=float), self.n, self.dc))


def _admissibility(ch: ChannelSpec, tc: TransferConstraint) -> tuple[float, float]:
    return check_isometry(ch).worst, check_constraint(ch, tc)


def _restart_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(count)]


def find_feasible(tc: TransferConstraint, cfg: OptimizerConfig, tol: float = 1e-10) -> ChannelSpec:
    """Seeded random start projected onto the admissible set."""
    reason = tc.infeasibility_reason()
    if reason:
        raise Infeasible(reason, proven=True)
    prob = Problem(tc, cfg.dc)
    for s in _restart_seeds(cfg.seed, cfg.feasibility_restarts):
        x0 = _forms.pack(random_isometry_channel(tc.n, cfg.dc, s).c)
        ch = polar_project(prob.channel(prob.project(x0, cfg.projection_iters)))
        iso, con = _admissibility(ch, tc)
        if iso <= tol and con <= tol:
            return ch
        log.debug("feasibility restart seed %d failed (iso %.2e, constraint %.2e)", s, iso, con)
    raise Infeasible(f"no channel satisfying {tc.kind} within {tol:.0e} after {cfg.feasibility_restarts} restarts")


@dataclass
class RestartTrace:
    index: int
    seed: int | None
    warm: bool
    achieved: float
    isometry_residual: float
    constraint_residual: float
    admissible: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class OptResult:
    channel: ChannelSpec
    pair: tuple
    achieved: float
    constraint_residual: float
    isometry_residual: float
    bound: float | None
    trace: list = field(default_factory=list)
    best_index: int = 0

    @property
    def slack(self) -> float | None:
        return None if self.bound is None else self.bound - self.achieved

    def cold_best(self) -> float | None:
        vals = [t.achieved for t in self.trace if t.admissible and not t.warm]
        return max(vals) if vals else None

    def warm_achieved(self) -> float | None:
        vals = [t.achieved for t in self.trace if t.admissible and t.warm]
        return vals[0] if vals else None

    def to_dict(self, with_channel: bool = True) -> dict:
        d = {
            "pair": list(self.pair),
            "achieved": self.achieved,
            "bound": self.bound,
            "slack": self.slack,
            "constraint_residual": self.constraint_residual,
            "isometry_residual": self.isometry_residual,
            "best_index": self.best_index,
            "warm_achieved": self.warm_achieved(),
            "cold_best": self.cold_best(),
            "trace": [t.to_dict() for t in self.trace],
        }
        if with_channel:
            d["channel"] = channel_to_dict(self.channel)
        return d


def _one_restart(args):
    tc, pair, cfg, index, seed, start = args
    prob = Problem(tc, cfg.dc, pair)
    x = _forms.pack(start.c if start is not None else random_isometry_channel(tc.n, cfg.dc, seed).c)
    for mu in cfg.penalties():
        res = minimize(
            prob.penalized,
            x,
            args=(mu,),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": cfg.max_iters, "ftol": cfg.tol * 1e-5, "gtol": 1e-12},
        )
        x = res.x
    ch = polar_project(prob.channel(prob.project(x, cfg.projection_iters)))
    iso, con = _admissibility(ch, tc)
    achieved = memory_table(ch).entries[tuple(pair)]
    ok = iso <= ADMISSIBLE_TOL and con <= ADMISSIBLE_TOL
    trace = RestartTrace(index, seed, start is not None, achieved, iso, con, ok)
    return ch, trace


def maximize_memory(tc: TransferConstraint, pair: tuple, cfg: OptimizerConfig | None = None) -> OptResult:
    """Largest memory about ``lam[pair]`` (1-based) over channels satisfying ``tc``.

    Restart 0 starts from the known bound-attaining construction when one
    exists for the constraint kind. The best admissible restart wins, ties
    going to the lowest index. The winner is audited against every
    closed-form bound; a violation raises :class:`BoundViolation`.
    """
    cfg = cfg or OptimizerConfig()
    pair = tuple(int(i) for i in pair)
    if not all(1 <= i <= tc.n for i in pair):
        raise ValueError(f"pair {pair} outside 1..{tc.n}")
    reason = tc.infeasibility_reason()
    if reason:
        raise Infeasible(reason, proven=True)

    jobs = []
    seeds = _restart_seeds(cfg.seed, cfg.restarts)
    warm = warm_start(tc, cfg.dc) if cfg.warm_start else None
    for i, s in enumerate(seeds):
        if i == 0 and warm is not None:
            jobs.append((tc, pair, cfg, i, None, warm))
        else:
            jobs.append((tc, pair, cfg, i, s, None))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_one_restart, jobs))
    else:
        outcomes = [_one_restart(j) for j in jobs]

    best = None
    for ch, tr in outcomes:
        if tr.admissible and (best is None or tr.achieved > best[1].achieved + 1e-12):
            best = (ch, tr)
    traces = [tr for _, tr in outcomes]
    if best is None:
        raise Infeasible(f"no restart reached admissibility for {tc.kind}")
    ch, tr = best
    audit_bounds(ch, tc)
    b = memory_bound(tc, pair, cfg.dc)
    return OptResult(
        channel=ch,
        pair=pair,
        achieved=tr.achieved,
        constraint_residual=tr.constraint_residual,
        isometry_residual=tr.isometry_residual,
        bound=None if b is None else b[0],
        trace=traces,
        best_index=tr.index,
    )


@dataclass
class SweepRow:
    eps: float
    achieved: float
    bound: float | None
    warm_achieved: float | None
    cold_best: float | None

    @property
    def slack(self):
        return None if self.bound is None else self.bound - self.achieved

    def to_dict(self):
        return {**self.__dict__, "slack": self.slack}


@dataclass
class SweepResult:
    rows: list
    monotone_nonincreasing: bool
    results: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "monotone_nonincreasing": self.monotone_nonincreasing}


def sweep(make_constraint, grid, pair, cfg: OptimizerConfig | None = None, mono_tol: float = 1e-6) -> SweepResult:
    """One :func:`maximize_memory` run per ``eps`` in ``grid``, sorted by ``eps``."""
    cfg = cfg or OptimizerConfig()
    grid = sorted(float(e) for e in grid)
    if not grid:
        raise ValueError("empty eps grid")
    rows, results = [], []
    for eps in grid:
        res = maximize_memory(make_constraint(eps), pair, cfg)
        results.append(res)
        rows.append(SweepRow(eps, res.achieved, res.bound, res.warm_achieved(), res.cold_best()))
    mono = all(b.achieved <= a.achieved + mono_tol for a, b in zip(rows, rows[1:]))
    return SweepResult(rows, mono, results)


@dataclass
class GradientCheck:
    applicable: bool
    max_relative_deviation: float
    gauge_derivative: float
    points: int

    def to_dict(self):
        return dict(self.__dict__)


def gradient_check(
    tc: TransferConstraint,
    pair: tuple | None,
    cfg: OptimizerConfig | None = None,
    point: np.ndarray | None = None,
    points: int = 10,
    h: float = 1e-6,
    mu: float | None = None,
) -> GradientCheck:
    """Analytic gradient of the penalized objective against central differences.

    Also reports the derivative along the global-phase direction
    ``c -> exp(i t) c``, under which the objective is invariant.
    """
    cfg = cfg or OptimizerConfig()
    prob = Problem(tc, cfg.dc, pair)
    mu = cfg.penalty_initial if mu is None else mu
    rng = np.random.default_rng(cfg.seed)
    if point is not None:
        pts = [np.asarray(point, dtype=float)]
    else:
        pts = [rng.standard_normal(prob.size) / np.sqrt(prob.size / tc.n) for _ in range(points)]
    worst, gauge = 0.0, 0.0
    for x in pts:
        _, g = prob.penalized(x, mu)
        fd = np.empty_like(g)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (prob.penalized(x + e, mu)[0] - prob.penalized(x - e, mu)[0]) / (2 * h)
        scale = max(np.max(np.abs(g)), np.max(np.abs(fd)), 1e-12)
        worst = max(worst, float(np.max(np.abs(g - fd)) / scale))
        half = x.size // 2
        phase_dir = np.concatenate([-x[half:], x[:half]])
        gauge = max(gauge, float(abs(g @ phase_dir)) / max(1.0, float(np.linalg.norm(g) * np.linalg.norm(phase_dir))))
    return GradientCheck(True, worst, gauge, len(pts))


def with_overrides(cfg: OptimizerConfig, **kwargs) -> OptimizerConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
