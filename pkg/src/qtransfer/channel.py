"""The coupling of source A to target B plus ancilla C, stored as an isometry.

The joint unitary only ever acts on ``|p> x |1_B> x |c>``, so only its
restriction is kept: the tensor ``c[p, k, l, m]`` holds the amplitude of
``|k>_A |l>_B |m>_C`` in the image ``psi_p`` of ``|p>_A``. Indices are 0-based
internally; everything user-facing (JSON keys aside) is 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DegenerateDraw, DimensionMismatch, InvalidChannel, ShapeMismatch
from .qcore import DensityMatrix, complex_from_json, complex_to_json, validate_density

ISOMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Amplitude tensor ``c[p, k, l, m]`` of shape ``(n, n, n, dc)``."""

    n: int
    dc: int
    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=complex, copy=True)
        if c.shape != (self.n, self.n, self.n, self.dc):
            raise ShapeMismatch(
                f"channel tensor has shape {c.shape}, expected {(self.n, self.n, self.n, self.dc)}"
            )
        if not np.all(np.isfinite(c)):
            raise ShapeMismatch("channel tensor has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_tensor(cls, c) -> "ChannelSpec":
        c = np.asarray(c, dtype=complex)
        if c.ndim != 4 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise ShapeMismatch(f"expected a (n, n, n, dc) tensor, got shape {c.shape}")
        return cls(c.shape[0], c.shape[3], c)

    @classmethod
    def from_isometry(cls, v, n: int, dc: int) -> "ChannelSpec":
        """Inverse of :meth:`isometry`; ``v`` has shape ``(n*n*dc, n)``."""
        v = np.asarray(v, dtype=complex)
        return cls(n, dc, v.T.reshape(n, n, n, dc))

    def isometry(self) -> np.ndarray:
        """Matrix whose column ``p`` is ``psi_p`` flattened over ``(k, l, m)``."""
        return self.c.reshape(self.n, -1).T

    def amplitude(self, p: int, k: int, l: int) -> np.ndarray:
        """The ancilla vector ``|c^p_kl>`` with 1-based indices."""
        return self.c[p - 1, k - 1, l - 1]


class IsometryResidual(NamedTuple):
    offdiag: float
    diag: float

    @property
    def worst(self) -> float:
        return max(self.offdiag, self.diag)

    def ok(self, tol: float = ISOMETRY_TOL) -> bool:
        return self.worst <= tol


def check_isometry(ch: ChannelSpec) -> IsometryResidual:
    """Residuals of ``<psi_p|psi_r> = delta_pr``."""
    v = ch.isometry()
    gram = v.conj().T @ v
    diag = float(np.max(np.abs(np.diagonal(gram) - 1.0)))
    off = gram - np.diag(np.diagonal(gram))
    return IsometryResidual(float(np.max(np.abs(off))) if ch.n > 1 else 0.0, diag)


def require_isometry(ch: ChannelSpec, tol: float = ISOMETRY_TOL) -> IsometryResidual:
    res = check_isometry(ch)
    if not res.ok(tol):
        raise InvalidChannel(
            f"isometry residual too large (offdiag {res.offdiag:.3e}, diag {res.diag:.3e}, tol {tol:.0e})"
        )
    return res


def reduced_states(ch: ChannelSpec, lam) -> tuple[np.ndarray, np.ndarray]:
    """Linear map ``lam -> (lam_tilde, r_tilde)`` with no validation.

    Works for any square ``lam`` (Hermitian or not), which is what the
    finite-difference derivative needs.
    """
    lam = np.asarray(lam, dtype=complex)
    if lam.shape != (ch.n, ch.n):
        raise DimensionMismatch(f"state has shape {lam.shape}, channel acts on dimension {ch.n}")
    c = ch.c
    lam_t = np.einsum("pr,pklm,rnlm->kn", lam, c, c.conj(), optimize=True)
    r_t = np.einsum("pr,pkam,rkbm->ab", lam, c, c.conj(), optimize=True)
    return lam_t, r_t


def apply_channel(ch: ChannelSpec, lam) -> tuple[DensityMatrix, DensityMatrix]:
    """Final states of A and of B for the initial source state ``lam``."""
    require_isometry(ch)
    lam = lam if isinstance(lam, DensityMatrix) else validate_density(lam)
    if lam.dim != ch.n:
        raise DimensionMismatch(f"state dimension {lam.dim} != channel dimension {ch.n}")
    lam_t, r_t = reduced_states(ch, lam.mat)
    return validate_density(_hermitize(lam_t)), validate_density(_hermitize(r_t))


def _hermitize(m: np.ndarray) -> np.ndarray:
    # rounding leaves ~1e-17 anti-Hermitian parts; remove them before validation
    return 0.5 * (m + m.conj().T)


def kraus_operators(ch: ChannelSpec, side: str = "A", tol: float = 1e-13) -> list[np.ndarray]:
    """Minimal Kraus set for ``lam -> lam_tilde`` (side A) or ``lam -> r_tilde`` (side B).

    The raw operators come straight from the isometry (one per traced-out
    basis vector); they are then compressed through an SVD of their stacked
    form, which drops zero operators and mixes the rest unitarily.
    """
    require_isometry(ch)
    n, dc = ch.n, ch.dc
    side = side.upper()
    if side == "A":
        raw = ch.c.transpose(2, 3, 1, 0).reshape(n * dc, n, n)
    elif side == "B":
        raw = ch.c.transpose(1, 3, 2, 0).reshape(n * dc, n, n)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    u, s, wh = np.linalg.svd(raw.reshape(n * dc, n * n), full_matrices=False)
    keep = s > tol
    return [s[i] * wh[i].reshape(n, n) for i in np.flatnonzero(keep)]


def apply_kraus(ops, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    return sum(k @ lam @ k.conj().T for k in ops)


def kraus_completeness_residual(ops) -> float:
    n = ops[0].shape[1]
    total = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(total - np.eye(n))))


@dataclass(frozen=True, eq=False)
class TransferTensor:
    """``t[a, b, p, r] = sum_k <c^r_kb | c^p_ka>`` (0-based storage).

    ``r_tilde[a, b] = sum_{p,r} lam[p, r] * t[a, b, p, r]``.
    """

    n: int
    t: np.ndarray

    def target_state(self, lam) -> np.ndarray:
        return np.einsum("pr,abpr->ab", np.asarray(lam, dtype=complex), self.t)


def transfer_tensor(ch: ChannelSpec) -> TransferTensor:
    t = np.einsum("pkam,rkbm->abpr", ch.c, ch.c.conj(), optimize=True)
    t.setflags(write=False)
    return TransferTensor(ch.n, t)


def identity_channel(n: int, dc: int = 1) -> ChannelSpec:
    """Nothing moves: ``c^p_kl = delta_kp delta_l1``."""
    c = np.zeros((n, n, n, dc), dtype=complex)
    for p in range(n):
        c[p, p, 0, 0] = 1.0
    return ChannelSpec(n, dc, c)


def swap_channel(n: int, dc: int = 1) -> ChannelSpec:
    """Full state transfer: ``c^p_kl = delta_k1 delta_lp``."""
    c = np.zeros((n, n, n, dc), dtype=complex)
    for p in range(n):
        c[p, 0, p, 0] = 1.0
    return ChannelSpec(n, dc, c)


def _orthonormalize(z: np.ndarray, rtol: float = 1e-8) -> np.ndarray | None:
    """Classical Gram-Schmidt with one re-orthogonalization pass."""
    q = np.zeros_like(z)
    for j in range(z.shape[1]):
        v = z[:, j].copy()
        scale = np.linalg.norm(v)
        for _ in range(2):
            v -= q[:, :j] @ (q[:, :j].conj().T @ v)
        nv = np.linalg.norm(v)
        if nv <= rtol * scale:
            return None
        q[:, j] = v / nv
    return q


def random_isometry_channel(n: int, dc: int, seed: int) -> ChannelSpec:
    if n < 2 or dc < 1:
        raise ValueError("need n >= 2 and dc >= 1")
    rng = np.random.default_rng(seed)
    dim = n * n * dc
    for _ in range(8):
        z = rng.standard_normal((dim, n)) + 1j * rng.standard_normal((dim, n))
        q = _orthonormalize(z)
        if q is not None:
            return ChannelSpec.from_isometry(q, n, dc)
    raise DegenerateDraw(f"could not draw a rank-{n} isometry after 8 attempts")


def polar_project(ch: ChannelSpec) -> ChannelSpec:
    """Closest isometry (polar factor) to the columns of ``ch``."""
    u, _, wh = np.linalg.svd(ch.isometry(), full_matrices=False)
    return ChannelSpec.from_isometry(u @ wh, ch.n, ch.dc)


def channel_to_dict(ch: ChannelSpec) -> dict:
    return {"n": ch.n, "dc": ch.dc, "c": complex_to_json(ch.c)}


def channel_from_dict(d: dict, validate: bool = True) -> ChannelSpec:
    try:
        n, dc = int(d["n"]), int(d["dc"])
        c = complex_from_json(d["c"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed channel document: {exc}") from exc
    ch = ChannelSpec(n, dc, c)
    if validate:
        require_isometry(ch)
    return ch


def save_channel(ch: ChannelSpec, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch)))


def load_channel(path, validate: bool = True) -> ChannelSpec:
    return channel_from_dict(json.loads(Path(path).read_text()), validate=validate)
