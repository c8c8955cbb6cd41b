"""How much the final source state still depends on each initial matrix element.

``lam_tilde = sum_{p,r} lam[p, r] * Theta[r, p]`` with
``Theta[r, p][k, n] = sum_l <c^r_nl | c^p_kl>``. The Wirtinger derivative of
``lam_tilde`` with respect to ``lam[a, c]`` is therefore ``Theta[c, a]`` and its
Frobenius norm is the memory about that element.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, reduced_states
from .errors import StepTooSmall
from .qcore import frobenius_norm, maximally_mixed

NORM_CEILING = 1.0 + 1e-9


@dataclass(frozen=True, eq=False)
class ThetaTensor:
    """``theta[r, p, k, n]`` in 0-based storage; :meth:`block` takes 1-based indices."""

    n: int
    theta: np.ndarray

    def block(self, r: int, p: int) -> np.ndarray:
        return self.theta[r - 1, p - 1]

    def final_source_state(self, lam) -> np.ndarray:
        return np.einsum("pr,rpkn->kn", np.asarray(lam, dtype=complex), self.theta)


def theta_tensor(ch: ChannelSpec) -> ThetaTensor:
    th = np.einsum("pklm,rnlm->rpkn", ch.c, ch.c.conj(), optimize=True)
    th.setflags(write=False)
    return ThetaTensor(ch.n, th)


def element_memory(th: ThetaTensor, a: int, c: int) -> float:
    """Memory about ``lam[a, c]`` (1-based), i.e. ``||Theta[c, a]||``."""
    return frobenius_norm(th.block(c, a))


@dataclass
class MemoryTable:
    """Memory norms keyed by 1-based element indices.

    ``entries[(a, c)]`` is the memory about ``lam[a, c]`` (diagonal pairs
    included) and ``diag_diff[(a, b)] = ||Theta_aa - Theta_bb||`` for ``a < b``.
    """

    n: int
    entries: dict = field(default_factory=dict)
    diag_diff: dict = field(default_factory=dict)

    def offdiag(self, a: int, c: int) -> float:
        return self.entries[(a, c)]

    def max_entry(self) -> float:
        vals = list(self.entries.values()) + list(self.diag_diff.values())
        return max(vals) if vals else 0.0

    def rows(self) -> list[dict]:
        out = []
        for (a, c), v in sorted(self.entries.items()):
            out.append({"a": a, "c": c, "norm": v, "kind": "diag" if a == c else "offdiag"})
        for (a, b), v in sorted(self.diag_diff.items()):
            out.append({"a": a, "c": b, "norm": v, "kind": "diag_diff"})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["a", "c", "norm", "kind"], lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({**row, "norm": repr(row["norm"])})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"n": self.n, "rows": self.rows()}


def memory_table(ch: ChannelSpec) -> MemoryTable:
    th = theta_tensor(ch)
    n = ch.n
    table = MemoryTable(n)
    for a in range(1, n + 1):
        for c in range(1, n + 1):
            table.entries[(a, c)] = element_memory(th, a, c)
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            table.diag_diff[(a, b)] = frobenius_norm(th.block(a, a) - th.block(b, b))
    return table


def wirtinger_fd(ch: ChannelSpec, a: int, c: int, h: float = 1e-5) -> np.ndarray:
    """Finite-difference Wirtinger derivative of ``lam_tilde`` w.r.t. ``lam[a, c]``.

    Central differences along ``Re lam[a, c]`` and ``Im lam[a, c]``, with
    ``lam[c, a]`` moved conjugately so the perturbed state stays Hermitian,
    combined as ``(d/dRe - i d/dIm) / 2``. Independent of :func:`theta_tensor`;
    the result should equal ``Theta[c, a]``.
    """
    if h < 1e-12:
        raise StepTooSmall(f"finite-difference step {h:g} is below 1e-12")
    if a == c:
        raise ValueError("wirtinger_fd is defined for off-diagonal elements (a != c)")
    i, j = a - 1, c - 1
    base = maximally_mixed(ch.n).mat

    def source(delta: complex) -> np.ndarray:
        lam = np.array(base, dtype=complex)
        lam[i, j] += delta
        lam[j, i] += np.conj(delta)
        return reduced_states(ch, lam)[0]

    d_re = (source(h) - source(-h)) / (2 * h)
    d_im = (source(1j * h) - source(-1j * h)) / (2 * h)
    return 0.5 * (d_re - 1j * d_im)
