"""Values and real Jacobians of the sesquilinear forms built from the tensor ``c``.

Every quantity here (Gram entries, transfer-tensor rows, Theta entries) has the
form ``q = sum A_xy c_x conj(c_y)`` over the flattened tensor. Its holomorphic
derivative ``H = dq/dc`` and anti-holomorphic derivative ``A = dq/dconj(c)``
give the derivative with respect to the real parameters ``x = [Re c, Im c]``:

    dq/dRe c = H + A,     dq/dIm c = i (H - A).

Coefficients of a row are merged before evaluation, so terms that cancel
algebraically cancel exactly instead of leaving rounding noise behind.
"""
from __future__ import annotations

import numpy as np


def pack(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c).ravel()
    return np.concatenate([c.real, c.imag])


def unpack(x: np.ndarray, n: int, dc: int) -> np.ndarray:
    half = x.size // 2
    return (x[:half] + 1j * x[half:]).reshape(n, n, n, dc)


def real_jacobian(h: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``d Re q / dx`` and ``d Im q / dx`` from flattened ``H`` and ``A``."""
    ju = h + a
    jv = 1j * (h - a)
    return np.hstack([ju.real, jv.real]), np.hstack([ju.imag, jv.imag])


def stack_complex(values: np.ndarray, h: np.ndarray, a: np.ndarray):
    """Interleave real and imaginary parts into one real residual system."""
    jr, ji = real_jacobian(h, a)
    return np.concatenate([values.real, values.imag]), np.vstack([jr, ji])


class FormBuilder:
    """Collects ``(row, x, y, coef)`` entries for a :class:`FormSystem`."""

    def __init__(self, n: int, dc: int):
        self.n, self.dc = n, dc
        self.index = np.arange(n**3 * dc).reshape(n, n, n, dc)
        self.rows = 0
        self.consts: list[complex] = []
        self._parts: list[tuple] = []

    def new_row(self, const: complex = 0.0) -> int:
        self.consts.append(complex(const))
        self.rows += 1
        return self.rows - 1

    def add(self, row: int, x, y, coef) -> None:
        x, y = np.ravel(x), np.ravel(y)
        coef = np.broadcast_to(np.asarray(coef, dtype=complex), x.shape)
        self._parts.append((np.full(x.size, row), x, y, coef))

    def gram(self, row: int, p: int, r: int, coef: complex = 1.0) -> None:
        """``coef * <psi_p|psi_r>``."""
        self.add(row, self.index[r], self.index[p], coef)

    def transfer(self, row: int, a: int, b: int, w) -> None:
        """``sum_{p,r} w[p,r] t[a,b,p,r]`` with ``t[a,b,p,r] = sum_{k,m} c[p,k,a,m] conj(c[r,k,b,m])``."""
        w = np.asarray(w, dtype=complex)
        for p, r in zip(*np.nonzero(w)):
            self.add(row, self.index[p, :, a, :], self.index[r, :, b, :], w[p, r])

    def theta(self, row: int, r: int, p: int, k: int, nn: int) -> None:
        """``Theta[r, p][k, nn] = sum_{l,m} c[p,k,l,m] conj(c[r,nn,l,m])``."""
        self.add(row, self.index[p, k], self.index[r, nn], 1.0)

    def build(self) -> "FormSystem":
        return FormSystem(self.n, self.dc, self._parts, np.array(self.consts, dtype=complex))


class FormSystem:
    """Rows ``q_i(c) = sum_e coef_e c[x_e] conj(c[y_e]) - const_i``."""

    def __init__(self, n: int, dc: int, parts, consts: np.ndarray):
        self.n, self.dc = n, dc
        self.size = n**3 * dc
        self.m = len(consts)
        self.consts = consts
        big = self.size
        # every row gets a zero entry so that no row is empty
        rows = [np.arange(self.m)] + [p[0] for p in parts]
        xs = [np.zeros(self.m, dtype=int)] + [p[1] for p in parts]
        ys = [np.zeros(self.m, dtype=int)] + [p[2] for p in parts]
        cs = [np.zeros(self.m, dtype=complex)] + [p[3] for p in parts]
        key = (np.concatenate(rows) * big + np.concatenate(xs)) * big + np.concatenate(ys)
        coef = np.concatenate(cs)
        uniq, inv = np.unique(key, return_inverse=True)
        merged = np.bincount(inv, coef.real, uniq.size) + 1j * np.bincount(inv, coef.imag, uniq.size)
        row, rest = np.divmod(uniq, big * big)
        keep = (merged != 0) | np.r_[True, row[1:] != row[:-1]]
        self.row, self.coef = row[keep], merged[keep]
        self.x, self.y = np.divmod(rest[keep], big)
        self.starts = np.searchsorted(self.row, np.arange(self.m))

    def values(self, c: np.ndarray) -> np.ndarray:
        """Row values at ``c``; the arithmetic follows ``c``'s dtype."""
        c = np.asarray(c).ravel()
        prod = self.coef.astype(c.dtype) * c[self.x] * c[self.y].conj()
        return np.add.reduceat(prod, self.starts) - self.consts.astype(c.dtype)

    def derivatives(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(c, dtype=complex).ravel()
        h = np.zeros((self.m, self.size), dtype=complex)
        a = np.zeros((self.m, self.size), dtype=complex)
        np.add.at(h, (self.row, self.x), self.coef * c[self.y].conj())
        np.add.at(a, (self.row, self.y), self.coef * c[self.x])
        return h, a

    def real_values(self, x: np.ndarray) -> np.ndarray:
        z = self.values(unpack(x, self.n, self.dc))
        return np.concatenate([z.real, z.imag])

    def real_system(self, x: np.ndarray):
        """Real residual vector and Jacobian with respect to ``x = [Re c, Im c]``."""
        c = unpack(np.asarray(x, dtype=float), self.n, self.dc)
        return stack_complex(self.values(c), *self.derivatives(c))


def admissibility_system(n: int, dc: int, rows) -> FormSystem:
    """Isometry rows ``<psi_p|psi_r> - delta_pr`` (``p <= r``) followed by constraint rows.

    A constant target ``kappa`` is written as ``kappa <psi_u|psi_u>`` with
    ``u`` the first slice index of the row, which agrees with the raw row on
    isometries and lets matching ``|c|^2`` terms cancel exactly.
    """
    fb = FormBuilder(n, dc)
    for p in range(n):
        for r in range(p, n):
            fb.gram(fb.new_row(1.0 if p == r else 0.0), p, r)
    for row in rows:
        i = fb.new_row()
        for a, b, w in row.terms:
            fb.transfer(i, a, b, w)
        if row.target != 0:
            u = row.terms[0][0]
            fb.gram(i, u, u, -row.target)
    return fb.build()


def theta_system(n: int, dc: int, r: int, p: int) -> FormSystem:
    """Entries of ``Theta[r, p]`` (0-based) flattened over ``(k, n)``."""
    fb = FormBuilder(n, dc)
    for k in range(n):
        for nn in range(n):
            fb.theta(fb.new_row(), r, p, k, nn)
    return fb.build()
