"""Elementary symmetric polynomials of membership columns.

For a membership matrix ``u`` (N x K) the quantity

    psi[d, k] = sum over all d-subsets S of nodes of prod_{j in S} u[j, k]

is the degree-d elementary symmetric polynomial of column k. The M-step
denominators need it for every d up to D, and also the same sum restricted
to subsets that avoid a given node i ("excluded" values). Both obey

    psi[d, k] = u[i, k] * excl_i[d - 1, k] + excl_i[d, k],    excl_i[0, k] = 1,

so excluded values are peeled off the full table in O(D) per column, and a
change of a single entry ``u[i, k]`` moves the full table by
``delta * excl_i[d - 1, k]``. Row 0 of every table is the constant 1.
"""

from __future__ import annotations

import numpy as np

# below this a denominator is treated as exactly zero
TINY = 1e-15


def binomial_table(n: np.ndarray, max_degree: int) -> np.ndarray:
    """``C(n_k, d)`` for d = 0..max_degree as floats, via a running product."""
    n = np.asarray(n, dtype=float)
    out = np.zeros((max_degree + 1, n.size))
    out[0] = 1.0
    for d in range(1, max_degree + 1):
        out[d] = np.where(n >= d, out[d - 1] * (n - d + 1) / d, 0.0)
    return out


def esp_table(u: np.ndarray, max_degree: int) -> np.ndarray:
    """Elementary symmetric polynomials of each column of ``u``.

    Returns shape ``(max_degree + 1, K)``; costs O(N * D * K).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    table = np.zeros((max_degree + 1, u.shape[1]))
    table[0] = 1.0
    for row in u:
        # right-hand side uses the previous prefix, so no in-place aliasing
        table[1:] = table[1:] + row * table[:-1]
    return table


class PsiState:
    """Full symmetric-polynomial table plus a one-node exclusion buffer.

    ``psi_full[d, k]`` holds the degree-d polynomial of column k and
    ``psi_excl[d, k]`` the same quantity with node ``focal`` removed.
    ``nonzero[k]`` counts strictly positive entries of column k; it lets the
    engine return exact zeros for degrees no subset can reach.
    """

    def __init__(self, psi_full: np.ndarray, nonzero: np.ndarray | None = None,
                 refresh_every: int | None = None):
        self.psi_full = np.array(psi_full, dtype=float)
        self.max_degree = self.psi_full.shape[0] - 1
        self.num_communities = self.psi_full.shape[1]
        self.psi_excl = np.zeros_like(self.psi_full)
        self.psi_excl[0] = 1.0
        self.focal: int | None = None
        self.nonzero = None if nonzero is None else np.asarray(nonzero, dtype=np.int64).copy()
        self.epoch = 0
        self.refresh_every = refresh_every
        self._degrees = np.arange(self.max_degree + 1)[:, None]

    @property
    def needs_refresh(self) -> bool:
        return self.refresh_every is not None and self.epoch >= self.refresh_every

    def refresh(self, u: np.ndarray) -> None:
        """Recompute the full table from scratch, discarding accumulated drift."""
        self.psi_full = esp_table(u, self.max_degree)
        self.nonzero = np.count_nonzero(u > 0, axis=0)
        self.epoch = 0
        self.focal = None

    def focus(self, i: int, u_i: np.ndarray) -> np.ndarray:
        """Fill ``psi_excl`` with the tables that exclude node ``i``.

        ``u_i`` is the current membership row of node i. Negative values
        produced by cancellation are clamped to zero.
        """
        u_i = np.asarray(u_i, dtype=float)
        excl = self.psi_excl
        full = self.psi_full
        excl[0] = 1.0
        for d in range(1, self.max_degree + 1):
            np.subtract(full[d], u_i * excl[d - 1], out=excl[d])
        np.maximum(excl, 0.0, out=excl)
        if self.nonzero is not None:
            others = self.nonzero - (u_i > 0)
            excl[self._degrees > others] = 0.0
        self.focal = i
        return excl

    def commit_entry(self, i: int, k: int, old: float, new: float) -> None:
        """Apply ``u[i, k]: old -> new`` to the full table in O(D)."""
        if self.focal != i:
            raise RuntimeError(f"commit for node {i} without focusing it first")
        delta = new - old
        if delta != 0.0:
            col = self.psi_full[:, k]
            col[1:] += delta * self.psi_excl[:-1, k]
            np.maximum(col, 0.0, out=col)
            col[0] = 1.0
            if self.nonzero is not None:
                self.nonzero[k] += int(new > 0) - int(old > 0)
                col[self._degrees[:, 0] > self.nonzero[k]] = 0.0
        self.epoch += 1

    def commit_row(self, i: int, old: np.ndarray, new: np.ndarray) -> None:
        """Apply a whole-row change of node ``i`` (K entries at once)."""
        if self.focal != i:
            raise RuntimeError(f"commit for node {i} without focusing it first")
        delta = new - old
        full = self.psi_full
        full[1:] += delta * self.psi_excl[:-1]
        np.maximum(full, 0.0, out=full)
        full[0] = 1.0
        if self.nonzero is not None:
            self.nonzero += (new > 0).astype(np.int64) - (old > 0)
            full[self._degrees > self.nonzero] = 0.0
        self.epoch += len(delta)

    def denominators(self, w: np.ndarray) -> np.ndarray:
        """``sum_{d=2..D} w[d, k] * psi_excl[d - 1, k]`` for the focal node."""
        return np.einsum("dk,dk->k", w[2:], self.psi_excl[1:-1])


def init_uniform(counts, levels, max_degree: int) -> PsiState:
    """Table for the shortcut start where every member of k has ``u = levels[k]``.

    ``psi[d, k] = C(counts[k], d) * levels[k] ** d``.
    """
    counts = np.asarray(counts, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if np.any(counts < 0) or np.any(levels < 0):
        raise ValueError("counts and levels must be nonnegative")
    table = binomial_table(counts, max_degree)
    table *= levels[None, :] ** np.arange(max_degree + 1)[:, None]
    nonzero = np.where(levels > 0, counts, 0).astype(np.int64)
    return PsiState(table, nonzero)


def init_from_u(u: np.ndarray, max_degree: int, refresh_every: int | None = None) -> PsiState:
    """Exact table for ``u`` via the prefix recurrence."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("memberships must be nonnegative")
    return PsiState(esp_table(u, max_degree), np.count_nonzero(u > 0, axis=0),
                    refresh_every=refresh_every)
