"""Cell lists for compact-support pairwise sums.

Uniform cells with edge >= interaction radius, so every pair within the
radius lies in the same or an adjacent cell.  Membership is stored CSR-style
(stable sort keeps within-cell indices ascending).
"""

import numpy as np


class CellIndex:
    def __init__(self, positions, support_radius):
        if support_radius <= 0:
            raise ValueError("support_radius must be positive")
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        self.source_positions = positions
        self.n, self.dim = positions.shape
        self.support_radius = float(support_radius)

        if self.n == 0:
            self.lo = np.zeros(self.dim)
            self.edge = float(support_radius)
            self.ncells = np.ones(self.dim, dtype=np.int64)
        else:
            lo = positions.min(axis=0)
            hi = positions.max(axis=0)
            extent = np.maximum(hi - lo, 1e-300)
            ncells = np.maximum(np.floor(extent / support_radius).astype(np.int64), 1)
            edge = float(max(np.max(extent / ncells), support_radius))
            # common edge across axes keeps the adjacency guarantee per axis
            self.lo = lo
            self.edge = edge
            self.ncells = np.maximum((np.ceil(extent / edge)).astype(np.int64), 1)

        self.strides = np.ones(self.dim, dtype=np.int64)
        for a in range(self.dim - 2, -1, -1):
            self.strides[a] = self.strides[a + 1] * self.ncells[a + 1]
        self.total_cells = int(np.prod(self.ncells))

        ids = self.cell_ids(positions) if self.n else np.empty(0, dtype=np.int64)
        self.order = np.argsort(ids, kind="stable").astype(np.int64)
        counts = np.bincount(ids, minlength=self.total_cells) if self.n else np.zeros(self.total_cells, dtype=np.int64)
        self.starts = np.zeros(self.total_cells + 1, dtype=np.int64)
        np.cumsum(counts, out=self.starts[1:])

    def coords(self, positions):
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        c = np.floor((positions - self.lo) / self.edge).astype(np.int64)
        return np.clip(c, 0, self.ncells - 1)

    def cell_ids(self, positions):
        return self.coords(positions) @ self.strides

    def members_of_cell(self, cid):
        return self.order[self.starts[cid]:self.starts[cid + 1]]

    def candidates(self, x):
        """Source indices in the 3^d neighborhood of the cell containing x."""
        c = self.coords(np.asarray(x, dtype=float)[None, :])[0]
        cells = []
        ranges = [range(max(0, c[a] - 1), min(self.ncells[a], c[a] + 2))
                  for a in range(self.dim)]
        mesh = np.meshgrid(*[np.array(list(r)) for r in ranges], indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        ids = coords @ self.strides
        for cid in ids:
            cells.append(self.members_of_cell(int(cid)))
        if not cells:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(cells)

    def is_stale_for(self, positions):
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        return positions.shape[0] != self.n or positions is not self.source_positions


def build_cell_index(positions, support_radius) -> CellIndex:
    return CellIndex(positions, support_radius)
