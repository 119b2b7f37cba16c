"""Point containers, CSV point I/O and linked cell lists."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import InputError, ParameterError

__all__ = [
    "PointCloud",
    "CellList",
    "PairBlock",
    "build_cell_list",
    "neighbors",
    "neighbor_pairs",
    "read_points_csv",
    "write_points_csv",
]


@dataclass
class PointCloud:
    """Positions with optional scalar (G) and/or 2-vector (H) strengths."""

    positions: np.ndarray
    strengths_scalar: Optional[np.ndarray] = None
    strengths_vector: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pos)):
            raise InputError("positions must be finite")
        self.positions = pos
        n = len(pos)
        if self.strengths_scalar is not None:
            f = np.asarray(self.strengths_scalar, dtype=float).reshape(-1)
            if len(f) != n:
                raise InputError(f"{len(f)} scalar strengths for {n} points")
            self.strengths_scalar = f
        if self.strengths_vector is not None:
            f = np.asarray(self.strengths_vector, dtype=float).reshape(-1, 2)
            if len(f) != n:
                raise InputError(f"{len(f)} vector strengths for {n} points")
            self.strengths_vector = f

    def __len__(self) -> int:
        return len(self.positions)

    def strengths(self, kernel: str) -> np.ndarray:
        kernel = kernel.upper()
        f = self.strengths_scalar if kernel == "G" else self.strengths_vector
        if f is None:
            raise InputError(f"point cloud carries no strengths for kernel {kernel}")
        return f

    def check_inside(self, lo: float, hi: float, closed: bool = False) -> None:
        p = self.positions
        bad = (p < lo) | ((p > hi) if closed else (p >= hi))
        if np.any(bad):
            i = int(np.flatnonzero(bad.any(axis=1))[0])
            interval = f"[{lo}, {hi}{']' if closed else ')'}"
            raise InputError(f"point {i} at {tuple(p[i])} lies outside {interval}^2")


@dataclass
class CellList:
    """Linked cell list over a square domain ``[origin, origin + side)^2``.

    ``head[c]`` is the first point in cell ``c`` (or -1) and ``next[i]`` the
    point following ``i`` in its cell.  ``order``/``start`` give the same
    binning in CSR form for vectorized enumeration.
    """

    positions: np.ndarray
    r_c: float
    origin: float
    side: float
    ncell: int
    cell_size: float
    periodic: bool
    cell_of: np.ndarray
    head: np.ndarray
    next: np.ndarray
    order: np.ndarray = field(repr=False)
    start: np.ndarray = field(repr=False)

    def cell_coords(self, x: np.ndarray) -> np.ndarray:
        c = np.floor((np.asarray(x, dtype=float) - self.origin) / self.cell_size).astype(np.int64)
        if self.periodic:
            return np.mod(c, self.ncell)
        return np.clip(c, 0, self.ncell - 1)

    def members(self, cell: int) -> Iterator[int]:
        i = self.head[cell]
        while i >= 0:
            yield int(i)
            i = self.next[i]

    def neighbor_offsets(self) -> list[tuple[int, int]]:
        """Distinct cell offsets of the 3x3 block (deduplicated on tiny grids)."""
        r = range(-1, 2)
        if self.periodic and self.ncell < 3:
            r = range(self.ncell)
        elif not self.periodic and self.ncell == 1:
            r = range(1)
        return [(a, b) for a in r for b in r]


def build_cell_list(cloud, r_c: float, domain: tuple[float, float] = (0.0, 2 * math.pi),
                    periodic: bool = True) -> CellList:
    """Bin points into cells of size >= r_c covering ``domain = (lo, hi)``.

    Periodic boxes use ``L / floor(L / r_c)`` so cells tile the box exactly;
    free space falls back to a single cell when ``r_c`` exceeds the domain.
    """
    pos = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float).reshape(-1, 2)
    if not (r_c > 0 and np.isfinite(r_c)):
        raise ParameterError(f"cutoff radius must be positive, got {r_c!r}")
    lo, hi = float(domain[0]), float(domain[1])
    side = hi - lo
    if side <= 0:
        raise ParameterError("empty domain")
    if periodic:
        if r_c > side / 2:
            raise ParameterError(f"r_c = {r_c} exceeds half the periodic box {side / 2}")
        ncell = max(1, int(math.floor(side / r_c)))
        cell_size = side / ncell
    else:
        ncell = max(1, int(math.floor(side / r_c)))
        cell_size = side / ncell if ncell > 1 else max(side, r_c)
    n = len(pos)
    cl = CellList(
        positions=pos, r_c=float(r_c), origin=lo, side=side, ncell=ncell,
        cell_size=cell_size, periodic=periodic,
        cell_of=np.empty(0, dtype=np.int64), head=np.full(ncell * ncell, -1, dtype=np.int64),
        next=np.full(n, -1, dtype=np.int64), order=np.empty(0, dtype=np.int64),
        start=np.zeros(ncell * ncell + 1, dtype=np.int64),
    )
    if n == 0:
        return cl
    cxy = cl.cell_coords(pos)
    cell = cxy[:, 0] * ncell + cxy[:, 1]
    cl.cell_of = cell
    # stable sort keeps insertion order inside a cell -> deterministic enumeration
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=ncell * ncell)
    cl.order = order
    cl.start[1:] = np.cumsum(counts)
    # head/next linkage in the same per-cell order
    sorted_cells = cell[order]
    first = np.r_[True, sorted_cells[1:] != sorted_cells[:-1]]
    cl.head[sorted_cells[first]] = order[first]
    same = ~first[1:]
    cl.next[order[:-1][same]] = order[1:][same]
    return cl


@dataclass
class PairBlock:
    """Neighbour pairs for a block of targets.

    ``sep = x_t - y_s - shift`` with ``shift`` the periodic image offset
    tau(p); all pairs satisfy ``|sep| < r_c``.
    """

    target: np.ndarray
    source: np.ndarray
    sep: np.ndarray
    shift: np.ndarray


def neighbor_pairs(cl: CellList, targets, chunk: int = 4096) -> Iterator[PairBlock]:
    """Yield all (target, source) pairs closer than ``r_c``, in blocks."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if len(cl.positions) == 0 or len(targets) == 0:
        return
    offsets = cl.neighbor_offsets()
    nc = cl.ncell
    for lo in range(0, len(targets), chunk):
        tx = targets[lo:lo + chunk]
        tc = cl.cell_coords(tx)
        t_parts, s_parts = [], []
        for dx, dy in offsets:
            cx = tc[:, 0] + dx
            cy = tc[:, 1] + dy
            if cl.periodic:
                cx %= nc
                cy %= nc
                ok = np.ones(len(tx), dtype=bool)
            else:
                ok = (cx >= 0) & (cx < nc) & (cy >= 0) & (cy < nc)
            tidx = np.flatnonzero(ok)
            cid = cx[tidx] * nc + cy[tidx]
            a = cl.start[cid]
            cnt = cl.start[cid + 1] - a
            total = int(cnt.sum())
            if total == 0:
                continue
            rep_t = np.repeat(tidx, cnt)
            base = np.repeat(a - np.cumsum(cnt) + cnt, cnt)
            s_parts.append(cl.order[base + np.arange(total)])
            t_parts.append(rep_t)
        if not t_parts:
            continue
        t_loc = np.concatenate(t_parts)
        src = np.concatenate(s_parts)
        # restore target-major, cell-order enumeration
        perm = np.argsort(t_loc, kind="stable")
        t_loc, src = t_loc[perm], src[perm]
        raw = tx[t_loc] - cl.positions[src]
        if cl.periodic:
            shift = cl.side * np.round(raw / cl.side)
        else:
            shift = np.zeros_like(raw)
        sep = raw - shift
        keep = np.einsum("ij,ij->i", sep, sep) < cl.r_c**2
        yield PairBlock(t_loc[keep] + lo, src[keep], sep[keep], shift[keep])


def neighbors(cl: CellList, target) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Stream ``(source index, image shift, separation)`` for one target."""
    for blk in neighbor_pairs(cl, np.asarray(target, dtype=float).reshape(1, 2)):
        for s, tau, d in zip(blk.source, blk.shift, blk.sep):
            yield int(s), tau, d


# ---------------------------------------------------------------- CSV I/O

def read_points_csv(source, domain: Optional[tuple[float, float]] = None,
                    closed: bool = False) -> PointCloud:
    """Read ``x,y``, ``x,y,f`` or ``x,y,f1,f2`` CSV (header required).

    Lines starting with ``#`` are ignored.  Errors carry the 1-based line
    number of the offending row.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    rows = []
    header = None
    for lineno, line in enumerate(io.StringIO(text), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fields = next(csv.reader([s]))
        if header is None:
            header = [h.strip().lower() for h in fields]
            if header not in (["x", "y"], ["x", "y", "f"], ["x", "y", "f1", "f2"]):
                raise InputError(f"line {lineno}: unsupported header {fields!r}")
            continue
        if len(fields) != len(header):
            raise InputError(f"line {lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            vals = [float(v) for v in fields]
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"line {lineno}: non-finite value")
        rows.append(vals)
    if header is None:
        raise InputError("missing CSV header")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    cloud = PointCloud(
        data[:, :2],
        strengths_scalar=data[:, 2] if len(header) == 3 else None,
        strengths_vector=data[:, 2:4] if len(header) == 4 else None,
    )
    if domain is not None:
        cloud.check_inside(domain[0], domain[1], closed=closed)
    return cloud


def write_points_csv(path, cloud: PointCloud) -> None:
    cols = ["x", "y"]
    data = [cloud.positions]
    if cloud.strengths_vector is not None:
        cols += ["f1", "f2"]
        data.append(cloud.strengths_vector)
    elif cloud.strengths_scalar is not None:
        cols += ["f"]
        data.append(cloud.strengths_scalar[:, None])
    arr = np.hstack(data)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
