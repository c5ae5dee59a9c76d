"""Spatial and temporal decomposition of per-cell power into tile maps.

Space decomposition amortizes each cell's power equally over the ``s``
tiles its bounding box overlaps (``floor``/``ceil`` tile indices, half-open
spans). Time decomposition additionally assigns the toggle-scaled power
``p_sca`` to every measured instant ``j*t`` (``j = 1..N``) that lies
strictly inside the cell's signal-arrival window ``(t_min, t_max)``: only
cells that can switch at that instant contribute to it.

Accumulation is vectorized with corner difference arrays plus prefix sums,
all in float64, and is deterministic (no thread-count dependence). The
resulting maps are clamped so the exact mathematical relations
``map >= 0`` and ``P_t[j] <= P_sca`` hold elementwise despite rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import Cell, CellTable, DesignMeta
from .errors import ConfigError, FormatError, ValidationError
from .grid import TileGrid, load_map, save_map, tile_counts


@dataclass(frozen=True)
class DecomposeParams:
    """Tile size ``l`` (micrometers) and instant count ``n``.

    ``n = 0`` disables time decomposition (used by the instant-count sweep);
    otherwise the time window is ``t = T / n`` and instants are ``j*t`` for
    ``j in [1, n]`` (instant 0 is never sampled).
    """

    l: float
    n: int

    def validate(self) -> None:
        if self.l <= 0:
            raise ValidationError(f"tile size must be positive, got {self.l}")
        if self.n < 0:
            raise ValidationError(f"instant count must be >= 0, got {self.n}")


@dataclass(frozen=True)
class PowerMapSet:
    """The stack of power maps extracted from one design.

    ``p_i_map``/``p_s_map``/``p_sca_map``/``p_all_map`` carry the spatially
    decomposed internal, switching, toggle-scaled and raw total power;
    ``p_t[j-1]`` is the time-decomposed map for instant ``j*t``.
    """

    p_i_map: TileGrid
    p_s_map: TileGrid
    p_sca_map: TileGrid
    p_all_map: TileGrid
    p_t: list[TileGrid]
    n: int
    t: float

    @property
    def w(self) -> int:
        return self.p_all_map.w

    @property
    def h(self) -> int:
        return self.p_all_map.h

    @property
    def l(self) -> float:
        return self.p_all_map.l

    def spatial(self) -> list[TileGrid]:
        return [self.p_i_map, self.p_s_map, self.p_sca_map, self.p_all_map]

    def validate(self) -> None:
        if self.n != len(self.p_t):
            raise ValidationError(f"n={self.n} but {len(self.p_t)} time maps present")
        ref = self.p_all_map
        for g in self.spatial() + self.p_t:
            g.validate()
            if not g.same_tessellation(ref):
                raise ValidationError("maps do not share one tessellation")
            if np.any(g.data < 0):
                raise ValidationError("power map contains negative entries")
        for j, g in enumerate(self.p_t, start=1):
            if np.any(g.data > self.p_sca_map.data):
                raise ValidationError(f"P_t[{j}] exceeds P_sca somewhere")


def derived_powers(cell: Cell) -> tuple[float, float]:
    """Toggle-scaled and raw total power of one cell:
    ``p_sca = (p_i + p_s) * r_tog + p_l`` and ``p_all = p_i + p_s + p_l``."""
    p_sca = (cell.p_i + cell.p_s) * cell.r_tog + cell.p_l
    p_all = cell.p_i + cell.p_s + cell.p_l
    return p_sca, p_all


def overlap_tiles(cell: Cell, l: float, w: int, h: int) -> tuple[int, int, int, int, int]:
    """Tile span ``[x_n, x_x) x [y_n, y_x)`` covered by a cell and its tile count ``s``.

    A box edge exactly on a tile boundary does not claim the next tile; a
    span that rounds to zero width is widened by one so ``s >= 1`` always.
    """
    x_n = int(np.floor(cell.x_min / l))
    x_x = int(np.ceil(cell.x_max / l))
    y_n = int(np.floor(cell.y_min / l))
    y_x = int(np.ceil(cell.y_max / l))
    x_n = min(max(x_n, 0), w - 1)
    y_n = min(max(y_n, 0), h - 1)
    x_x = min(max(x_x, x_n + 1), w)
    y_x = min(max(y_x, y_n + 1), h)
    s = (x_x - x_n) * (y_x - y_n)
    return x_n, x_x, y_n, y_x, s


def _tile_spans(cells: CellTable, l: float, w: int, h: int):
    xn = np.floor(cells.x_min / l).astype(np.int64)
    xx = np.ceil(cells.x_max / l).astype(np.int64)
    yn = np.floor(cells.y_min / l).astype(np.int64)
    yx = np.ceil(cells.y_max / l).astype(np.int64)
    np.clip(xn, 0, w - 1, out=xn)
    np.clip(yn, 0, h - 1, out=yn)
    np.clip(xx, None, w, out=xx)
    np.clip(yx, None, h, out=yx)
    np.maximum(xx, xn + 1, out=xx)
    np.maximum(yx, yn + 1, out=yx)
    s = (xx - xn) * (yx - yn)
    return xn, xx, yn, yx, s


def _rect_sum(w: int, h: int, xn, xx, yn, yx, v) -> np.ndarray:
    """Sum of per-cell values ``v`` spread uniformly over half-open tile rects.

    Corner difference array + two prefix sums: O(cells + w*h) and exact to
    float64 rounding.
    """
    h1 = h + 1
    size = (w + 1) * h1
    pp = xn * h1 + yn
    mm = xx * h1 + yx
    pm = xn * h1 + yx
    mp = xx * h1 + yn
    idx = np.concatenate([pp, mm, pm, mp])
    wts = np.concatenate([v, v, -v, -v])
    diff = np.bincount(idx, weights=wts, minlength=size)
    diff = diff.astype(np.float64, copy=False).reshape(w + 1, h1)
    return diff.cumsum(axis=0).cumsum(axis=1)[:w, :h]


def amortize(cells: CellTable, values: np.ndarray, meta: DesignMeta, l: float) -> TileGrid:
    """Spatially decompose an arbitrary per-cell quantity (each cell
    contributes ``value / s`` to every overlapped tile)."""
    w, h = tile_counts(meta.W, meta.H, l)
    if len(cells) == 0:
        return TileGrid.zeros(w, h, l)
    xn, xx, yn, yx, s = _tile_spans(cells, l, w, h)
    data = _rect_sum(w, h, xn, xx, yn, yx, np.asarray(values, dtype=np.float64) / s)
    return TileGrid.from_array(np.maximum(data, 0.0), l)


def instant_window(t_min, t_max, instants: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """0-based index range [lo, hi] of instants strictly inside (t_min, t_max).

    Uses the same float comparisons as a scalar ``t_min < j*t < t_max`` loop,
    so a window endpoint exactly on an instant excludes that instant. Empty
    windows yield lo > hi.
    """
    lo = np.searchsorted(instants, t_min, side="right")
    hi = np.searchsorted(instants, t_max, side="left") - 1
    return lo, hi


def decompose(cells: CellTable, meta: DesignMeta, params: DecomposeParams) -> PowerMapSet:
    """Build the full power-map stack for one design.

    Conserves mass: the sum of every spatial map equals the corresponding
    per-cell total to float64 rounding. ``P_t[j]`` receives ``p_sca / s``
    from exactly the cells whose arrival window strictly contains ``j*t``.
    """
    params.validate()
    meta.validate()
    cells.validate(meta)
    l, n = params.l, params.n
    w, h = tile_counts(meta.W, meta.H, l)
    t = meta.T / n if n > 0 else 0.0

    if len(cells) == 0:
        zero = lambda: TileGrid.zeros(w, h, l)
        return PowerMapSet(zero(), zero(), zero(), zero(), [zero() for _ in range(n)], n, t)

    p_i, p_s, p_l, r_tog = cells.p_i, cells.p_s, cells.p_l, cells.r_tog
    p_sca = (p_i + p_s) * r_tog + p_l
    p_all = p_i + p_s + p_l

    xn, xx, yn, yx, s = _tile_spans(cells, l, w, h)
    grids = {}
    for name, v in (("p_i", p_i), ("p_s", p_s), ("p_sca", p_sca), ("p_all", p_all)):
        grids[name] = np.maximum(_rect_sum(w, h, xn, xx, yn, yx, v / s), 0.0)

    p_t_grids: list[TileGrid] = []
    if n > 0:
        instants = np.arange(1, n + 1, dtype=np.float64) * t
        lo = np.searchsorted(instants, cells.t_min, side="right")
        hi = np.searchsorted(instants, cells.t_max, side="left") - 1
        active = lo <= hi
        stack = _instant_rect_sums(
            w, h, n, xn[active], xx[active], yn[active], yx[active],
            (p_sca / s)[active], lo[active], hi[active],
        )
        # exact relations distorted only by rounding; restore them
        np.maximum(stack, 0.0, out=stack)
        np.minimum(stack, grids["p_sca"][None, :, :], out=stack)
        p_t_grids = [TileGrid.from_array(stack[j], l) for j in range(n)]

    return PowerMapSet(
        p_i_map=TileGrid.from_array(grids["p_i"], l),
        p_s_map=TileGrid.from_array(grids["p_s"], l),
        p_sca_map=TileGrid.from_array(grids["p_sca"], l),
        p_all_map=TileGrid.from_array(grids["p_all"], l),
        p_t=p_t_grids,
        n=n,
        t=t,
    )


def _instant_rect_sums(w, h, n, xn, xx, yn, yx, v, lo, hi) -> np.ndarray:
    """Per-instant rect accumulation via a 3-D difference array.

    Each cell covers a contiguous 0-based instant range [lo, hi]; the extra
    prefix sum over the instant axis turns the 8 scattered corners per cell
    into full per-instant maps in O(cells + n*w*h).
    """
    h1 = h + 1
    layer = (w + 1) * h1
    size = (n + 1) * layer
    pp = xn * h1 + yn
    mm = xx * h1 + yx
    pm = xn * h1 + yx
    mp = xx * h1 + yn
    lo_off = lo * layer
    hi_off = (hi + 1) * layer
    idx = np.concatenate([lo_off + pp, lo_off + mm, lo_off + pm, lo_off + mp,
                          hi_off + pp, hi_off + mm, hi_off + pm, hi_off + mp])
    wts = np.concatenate([v, v, -v, -v, -v, -v, v, v])
    diff = np.bincount(idx, weights=wts, minlength=size)
    diff = diff.astype(np.float64, copy=False).reshape(n + 1, w + 1, h1)
    return diff.cumsum(axis=0)[:n].cumsum(axis=1).cumsum(axis=2)[:, :w, :h]


_SPATIAL_NAMES = ("p_i", "p_s", "p_sca", "p_all")


def save_mapset(maps: PowerMapSet, out_dir: str | Path) -> list[Path]:
    """Write one ``.tgrid`` per map plus a ``mapset.json`` descriptor."""
    maps.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, g in zip(_SPATIAL_NAMES, maps.spatial()):
        path = out / f"{name}.tgrid"
        save_map(g, path)
        written.append(path)
    for j, g in enumerate(maps.p_t, start=1):
        path = out / f"p_t_{j:04d}.tgrid"
        save_map(g, path)
        written.append(path)
    desc = {"n": maps.n, "t": maps.t, "w": maps.w, "h": maps.h, "l": maps.l}
    desc_path = out / "mapset.json"
    desc_path.write_text(json.dumps(desc, sort_keys=True) + "\n")
    written.append(desc_path)
    return written


def load_mapset(in_dir: str | Path) -> PowerMapSet:
    src = Path(in_dir)
    desc_path = src / "mapset.json"
    if not desc_path.exists():
        raise FormatError(f"{src}: missing mapset.json")
    desc = json.loads(desc_path.read_text())
    spatial = [load_map(src / f"{name}.tgrid") for name in _SPATIAL_NAMES]
    p_t = [load_map(src / f"p_t_{j:04d}.tgrid") for j in range(1, int(desc["n"]) + 1)]
    maps = PowerMapSet(*spatial, p_t=p_t, n=int(desc["n"]), t=float(desc["t"]))
    maps.validate()
    return maps


def scale_by_resistance(cells: CellTable) -> CellTable:
    """Scale every cell's power components by ``r_eff / mean(r_eff)``.

    This is the resistance-aware feature mode for non-uniform supply grids;
    with uniform resistance it is an exact identity.
    """
    if cells.r_eff is None:
        raise ConfigError("resistance scaling requires r_eff on every cell")
    if len(cells) == 0 or np.all(cells.r_eff == cells.r_eff[0]):
        return cells
    scale = cells.r_eff / cells.r_eff.mean()
    return cells.with_powers(cells.p_i * scale, cells.p_s * scale, cells.p_l * scale)
