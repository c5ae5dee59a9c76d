"""Design records: per-cell power/timing features and design metadata.

The canonical interchange format is ``design.csv``: a block of
``# key: value`` metadata lines followed by a CSV table with header

    id,p_i,p_s,p_l,r_tog,t_min,t_max,x_min,x_max,y_min,y_max[,r_eff]

Units: powers in watts, times in seconds (within one clock cycle of
length ``T``), coordinates in micrometers, ``r_eff`` in ohms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError, ValidationError

_META_KEYS = ("name", "W", "H", "T", "C", "vdd", "hotspot_threshold")
_COLUMNS = ("id", "p_i", "p_s", "p_l", "r_tog", "t_min", "t_max",
            "x_min", "x_max", "y_min", "y_max")


@dataclass(frozen=True)
class DesignMeta:
    """Top-level design attributes.

    ``W``/``H`` are the die extent in micrometers, ``T`` the clock period in
    seconds, ``C`` the declared cell count, ``vdd`` the supply in volts and
    ``hotspot_threshold`` the IR-drop level (volts) above which a tile
    counts as a hotspot.
    """

    name: str
    W: float
    H: float
    T: float
    C: int
    vdd: float
    hotspot_threshold: float

    def validate(self) -> None:
        for field in ("W", "H", "T", "vdd"):
            if getattr(self, field) <= 0:
                raise ValidationError(f"design {self.name}: {field} must be positive")
        if self.C < 0:
            raise ValidationError(f"design {self.name}: C must be >= 0")
        if not 0 < self.hotspot_threshold < self.vdd:
            raise ValidationError(
                f"design {self.name}: hotspot_threshold must lie in (0, vdd)"
            )


@dataclass(frozen=True)
class Cell:
    """One standard-cell record.

    ``p_i``/``p_s``/``p_l`` are internal, switching and leakage power;
    ``r_tog`` the toggle rate; ``[t_min, t_max]`` the signal-arrival window;
    the bounding box is ``[x_min, x_max] x [y_min, y_max]``. ``r_eff`` is an
    optional effective supply-network resistance used by the
    resistance-scaled feature mode.
    """

    id: int
    p_i: float
    p_s: float
    p_l: float
    r_tog: float
    t_min: float
    t_max: float
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    r_eff: Optional[float] = None

    def validate(self, meta: DesignMeta) -> None:
        if self.p_i < 0 or self.p_s < 0 or self.p_l < 0:
            raise ValidationError(f"cell {self.id}: power components must be >= 0")
        if not 0.0 <= self.r_tog <= 1.0:
            raise ValidationError(f"cell {self.id}: r_tog must lie in [0, 1]")
        if not 0.0 <= self.t_min <= self.t_max <= meta.T:
            raise ValidationError(
                f"cell {self.id}: arrival window must satisfy 0 <= t_min <= t_max <= T"
            )
        if not (0.0 <= self.x_min < self.x_max <= meta.W):
            raise ValidationError(f"cell {self.id}: x_min < x_max within [0, W] violated")
        if not (0.0 <= self.y_min < self.y_max <= meta.H):
            raise ValidationError(f"cell {self.id}: y_min < y_max within [0, H] violated")
        if self.r_eff is not None and not self.r_eff > 0:
            raise ValidationError(f"cell {self.id}: r_eff must be positive when present")


class CellTable:
    """Columnar store for the cells of one design.

    Keeps one float64 numpy array per column so the decomposition and the
    synthetic generator can stay vectorized; :meth:`row` materializes a
    single :class:`Cell` on demand.
    """

    def __init__(self, columns: dict[str, np.ndarray], r_eff: np.ndarray | None = None):
        n = None
        self.cols: dict[str, np.ndarray] = {}
        for name in _COLUMNS:
            arr = np.asarray(columns[name], dtype=np.int64 if name == "id" else np.float64)
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise ValidationError(f"column {name} has length {arr.shape[0]}, expected {n}")
            self.cols[name] = arr
        self.r_eff = None if r_eff is None else np.asarray(r_eff, dtype=np.float64)
        if self.r_eff is not None and self.r_eff.shape[0] != (n or 0):
            raise ValidationError("r_eff column length mismatch")

    def __len__(self) -> int:
        return self.cols["id"].shape[0]

    def __getattr__(self, name: str) -> np.ndarray:
        try:
            return self.__dict__["cols"][name]
        except KeyError:
            raise AttributeError(name) from None

    @classmethod
    def empty(cls) -> "CellTable":
        return cls({name: np.empty(0) for name in _COLUMNS})

    @classmethod
    def from_cells(cls, cells: Iterable[Cell]) -> "CellTable":
        cells = list(cells)
        cols = {name: np.array([getattr(c, name) for c in cells], dtype=np.float64)
                for name in _COLUMNS}
        r_eff = None
        if cells and all(c.r_eff is not None for c in cells):
            r_eff = np.array([c.r_eff for c in cells], dtype=np.float64)
        elif any(c.r_eff is not None for c in cells):
            raise ValidationError("r_eff must be present on all cells or none")
        return cls(cols, r_eff)

    def row(self, i: int) -> Cell:
        kw = {name: (int(self.cols[name][i]) if name == "id" else float(self.cols[name][i]))
              for name in _COLUMNS}
        if self.r_eff is not None:
            kw["r_eff"] = float(self.r_eff[i])
        return Cell(**kw)

    def with_powers(self, p_i: np.ndarray, p_s: np.ndarray, p_l: np.ndarray) -> "CellTable":
        cols = dict(self.cols)
        cols["p_i"], cols["p_s"], cols["p_l"] = p_i, p_s, p_l
        return CellTable(cols, self.r_eff)

    def validate(self, meta: DesignMeta) -> None:
        """Vectorized invariant check; reports the first offending cell and field."""
        c = self.cols

        def first_bad(mask: np.ndarray, message: str) -> None:
            idx = np.flatnonzero(mask)
            if idx.size:
                raise ValidationError(f"cell {int(c['id'][idx[0]])}: {message}")

        first_bad((c["p_i"] < 0) | (c["p_s"] < 0) | (c["p_l"] < 0),
                  "power components must be >= 0")
        first_bad((c["r_tog"] < 0) | (c["r_tog"] > 1), "r_tog must lie in [0, 1]")
        first_bad((c["t_min"] < 0) | (c["t_min"] > c["t_max"]) | (c["t_max"] > meta.T),
                  "arrival window must satisfy 0 <= t_min <= t_max <= T")
        first_bad((c["x_min"] < 0) | (c["x_min"] >= c["x_max"]) | (c["x_max"] > meta.W),
                  "x_min < x_max within [0, W] violated")
        first_bad((c["y_min"] < 0) | (c["y_min"] >= c["y_max"]) | (c["y_max"] > meta.H),
                  "y_min < y_max within [0, H] violated")
        if self.r_eff is not None:
            first_bad(~(self.r_eff > 0), "r_eff must be positive when present")
        ids, counts = np.unique(c["id"], return_counts=True)
        if np.any(counts > 1):
            raise ValidationError(f"cell {int(ids[np.argmax(counts > 1)])}: duplicate id")


def save_design(path: str | Path, meta: DesignMeta, cells: CellTable) -> None:
    """Write a design.csv file; float fields use repr() so reloads are exact."""
    meta.validate()
    if len(cells) != meta.C:
        raise ValidationError(f"design {meta.name}: C={meta.C} but table has {len(cells)} cells")
    has_reff = cells.r_eff is not None
    with open(path, "w", newline="") as f:
        f.write(f"# name: {meta.name}\n")
        for key in ("W", "H", "T"):
            f.write(f"# {key}: {getattr(meta, key)!r}\n")
        f.write(f"# C: {meta.C}\n")
        f.write(f"# vdd: {meta.vdd!r}\n")
        f.write(f"# hotspot_threshold: {meta.hotspot_threshold!r}\n")
        header = list(_COLUMNS) + (["r_eff"] if has_reff else [])
        f.write(",".join(header) + "\n")
        cols = [cells.cols[name] for name in _COLUMNS]
        if has_reff:
            cols.append(cells.r_eff)
        for i in range(len(cells)):
            vals = [str(int(cols[0][i]))] + [repr(float(col[i])) for col in cols[1:]]
            f.write(",".join(vals) + "\n")


def load_design(path: str | Path) -> tuple[DesignMeta, CellTable]:
    """Parse a design.csv file and validate every record.

    Raises :class:`ParseError` with the 1-based line number on malformed
    input and :class:`ValidationError` (naming cell id and field) when an
    invariant does not hold.
    """
    meta_kv: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    row_lines: list[int] = []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if header is not None:
                    raise ParseError(f"{path}: line {lineno}: metadata after header")
                body = line[1:].strip()
                if ":" not in body:
                    raise ParseError(f"{path}: line {lineno}: expected '# key: value'")
                key, value = body.split(":", 1)
                meta_kv[key.strip()] = value.strip()
            elif header is None:
                header = next(csv.reader([line]))
            else:
                rows.append(next(csv.reader([line])))
                row_lines.append(lineno)

    missing = [k for k in _META_KEYS if k not in meta_kv]
    if missing:
        raise ParseError(f"{path}: missing metadata keys: {', '.join(missing)}")
    try:
        meta = DesignMeta(
            name=meta_kv["name"],
            W=float(meta_kv["W"]), H=float(meta_kv["H"]), T=float(meta_kv["T"]),
            C=int(meta_kv["C"]), vdd=float(meta_kv["vdd"]),
            hotspot_threshold=float(meta_kv["hotspot_threshold"]),
        )
    except ValueError as e:
        raise ParseError(f"{path}: bad metadata value: {e}") from None
    meta.validate()

    if header is None:
        if meta.C == 0:
            return meta, CellTable.empty()
        raise ParseError(f"{path}: missing cell table header")
    base = list(_COLUMNS)
    if header == base:
        has_reff = False
    elif header == base + ["r_eff"]:
        has_reff = True
    else:
        raise ParseError(f"{path}: unexpected header {header}")

    ncols = len(header)
    n = len(rows)
    if n != meta.C:
        raise ParseError(f"{path}: header declares C={meta.C} but found {n} cell rows")
    data = np.empty((n, ncols), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise ParseError(
                f"{path}: line {row_lines[i]}: expected {ncols} fields, got {len(row)}"
            )
        try:
            data[i] = [float(v) for v in row]
        except ValueError as e:
            raise ParseError(f"{path}: line {row_lines[i]}: {e}") from None
    cols = {name: data[:, j] for j, name in enumerate(_COLUMNS)}
    table = CellTable(cols, data[:, -1] if has_reff else None)
    table.validate(meta)
    return meta, table


def with_name(meta: DesignMeta, name: str) -> DesignMeta:
    return replace(meta, name=name)
