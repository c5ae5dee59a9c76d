"""Decomposition: micro-cases, conservation, domination, equivariance.

The reference oracle here is an independent per-cell scalar loop that
follows the floor/ceil tile spans and the strict instant inequalities
directly; the vectorized implementation must reproduce it.
"""

import numpy as np
import pytest

from irdrop.decompose import (DecomposeParams, decompose, derived_powers,
                              load_mapset, overlap_tiles, save_mapset,
                              scale_by_resistance)
from irdrop.design import CellTable, DesignMeta
from irdrop.errors import ConfigError
from irdrop.grid import tile_counts

from conftest import make_cell, make_meta, random_cells


def brute_force_maps(cells: CellTable, meta: DesignMeta, params: DecomposeParams):
    """Scalar reference: per-cell loops, no vectorization shared with the
    implementation."""
    w, h = tile_counts(meta.W, meta.H, params.l)
    n = params.n
    t = meta.T / n if n else 0.0
    maps = {k: np.zeros((w, h)) for k in ("p_i", "p_s", "p_sca", "p_all")}
    p_t = np.zeros((n, w, h))
    for i in range(len(cells)):
        c = cells.row(i)
        p_sca = (c.p_i + c.p_s) * c.r_tog + c.p_l
        p_all = c.p_i + c.p_s + c.p_l
        xn = min(max(int(np.floor(c.x_min / params.l)), 0), w - 1)
        yn = min(max(int(np.floor(c.y_min / params.l)), 0), h - 1)
        xx = min(max(int(np.ceil(c.x_max / params.l)), xn + 1), w)
        yx = min(max(int(np.ceil(c.y_max / params.l)), yn + 1), h)
        s = (xx - xn) * (yx - yn)
        for x in range(xn, xx):
            for y in range(yn, yx):
                maps["p_i"][x, y] += c.p_i / s
                maps["p_s"][x, y] += c.p_s / s
                maps["p_sca"][x, y] += p_sca / s
                maps["p_all"][x, y] += p_all / s
        for j in range(1, n + 1):
            if c.t_min < j * t and c.t_max > j * t:
                p_t[j - 1, xn:xx, yn:yx] += p_sca / s
    return maps, p_t


class TestDerivedPowers:
    def test_direct_evaluation(self):
        c = make_cell(p_i=2e-6, p_s=3e-6, p_l=0.5e-6, r_tog=0.4)
        p_sca, p_all = derived_powers(c)
        assert p_sca == pytest.approx(2.5e-6, rel=1e-12)
        assert p_all == pytest.approx(5.5e-6, rel=1e-12)

    def test_zero_toggle_gives_leakage(self):
        c = make_cell(p_i=2e-6, p_s=3e-6, p_l=0.5e-6, r_tog=0.0)
        p_sca, _ = derived_powers(c)
        assert p_sca == 0.5e-6

    def test_full_toggle_gives_total(self):
        c = make_cell(p_i=2e-6, p_s=3e-6, p_l=0.5e-6, r_tog=1.0)
        p_sca, p_all = derived_powers(c)
        assert p_sca == p_all


class TestOverlapTiles:
    def test_three_tiles_horizontal_one_third_each(self):
        # cell spanning exactly three tiles in x: each gets p/3
        meta = make_meta(W=10.0, H=10.0, C=1)
        cell = make_cell(x_min=0.5, x_max=2.5, y_min=0.2, y_max=0.8,
                         p_i=3e-6, p_s=0.0, p_l=0.0, r_tog=1.0)
        x_n, x_x, y_n, y_x, s = overlap_tiles(cell, 1.0, 10, 10)
        assert (x_n, x_x, y_n, y_x, s) == (0, 3, 0, 1, 3)
        maps = decompose(CellTable.from_cells([cell]), meta, DecomposeParams(1.0, 0))
        for x in range(3):
            assert maps.p_i_map.data[x, 0] == pytest.approx(1e-6, rel=1e-12)
        assert maps.p_i_map.data.sum() == pytest.approx(3e-6, rel=1e-12)

    def test_single_tile(self):
        cell = make_cell(x_min=3.1, x_max=3.9, y_min=5.2, y_max=5.7)
        assert overlap_tiles(cell, 1.0, 10, 10) == (3, 4, 5, 6, 1)

    def test_three_by_two(self):
        cell = make_cell(x_min=0.5, x_max=2.5, y_min=0.5, y_max=1.5)
        assert overlap_tiles(cell, 1.0, 10, 10)[4] == 6

    def test_boundary_edge_does_not_claim_next_tile(self):
        cell = make_cell(x_min=1.0, x_max=2.0, y_min=1.0, y_max=2.0)
        assert overlap_tiles(cell, 1.0, 10, 10) == (1, 2, 1, 2, 1)


class TestTimeDecomposition:
    def test_only_straddling_cells_counted(self):
        # Three cells; instant j=3 falls strictly inside windows of cells 1
        # and 3 only, and no window strictly contains instant 1.
        T = 1e-9
        meta = make_meta(W=10.0, H=10.0, T=T, C=3)
        params = DecomposeParams(1.0, 5)   # instants at 0.2T, 0.4T, ... T
        c1 = make_cell(cid=1, t_min=0.5 * T, t_max=0.7 * T, x_min=0.1, x_max=0.9,
                       y_min=0.1, y_max=0.9, p_i=1e-6, p_s=0.0, p_l=0.0, r_tog=1.0)
        c2 = make_cell(cid=2, t_min=0.25 * T, t_max=0.55 * T, x_min=2.1, x_max=2.9,
                       y_min=2.1, y_max=2.9, p_i=1e-6, p_s=0.0, p_l=0.0, r_tog=1.0)
        c3 = make_cell(cid=3, t_min=0.55 * T, t_max=0.9 * T, x_min=4.1, x_max=4.9,
                       y_min=4.1, y_max=4.9, p_i=1e-6, p_s=0.0, p_l=0.0, r_tog=1.0)
        maps = decompose(CellTable.from_cells([c1, c2, c3]), meta, params)
        assert np.all(maps.p_t[0].data == 0.0)
        j3 = maps.p_t[2].data
        assert j3[0, 0] == pytest.approx(1e-6, rel=1e-12)   # cell 1
        assert j3[2, 2] == 0.0                              # cell 2 excluded
        assert j3[4, 4] == pytest.approx(1e-6, rel=1e-12)   # cell 3
        assert j3.sum() == pytest.approx(2e-6, rel=1e-12)

    def test_strict_inequality_window(self):
        # t_min=0.2T, t_max=0.5T with N=10: only instants 0.3T and 0.4T fall
        # strictly inside (boundary instants excluded).
        T = 1e-9
        meta = make_meta(T=T, C=1)
        cell = make_cell(t_min=0.2 * T, t_max=0.5 * T)
        maps = decompose(CellTable.from_cells([cell]), meta, DecomposeParams(1.0, 10))
        nonzero = [j + 1 for j in range(10) if maps.p_t[j].data.sum() > 0]
        assert nonzero == [3, 4]

    def test_zero_width_window_contributes_nowhere(self):
        T = 1e-9
        meta = make_meta(T=T, C=1)
        cell = make_cell(t_min=0.4 * T, t_max=0.4 * T)
        maps = decompose(CellTable.from_cells([cell]), meta, DecomposeParams(1.0, 5))
        assert all(g.data.sum() == 0.0 for g in maps.p_t)


class TestAgainstBruteForce:
    @pytest.mark.parametrize("seed,n_cells,n_inst", [(0, 1000, 7), (1, 300, 13)])
    def test_matches_scalar_loop(self, seed, n_cells, n_inst):
        rng = np.random.default_rng(seed)
        meta = make_meta(W=17.0, H=11.0, C=n_cells)
        cells = random_cells(rng, meta, n_cells)
        params = DecomposeParams(1.0, n_inst)
        got = decompose(cells, meta, params)
        ref_maps, ref_pt = brute_force_maps(cells, meta, params)
        # absolute floor covers prefix-sum residue where the loop gives exact 0;
        # 1e-14 of the map scale is ~100x float64 accumulation noise
        atol = 1e-14 * ref_maps["p_all"].max()
        for name, grid in zip(("p_i", "p_s", "p_sca", "p_all"), got.spatial()):
            np.testing.assert_allclose(grid.data, ref_maps[name], rtol=1e-9, atol=atol)
        for j in range(n_inst):
            np.testing.assert_allclose(got.p_t[j].data, ref_pt[j], rtol=1e-9, atol=atol)

    def test_domination_and_conservation(self, rng):
        meta = make_meta(W=20.0, H=20.0, C=1000)
        cells = random_cells(rng, meta, 1000)
        maps = decompose(cells, meta, DecomposeParams(1.0, 10))
        p_sca_cells = (cells.p_i + cells.p_s) * cells.r_tog + cells.p_l
        totals = {
            "p_i": cells.p_i.sum(), "p_s": cells.p_s.sum(),
            "p_sca": p_sca_cells.sum(),
            "p_all": (cells.p_i + cells.p_s + cells.p_l).sum(),
        }
        for name, grid in zip(("p_i", "p_s", "p_sca", "p_all"), maps.spatial()):
            assert grid.data.sum() == pytest.approx(totals[name], rel=1e-9)
        for g in maps.p_t:
            assert np.all(g.data <= maps.p_sca_map.data)


class TestStructuralProperties:
    def test_monotone_refinement(self, rng):
        # cells aligned to the coarse grid: halving l and re-summing 2x2
        # blocks reproduces the coarse maps
        meta = make_meta(W=8.0, H=8.0, C=50)
        ints = rng.integers(0, 7, size=(50, 2))
        spans = rng.integers(1, 2, size=(50, 2))
        cols = {
            "id": np.arange(50),
            "p_i": rng.uniform(0, 1e-6, 50), "p_s": rng.uniform(0, 1e-6, 50),
            "p_l": rng.uniform(0, 1e-7, 50), "r_tog": rng.uniform(0, 1, 50),
            "t_min": np.full(50, 0.1e-9), "t_max": np.full(50, 0.9e-9),
            "x_min": ints[:, 0].astype(float),
            "x_max": (ints[:, 0] + spans[:, 0]).astype(float),
            "y_min": ints[:, 1].astype(float),
            "y_max": (ints[:, 1] + spans[:, 1]).astype(float),
        }
        cells = CellTable(cols)
        coarse = decompose(cells, meta, DecomposeParams(1.0, 0))
        fine = decompose(cells, meta, DecomposeParams(0.5, 0))
        for cg, fg in zip(coarse.spatial(), fine.spatial()):
            resummed = fg.data.reshape(8, 2, 8, 2).sum(axis=(1, 3))
            np.testing.assert_allclose(resummed, cg.data, rtol=1e-9,
                                       atol=1e-14 * cg.data.max())

    def test_translation_equivariance(self, rng):
        meta = make_meta(W=20.0, H=20.0, C=200)
        cells = random_cells(rng, meta, 200)
        # keep everything at least one pitch away from the far edge
        mask_ok = (cells.x_max < 19.0) & (cells.y_max < 19.0)
        cols = {k: v[mask_ok] for k, v in cells.cols.items()}
        cells = CellTable(cols)
        shifted = CellTable({**cols,
                             "x_min": cols["x_min"] + 1.0, "x_max": cols["x_max"] + 1.0,
                             "y_min": cols["y_min"] + 1.0, "y_max": cols["y_max"] + 1.0})
        a = decompose(cells, meta, DecomposeParams(1.0, 0))
        b = decompose(shifted, meta, DecomposeParams(1.0, 0))
        np.testing.assert_allclose(
            b.p_all_map.data[1:, 1:], a.p_all_map.data[:-1, :-1],
            rtol=1e-9, atol=1e-14 * a.p_all_map.data.max(),
        )

    def test_n_zero_disables_time_maps(self, rng):
        meta = make_meta(W=10.0, H=10.0, C=100)
        cells = random_cells(rng, meta, 100)
        m0 = decompose(cells, meta, DecomposeParams(1.0, 0))
        m5 = decompose(cells, meta, DecomposeParams(1.0, 5))
        assert m0.p_t == [] and m0.n == 0
        for a, b in zip(m0.spatial(), m5.spatial()):
            np.testing.assert_array_equal(a.data, b.data)


class TestResistanceScaling:
    def test_uniform_resistance_identity(self, rng):
        meta = make_meta(W=10.0, H=10.0, C=50)
        cells = random_cells(rng, meta, 50)
        cells = CellTable(cells.cols, np.full(50, 450.0))
        scaled = scale_by_resistance(cells)
        np.testing.assert_array_equal(scaled.p_i, cells.p_i)
        np.testing.assert_array_equal(scaled.p_s, cells.p_s)
        np.testing.assert_array_equal(scaled.p_l, cells.p_l)

    def test_double_resistance_doubles_power(self):
        cols = {
            "id": np.array([0, 1]),
            "p_i": np.array([1e-6, 1e-6]), "p_s": np.array([1e-6, 1e-6]),
            "p_l": np.array([1e-7, 1e-7]), "r_tog": np.array([0.5, 0.5]),
            "t_min": np.array([0.0, 0.0]), "t_max": np.array([1e-9, 1e-9]),
            "x_min": np.array([0.0, 1.0]), "x_max": np.array([0.5, 1.5]),
            "y_min": np.array([0.0, 1.0]), "y_max": np.array([0.5, 1.5]),
        }
        # one cell at 2x the mean of the other: ratios follow r/mean(r)
        cells = CellTable(cols, np.array([300.0, 600.0]))
        scaled = scale_by_resistance(cells)
        assert scaled.p_i[1] / scaled.p_i[0] == pytest.approx(2.0, rel=1e-12)
        assert scaled.p_i[0] == pytest.approx(1e-6 * 300.0 / 450.0, rel=1e-12)

    def test_total_power_matches_scalar_reference(self, rng):
        meta = make_meta(W=10.0, H=10.0, C=80)
        cells = random_cells(rng, meta, 80, with_r_eff=True)
        scaled = scale_by_resistance(cells)
        maps = decompose(scaled, meta, DecomposeParams(1.0, 0))
        expected = 0.0
        mean_r = cells.r_eff.mean()
        for i in range(80):
            c = cells.row(i)
            expected += (c.p_i + c.p_s + c.p_l) * c.r_eff / mean_r
        assert maps.p_all_map.data.sum() == pytest.approx(expected, rel=1e-9)

    def test_missing_r_eff_is_config_error(self, rng):
        meta = make_meta(W=10.0, H=10.0, C=10)
        cells = random_cells(rng, meta, 10)
        with pytest.raises(ConfigError, match="r_eff"):
            scale_by_resistance(cells)


class TestMapSetIO:
    def test_round_trip(self, tmp_path, rng):
        meta = make_meta(W=12.0, H=9.0, C=150)
        cells = random_cells(rng, meta, 150)
        maps = decompose(cells, meta, DecomposeParams(1.0, 4))
        save_mapset(maps, tmp_path / "maps")
        again = load_mapset(tmp_path / "maps")
        assert again.n == 4 and again.t == maps.t
        np.testing.assert_allclose(
            again.p_all_map.data, maps.p_all_map.data, rtol=1e-7, atol=1e-30
        )
        assert len(again.p_t) == 4
