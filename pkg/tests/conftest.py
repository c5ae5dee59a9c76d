import numpy as np
import pytest

from irdrop.design import Cell, CellTable, DesignMeta

# One pass/fail line per acceptance criterion, printed at session end.
_ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE_RESULTS[name] = ("PASS" if passed else "FAIL") + (f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{name}: {_ACCEPTANCE_RESULTS[name]}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_meta(name="t0", W=10.0, H=10.0, T=1e-9, C=0, vdd=0.94,
              hotspot_threshold=0.0564) -> DesignMeta:
    return DesignMeta(name=name, W=W, H=H, T=T, C=C, vdd=vdd,
                      hotspot_threshold=hotspot_threshold)


def make_cell(cid=0, p_i=1e-6, p_s=1e-6, p_l=1e-7, r_tog=0.5,
              t_min=0.1e-9, t_max=0.9e-9, x_min=1.0, x_max=2.0,
              y_min=1.0, y_max=2.0, r_eff=None) -> Cell:
    return Cell(cid, p_i, p_s, p_l, r_tog, t_min, t_max,
                x_min, x_max, y_min, y_max, r_eff)


def random_cells(rng: np.random.Generator, meta: DesignMeta, n: int,
                 with_r_eff: bool = False) -> CellTable:
    """Uniformly placed cells with random powers and arrival windows."""
    x0 = rng.uniform(0, meta.W * 0.98, n)
    y0 = rng.uniform(0, meta.H * 0.98, n)
    wdt = rng.uniform(0.01, meta.W * 0.02, n)
    hgt = rng.uniform(0.01, meta.H * 0.02, n)
    t_lo = rng.uniform(0, meta.T * 0.7, n)
    t_hi = t_lo + rng.uniform(0, meta.T * 0.3, n)
    cols = {
        "id": np.arange(n),
        "p_i": rng.uniform(0, 2e-6, n),
        "p_s": rng.uniform(0, 2e-6, n),
        "p_l": rng.uniform(0, 1e-7, n),
        "r_tog": rng.uniform(0, 1, n),
        "t_min": t_lo,
        "t_max": np.minimum(t_hi, meta.T),
        "x_min": x0,
        "x_max": np.minimum(x0 + wdt, meta.W),
        "y_min": y0,
        "y_max": np.minimum(y0 + hgt, meta.H),
    }
    r_eff = rng.uniform(300.0, 600.0, n) if with_r_eff else None
    return CellTable(cols, r_eff)
