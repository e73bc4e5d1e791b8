"""Rolling-window index tracking with a sector-partitioned exclusive lasso."""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .groups_prox import GroupPartition
from .losses import least_squares
from .ppdna import PpdnaConfig, ProblemSpec, ppdna_solve

SELECT_THRESHOLD = 1e-8
MAX_MISSING = 0.10


class DataError(ValueError):
    """Input files are malformed or leave nothing to work with."""


class SolverError(RuntimeError):
    """A window fit did not reach its tolerance."""


@dataclass
class ReturnPanel:
    """Daily excess returns: ``R`` is days x assets, ``y`` the index."""

    dates: pd.DatetimeIndex
    tickers: list
    sectors: list
    R: np.ndarray
    y: np.ndarray
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.R.shape != (len(self.dates), len(self.tickers)):
            raise DataError("return matrix does not match dates x tickers")
        if self.y.shape != (len(self.dates),):
            raise DataError("index returns do not match dates")
        if len(self.sectors) != len(self.tickers):
            raise DataError("one sector label per ticker is required")
        if self.R.size == 0:
            raise DataError("empty return panel")
        if not (np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.y))):
            raise DataError("panel contains missing or infinite returns")

    @property
    def ndays(self):
        return len(self.dates)

    @property
    def sector_names(self):
        return sorted(set(self.sectors))

    def partition(self):
        return GroupPartition.from_labels(self.sectors)


@dataclass
class BacktestConfig:
    window: int = 90
    holding: int = 10
    folds: int = 9
    lambda_grid: tuple = None  # None: relative default grid; else absolute values
    grid_size: int = 20
    grid_span: tuple = (1e-6, 1.0)
    tol: float = 1e-6

    def __post_init__(self):
        if self.window < 2 or self.holding < 1:
            raise ValueError("window must be >= 2 and holding >= 1")
        if not 2 <= self.folds <= self.window:
            raise ValueError("folds must lie in [2, window]")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid or any(not v > 0 for v in grid):
                raise ValueError("lambda grid must be a nonempty set of positive values")
            self.lambda_grid = grid


# ---------------------------------------------------------------- ingestion


def _read_csv(path, columns, what):
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise DataError(f"cannot parse {what} file {path}: {exc}") from exc
    df.columns = [str(c).strip().lower() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataError(f"{what} file {path} lacks column(s) {missing}")
    return df[columns]


def _parse_dates(col, what):
    try:
        return pd.to_datetime(col, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad date in {what}: {exc}") from exc


def _parse_close(col, what):
    vals = pd.to_numeric(col, errors="coerce")
    bad = col.notna() & vals.isna()
    if bad.any():
        raise DataError(f"non-numeric close in {what}: {col[bad].iloc[0]!r}")
    if (vals <= 0).any():
        raise DataError(f"nonpositive close in {what}")
    return vals


def ingest_prices(csv_path, sector_map_path, index_path, risk_free=0.0):
    """Build a ``ReturnPanel`` from long-format price, sector and index CSVs.

    The index file defines the trading calendar. A ticker is dropped when more
    than 10% of its closes on that calendar are missing; remaining gaps are
    forward filled, and a leading gap takes the first observed close.
    ``risk_free`` is a per-day rate subtracted from every return.
    """
    prices = _read_csv(csv_path, ["date", "ticker", "close"], "price")
    sectors = _read_csv(sector_map_path, ["ticker", "sector"], "sector map")
    index = _read_csv(index_path, ["date", "close"], "index")

    prices = prices.assign(date=_parse_dates(prices["date"], "prices"),
                           ticker=prices["ticker"].astype(str).str.strip(),
                           close=_parse_close(prices["close"], "prices"))
    index = index.assign(date=_parse_dates(index["date"], "index"),
                         close=_parse_close(index["close"], "index"))
    if prices.duplicated(["date", "ticker"]).any():
        raise DataError("duplicate (date, ticker) rows in price file")
    if index["date"].duplicated().any():
        raise DataError("duplicate dates in index file")
    if index["close"].isna().any():
        raise DataError("index file has missing closes")

    sectors = sectors.assign(ticker=sectors["ticker"].astype(str).str.strip(),
                             sector=sectors["sector"].astype(str).str.strip())
    if sectors["ticker"].duplicated().any():
        raise DataError("ticker listed twice in sector map")
    sector_of = dict(zip(sectors["ticker"], sectors["sector"]))
    unknown = sorted(set(prices["ticker"]) - set(sector_of))
    if unknown:
        raise DataError(f"tickers missing from sector map: {unknown[:5]}")

    index = index.sort_values("date").set_index("date")["close"]
    wide = prices.pivot(index="date", columns="ticker", values="close")
    wide = wide.reindex(index.index)
    wide = wide[sorted(wide.columns)]
    frac = wide.isna().mean(axis=0)
    dropped = sorted(frac.index[frac > MAX_MISSING])
    wide = wide.drop(columns=dropped).ffill().bfill()
    if wide.shape[1] == 0 or len(index) < 2:
        raise DataError("no usable assets or dates after cleaning")

    R = wide.pct_change().iloc[1:] - risk_free
    y = index.pct_change().iloc[1:] - risk_free
    tickers = list(R.columns)
    return ReturnPanel(R.index, tickers, [sector_of[t] for t in tickers],
                       R.to_numpy(), y.to_numpy(), dropped)


# ---------------------------------------------------------------- fitting


def exclusive_lasso_fit(R, y, lam, part, x0=None, tol=1e-6):
    """Default fit hook: least squares + ``lam * sum_g ||x_g||_1^2`` via PPDNA."""
    spec = ProblemSpec(R, least_squares(y), lam, part)
    rep = ppdna_solve(spec, PpdnaConfig(tol=tol), x0=x0)
    if not rep.converged:
        raise SolverError(f"fit at lambda={lam:.3e} stopped with status {rep.status}, "
                          f"eta={rep.eta_kkt:.2e}")
    return rep.x


def _window_rows(T, window):
    return np.arange(T - window, T)


def fit_window(panel, T, lam, window=90, fit=None, tol=1e-6):
    """Portfolio fitted on the ``window`` days before row ``T``."""
    if not window <= T <= panel.ndays:
        raise ValueError(f"window [{T - window}, {T}) is not inside the panel")
    fit = fit or exclusive_lasso_fit
    rows = _window_rows(T, window)
    return fit(panel.R[rows], panel.y[rows], lam, panel.partition(), tol=tol)


def default_grid(R, y, size=20, span=(1e-6, 1.0)):
    scale = float(np.max(np.abs(R.T @ y)))
    if scale == 0.0:
        scale = 1.0
    return np.geomspace(span[0], span[1], size) * scale


def fold_slices(n, folds):
    """Contiguous blocks covering ``range(n)`` once."""
    return np.array_split(np.arange(n), folds)


def cross_validate_lambda(panel, T, grid, folds=9, window=90, fit=None, tol=1e-6):
    """Grid value with the smallest mean validation MSE; ties go to the smaller value.

    Returns ``(lambda, mean_mse)`` with ``mean_mse`` aligned to the sorted grid.
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if grid.size == 1:
        return float(grid[0]), np.full(1, np.nan)
    fit = fit or exclusive_lasso_fit
    rows = _window_rows(T, window)
    R, y = panel.R[rows], panel.y[rows]
    part = panel.partition()
    mse = np.zeros(grid.size)
    for val in fold_slices(window, folds):
        train = np.setdiff1d(np.arange(window), val)
        x = None
        # large to small so each fit warm-starts from a sparser neighbour
        for j in range(grid.size - 1, -1, -1):
            x = fit(R[train], y[train], grid[j], part, x0=x, tol=tol)
            r = R[val] @ x - y[val]
            mse[j] += float(r @ r) / len(val)
    mse /= folds
    return float(grid[int(np.argmin(mse))]), mse


# ---------------------------------------------------------------- backtest


@dataclass
class WindowRecord:
    date: str  # first holding day
    fit_start: str
    fit_end: str
    hold_end: str
    lam: float
    support_size: int
    sector_counts: dict
    in_sample_rmse: float
    out_sample_rmse: float


def _window_dict(w):
    d = asdict(w)
    d["lambda"] = d.pop("lam")
    return d


@dataclass
class BacktestReport:
    config: dict
    windows: list
    daily: pd.DataFrame
    sector_percentages: dict
    in_sample_rmse: float
    out_sample_rmse: float
    cumulative_portfolio: float
    cumulative_index: float

    def to_dict(self):
        return {
            "config": self.config,
            "windows": [_window_dict(w) for w in self.windows],
            "sector_percentages": self.sector_percentages,
            "in_sample_rmse": self.in_sample_rmse,
            "out_sample_rmse": self.out_sample_rmse,
            "cumulative_portfolio": self.cumulative_portfolio,
            "cumulative_index": self.cumulative_index,
        }

    def write(self, json_path, csv_path, extra=None):
        out = self.to_dict()
        if extra:
            out.update(extra)
        with open(json_path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
        self.daily.to_csv(csv_path, index=False)


def rebalance_rows(ndays, window, holding):
    """Rows ``T`` where a fit on ``[T - window, T)`` is held for ``[T, T + holding)``."""
    return list(range(window, ndays - holding + 1, holding))


def _rmse(r):
    return float(np.sqrt(np.mean(r * r)))


def run_backtest(panel, config=None, fit=None):
    cfg = config or BacktestConfig()
    if cfg.window + cfg.holding > panel.ndays:
        raise DataError(f"panel has {panel.ndays} days, need at least "
                        f"{cfg.window + cfg.holding}")
    fit = fit or exclusive_lasso_fit
    names = panel.sector_names
    sectors = np.asarray(panel.sectors)
    fmt = "%Y-%m-%d"

    records, daily = [], []
    totals = dict.fromkeys(names, 0)
    in_res = []
    for T in rebalance_rows(panel.ndays, cfg.window, cfg.holding):
        fit_rows = _window_rows(T, cfg.window)
        hold_rows = np.arange(T, T + cfg.holding)
        assert panel.dates[fit_rows[-1]] < panel.dates[hold_rows[0]], "look-ahead in window"

        R_T, y_T = panel.R[fit_rows], panel.y[fit_rows]
        if cfg.lambda_grid is None:
            grid = default_grid(R_T, y_T, cfg.grid_size, cfg.grid_span)
        else:
            grid = cfg.lambda_grid
        lam, _ = cross_validate_lambda(panel, T, grid, cfg.folds, cfg.window, fit, cfg.tol)
        x = fit_window(panel, T, lam, cfg.window, fit, cfg.tol)

        chosen = np.abs(x) > SELECT_THRESHOLD
        counts = {s: int(np.sum(chosen & (sectors == s))) for s in names}
        for s in names:
            totals[s] += counts[s]
        r_in = R_T @ x - y_T
        in_res.append(r_in)
        port = panel.R[hold_rows] @ x
        idx = panel.y[hold_rows]
        for d, pr, ir in zip(panel.dates[hold_rows], port, idx):
            daily.append((d.strftime(fmt), T, float(pr), float(ir)))
        records.append(WindowRecord(
            date=panel.dates[T].strftime(fmt),
            fit_start=panel.dates[fit_rows[0]].strftime(fmt),
            fit_end=panel.dates[fit_rows[-1]].strftime(fmt),
            hold_end=panel.dates[hold_rows[-1]].strftime(fmt),
            lam=lam, support_size=int(chosen.sum()), sector_counts=counts,
            in_sample_rmse=_rmse(r_in), out_sample_rmse=_rmse(port - idx)))

    daily = pd.DataFrame(daily, columns=["date", "window_row", "portfolio", "index"])
    total = sum(totals.values())
    pct = {s: (100.0 * totals[s] / total if total else 0.0) for s in names}
    oos = daily["portfolio"].to_numpy() - daily["index"].to_numpy()
    return BacktestReport(
        config=asdict(cfg), windows=records, daily=daily, sector_percentages=pct,
        in_sample_rmse=_rmse(np.concatenate(in_res)), out_sample_rmse=_rmse(oos),
        cumulative_portfolio=float(np.prod(1.0 + daily["portfolio"]) - 1.0),
        cumulative_index=float(np.prod(1.0 + daily["index"]) - 1.0))


# ---------------------------------------------------------------- synthetic data


def synthetic_market(n_days=251, n_sectors=12, per_sector=6, active_per_sector=1,
                     noise=1e-4, seed=0, start="2018-01-02"):
    """Long-format prices, sector map and index whose returns are a sparse
    combination touching every sector.

    Returns ``(prices, sector_map, index, weights)`` as DataFrames plus the
    true portfolio (indexed by ticker).
    """
    rng = np.random.default_rng(seed)
    n = n_sectors * per_sector
    tickers = [f"S{g:02d}A{j:02d}" for g in range(n_sectors) for j in range(per_sector)]
    sector = [f"sector{g:02d}" for g in range(n_sectors) for _ in range(per_sector)]
    market = 0.01 * rng.standard_normal(n_days - 1)
    sec_f = 0.008 * rng.standard_normal((n_days - 1, n_sectors))
    idio = 0.012 * rng.standard_normal((n_days - 1, n))
    R = 0.5 * market[:, None] + np.repeat(sec_f, per_sector, axis=1) + idio
    weights = np.zeros(n)
    for g in range(n_sectors):
        pos = rng.choice(per_sector, size=active_per_sector, replace=False)
        weights[g * per_sector + pos] = rng.uniform(0.5, 1.5, size=active_per_sector)
    weights /= weights.sum()
    y = R @ weights + noise * rng.standard_normal(n_days - 1)

    dates = pd.bdate_range(start, periods=n_days)
    close = 100.0 * np.vstack([np.ones(n), np.cumprod(1.0 + R, axis=0)])
    prices = pd.DataFrame({
        "date": np.repeat(dates.strftime("%Y-%m-%d"), n),
        "ticker": np.tile(tickers, n_days),
        "close": close.ravel(),
    })
    idx_close = 1000.0 * np.concatenate([[1.0], np.cumprod(1.0 + y)])
    index = pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "close": idx_close})
    smap = pd.DataFrame({"ticker": tickers, "sector": sector})
    return prices, smap, index, pd.Series(weights, index=tickers)


def write_market(prices, smap, index, directory):
    """Write the three CSVs into ``directory``; returns their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = (d / "prices.csv", d / "sectors.csv", d / "index.csv")
    prices.to_csv(paths[0], index=False)
    smap.to_csv(paths[1], index=False)
    index.to_csv(paths[2], index=False)
    return paths
