"""Panel assembly and OLS / time-fixed-effects / random-intercept regressions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import optimize

from .indicators import IndicatorRow
from .records import normalize_name
from .stats import t_sf_two_sided

log = logging.getLogger(__name__)

DYNASTIC = ("ACC", "CCD", "GINI", "log_HHI")
SOCIO = ("POV", "HDI")
REGRESSION_COLUMNS = DYNASTIC + SOCIO + ("POV_lag_3year", "HDI_lag_3year")
REGRESSION_YEARS = (2007, 2010, 2013, 2016, 2019)
LAMBDA_BOUNDS = (1e-8, 1e8)


class RankDeficientError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_lambda: float):
        super().__init__(f"{message} (best lambda {best_lambda:g})")
        self.best_lambda = best_lambda


# --- panel -------------------------------------------------------------------

def align_socio(raw: pd.DataFrame, lag: int = 2) -> pd.DataFrame:
    """Pair survey-year socio values with the election ``lag`` years earlier."""
    out = raw.copy()
    out["year"] = out["year"].astype(int) - lag
    return out


def indicator_frame(rows: Iterable[IndicatorRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"province": r.province, "year": r.year, "ACC": r.acc, "CCD": r.ccd,
             "GINI": np.nan if r.cgc is None else r.cgc, "HHI": r.hhi}
            for r in rows
        ],
        columns=["province", "year", "ACC", "CCD", "GINI", "HHI"],
    )


def build_panel(
    indicators: Sequence[IndicatorRow] | pd.DataFrame,
    socio: pd.DataFrame,
    years: Sequence[int] = REGRESSION_YEARS,
    lag_years: int = 3,
    log_base: float | None = None,
    max_mismatch: float = 0.10,
) -> pd.DataFrame:
    """Join indicators with (already aligned) socio data, add logs and lags.

    Lag columns hold the same province's value ``lag_years`` earlier, so the
    socio table should include the base year. Rows outside ``years`` are
    dropped; rows missing any regression column are kept and flagged with
    ``complete = False``.
    """
    ind = indicators.copy() if isinstance(indicators, pd.DataFrame) else indicator_frame(indicators)
    soc = socio[["province", "year", "POV", "HDI"]].copy()
    ind["province"] = ind["province"].map(normalize_name)
    soc["province"] = soc["province"].map(normalize_name)
    ind["year"] = ind["year"].astype(int)
    soc["year"] = soc["year"].astype(int)

    ind_prov = set(ind["province"])
    missing = ind_prov - set(soc["province"])
    if ind_prov and len(missing) / len(ind_prov) > max_mismatch:
        raise ValueError(
            f"{len(missing)} of {len(ind_prov)} indicator provinces absent from socio data "
            f"(e.g. {sorted(missing)[:5]}); check province naming"
        )

    panel = ind.merge(soc, on=["province", "year"], how="inner")
    lagged = soc.rename(columns={"POV": f"POV_lag_{lag_years}year", "HDI": f"HDI_lag_{lag_years}year"})
    lagged["year"] = lagged["year"] + lag_years
    panel = panel.merge(lagged, on=["province", "year"], how="left")
    log_fn = np.log if log_base is None else (lambda v: np.log(v) / math.log(log_base))
    panel["log_HHI"] = log_fn(panel["HHI"].astype(float))
    panel = panel[panel["year"].isin(list(years))]
    cols = ["province", "year", "ACC", "CCD", "GINI", "HHI", "log_HHI", "POV", "HDI",
            f"POV_lag_{lag_years}year", f"HDI_lag_{lag_years}year"]
    panel = panel[cols].sort_values(["province", "year"]).reset_index(drop=True)
    panel["complete"] = panel[cols[2:]].notna().all(axis=1)
    return panel


# --- fits --------------------------------------------------------------------

@dataclass
class FitResult:
    model: str
    response: str
    names: list[str]
    coef: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    k: int
    n_obs: int
    residuals: np.ndarray
    fitted: np.ndarray
    r2: float | None = None
    r2_marginal: float | None = None
    r2_conditional: float | None = None
    sigma2_e: float | None = None
    sigma2_alpha: float | None = None
    lam: float | None = None
    n_groups: int | None = None
    group_effects: dict[str, float] = field(default_factory=dict)
    degenerate: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def aic(self) -> float:
        return 2 * self.k - 2 * self.log_likelihood

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def p_value(self, name: str) -> float:
        return float(self.p_values[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "response": self.response,
            "coefficients": [
                {"name": n, "estimate": float(c), "std_error": float(s), "p_value": float(p)}
                for n, c, s, p in zip(self.names, self.coef, self.se, self.p_values)
            ],
            "r2": self.r2,
            "r2_marginal": self.r2_marginal,
            "r2_conditional": self.r2_conditional,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "k": self.k,
            "sigma2_e": self.sigma2_e,
            "sigma2_alpha": self.sigma2_alpha,
            "lambda": self.lam,
            "n_obs": self.n_obs,
            "n_groups": self.n_groups,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


def check_rank(X: np.ndarray, names: Sequence[str]) -> None:
    """Raise naming every column that lies in the span of the columns before it."""
    if X.shape[0] >= X.shape[1] and np.linalg.matrix_rank(X) == X.shape[1]:
        return
    kept: list[int] = []
    collinear = []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            kept = trial
        else:
            collinear.append(names[j])
    raise RankDeficientError(f"design matrix is rank deficient; collinear columns: {', '.join(collinear)}")


def _p_from_se(coef: np.ndarray, se: np.ndarray, df: float | None) -> np.ndarray:
    out = np.empty_like(coef)
    for i, (c, s) in enumerate(zip(coef, se)):
        if s == 0:
            out[i] = 0.0 if c != 0 else 1.0
        elif df is None:
            out[i] = math.erfc(abs(c / s) / math.sqrt(2))
        else:
            out[i] = t_sf_two_sided(c / s, df)
    return out


def _gaussian_loglik(sse: float, n: int) -> float:
    if sse <= 0:
        return math.inf
    return -0.5 * n * (math.log(2 * math.pi * sse / n) + 1)


def _fit_ols(X: np.ndarray, y: np.ndarray, names: list[str], model: str, response: str) -> FitResult:
    n, p = X.shape
    check_rank(X, names)
    if np.ptp(y) == 0:
        coef = np.zeros(p)
        coef[0] = y[0]
        return FitResult(model, response, names, coef, np.zeros(p), _p_from_se(coef, np.zeros(p), None),
                         math.inf, p + 1, n, np.zeros(n), X @ coef, r2=1.0, sigma2_e=0.0,
                         degenerate="zero-variance response")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ coef
    resid = y - fitted
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    df = n - p
    if df > 0:
        cov = sse / df * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
    else:
        se = np.zeros(p)
    fit = FitResult(model, response, names, coef, se, _p_from_se(coef, se, df if df > 0 else None),
                    _gaussian_loglik(sse, n), p + 1, n, resid, fitted, r2=1 - sse / sst, sigma2_e=sse / n)
    if sse == 0:
        fit.degenerate = "perfect fit"
    return fit


def _complete(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise KeyError(f"frame lacks columns {missing}")
    return frame.dropna(subset=list(columns))


def _design(data: pd.DataFrame, predictors: Sequence[str], extra: pd.DataFrame | None = None) -> tuple[np.ndarray, list[str]]:
    cols = [np.ones(len(data))] + [data[p].to_numpy(float) for p in predictors]
    names = ["Intercept"] + list(predictors)
    if extra is not None:
        cols += [extra[c].to_numpy(float) for c in extra.columns]
        names += list(extra.columns)
    return np.column_stack(cols), names


def ols(frame: pd.DataFrame, response: str, predictors: Sequence[str], average_by: str | None = None) -> FitResult:
    """Least squares with an intercept; optionally on per-``average_by`` means."""
    data = _complete(frame, [response, *predictors] + ([average_by] if average_by else []))
    if average_by:
        data = data.groupby(average_by, sort=True)[[response, *predictors]].mean().reset_index()
    X, names = _design(data, predictors)
    return _fit_ols(X, data[response].to_numpy(float), names, "ols", response)


def year_dummies(years: pd.Series) -> pd.DataFrame:
    levels = sorted(years.unique())
    if len(levels) < 2:
        raise RankDeficientError("year dummies need at least two year levels (dummy collinearity)")
    return pd.DataFrame({f"year[{lv}]": (years == lv).astype(float).to_numpy() for lv in levels[1:]})


def fixed_effects(frame: pd.DataFrame, response: str, predictors: Sequence[str], time: str = "year") -> FitResult:
    """OLS with time dummies, first year as reference."""
    data = _complete(frame, [response, *predictors, time]).reset_index(drop=True)
    X, names = _design(data, predictors, year_dummies(data[time]))
    return _fit_ols(X, data[response].to_numpy(float), names, "fixed_effects", response)


class _RandomIntercept:
    """Profiled Gaussian likelihood of y = X b + a_g + e as a function of lambda = var(a) / var(e)."""

    def __init__(self, X: np.ndarray, y: np.ndarray, groups: np.ndarray, reml: bool):
        self.X, self.y, self.reml = X, y, reml
        self.n, self.p = X.shape
        self.codes, self.sizes = groups, np.bincount(groups).astype(float)
        self.gX = self._group_means(X)
        self.gy = self._group_means(y)

    def _group_means(self, a: np.ndarray) -> np.ndarray:
        a2 = a.reshape(len(a), -1)
        sums = np.zeros((len(self.sizes), a2.shape[1]))
        np.add.at(sums, self.codes, a2)
        means = sums / self.sizes[:, None]
        return means if a.ndim > 1 else means[:, 0]

    def transform(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        theta = 1 - 1 / np.sqrt(1 + lam * self.sizes)
        t = theta[self.codes]
        return self.X - t[:, None] * self.gX[self.codes], self.y - t * self.gy[self.codes]

    def solve(self, lam: float) -> tuple[np.ndarray, float, float, np.ndarray]:
        Xs, ys = self.transform(lam)
        beta, *_ = np.linalg.lstsq(Xs, ys, rcond=None)
        r = ys - Xs @ beta
        q = float(r @ r)
        logdet_v = float(np.log1p(lam * self.sizes).sum())
        dof = self.n - self.p if self.reml else self.n
        sigma2 = q / dof
        if sigma2 <= 0:
            return beta, 0.0, math.inf, Xs
        ll = -0.5 * (dof * math.log(2 * math.pi * sigma2) + logdet_v + dof)
        if self.reml:
            ll -= 0.5 * float(np.linalg.slogdet(Xs.T @ Xs)[1])
        return beta, sigma2, ll, Xs

    def loglik(self, log_lam: float) -> float:
        return self.solve(math.exp(log_lam))[2]


def lmm_random_intercept(
    frame: pd.DataFrame,
    response: str,
    predictors: Sequence[str],
    group: str = "province",
    time: str | None = "year",
    reml: bool = False,
    lam: float | None = None,
    grid_points: int = 41,
    xatol: float = 1e-9,
    maxiter: int = 500,
) -> FitResult:
    """Random-intercept linear mixed model fitted by profiled maximum likelihood.

    The likelihood is profiled over beta and the residual variance, leaving
    lambda = var(intercepts) / var(residual). A log-spaced grid over
    [1e-8, 1e8] brackets the optimum and a bounded Brent search refines it.
    An optimum at the lower edge (or not beating lambda = 0) is reported as a
    degenerate random effect with the OLS fit. Pass ``lam`` to fix lambda.
    Fixed-effect p-values are Wald z-tests.
    """
    cols = [response, *predictors, group] + ([time] if time else [])
    data = _complete(frame, cols).reset_index(drop=True)
    codes, uniques = pd.factorize(data[group], sort=True)
    if len(uniques) < 2:
        raise ValueError("random intercept needs at least two groups")
    if np.bincount(codes).max() < 2:
        raise ValueError("random intercept needs a group with at least two observations")
    X, names = _design(data, predictors, year_dummies(data[time]) if time else None)
    y = data[response].to_numpy(float)
    check_rank(X, names)
    n, p = X.shape
    k = p + 2

    if np.ptp(y) == 0:
        coef = np.zeros(p)
        coef[0] = y[0]
        zeros = np.zeros(p)
        return FitResult("lmm", response, names, coef, zeros, _p_from_se(coef, zeros, None), math.inf, k, n,
                         np.zeros(n), X @ coef, r2_marginal=0.0, r2_conditional=1.0, sigma2_e=0.0,
                         sigma2_alpha=0.0, lam=0.0, n_groups=len(uniques), degenerate="zero-variance response")

    model = _RandomIntercept(X, y, codes, reml)
    notes: list[str] = []
    degenerate = None
    lo, hi = (math.log(b) for b in LAMBDA_BOUNDS)
    if lam is None:
        grid = np.linspace(lo, hi, grid_points)
        values = [model.loglik(t) for t in grid]
        i = int(np.argmax(values))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
        res = optimize.minimize_scalar(lambda t: -model.loglik(t), bounds=(a, b), method="bounded",
                                       options={"xatol": xatol, "maxiter": maxiter})
        if not res.success:
            raise ConvergenceError("profiled likelihood search did not converge", math.exp(float(res.x)))
        t_best, ll_best = (float(res.x), -float(res.fun))
        if values[i] > ll_best:
            t_best, ll_best = float(grid[i]), values[i]
        lam_hat = math.exp(t_best)
        if t_best - lo < 1e-6 * (hi - lo) or model.solve(0.0)[2] >= ll_best:
            lam_hat = 0.0
            degenerate = "random effect degenerate"
            notes.append("lambda at lower boundary; OLS-equivalent fit")
        elif hi - t_best < 1e-6 * (hi - lo):
            degenerate = "residual variance degenerate"
            notes.append("lambda at upper boundary; residual variance near zero")
    else:
        lam_hat = float(lam)
        notes.append(f"lambda fixed at {lam_hat:g}")

    beta, sigma2_e, ll, Xs = model.solve(lam_hat)
    sigma2_alpha = lam_hat * sigma2_e
    cov = sigma2_e * np.linalg.inv(Xs.T @ Xs)
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    fixed = X @ beta
    marginal_resid = y - fixed
    shrink = lam_hat * model.sizes / (1 + lam_hat * model.sizes)
    blup = shrink * model._group_means(marginal_resid)
    fitted = fixed + blup[codes]
    var_f = float(np.var(fixed))
    total = var_f + sigma2_alpha + sigma2_e
    return FitResult(
        "lmm", response, names, beta, se, _p_from_se(beta, se, None), ll, k, n,
        y - fitted, fitted,
        r2_marginal=var_f / total if total > 0 else 0.0,
        r2_conditional=(var_f + sigma2_alpha) / total if total > 0 else 1.0,
        sigma2_e=sigma2_e, sigma2_alpha=sigma2_alpha, lam=lam_hat, n_groups=len(uniques),
        group_effects={str(g): float(v) for g, v in zip(uniques, blup)},
        degenerate=degenerate, notes=notes,
    )


def vif(frame: pd.DataFrame, predictors: Sequence[str], threshold: float = 5.0) -> dict[str, dict]:
    """Variance inflation factor of each predictor against the others (with intercept)."""
    if len(predictors) < 2:
        raise ValueError("VIF needs at least two predictors")
    data = _complete(frame, predictors)
    out = {}
    for j, name in enumerate(predictors):
        y = data[name].to_numpy(float)
        others = [p for p in predictors if p != name]
        X, _ = _design(data, others)
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        sst = float(((y - y.mean()) ** 2).sum())
        r2 = 1 - float(resid @ resid) / sst if sst > 0 else 1.0
        value = math.inf if r2 >= 1 - 1e-12 else 1 / (1 - r2)
        out[name] = {"vif": value, "flag": value >= threshold}
    return out


def qq_residual_export(fit: FitResult) -> list[tuple[float, float]]:
    """(theoretical normal quantile, standardized residual) pairs in ascending order."""
    r = np.sort(np.asarray(fit.residuals, dtype=float))
    n = len(r)
    sd = float(r.std(ddof=1)) if n > 1 else 0.0
    z = (r - r.mean()) / sd if sd > 0 else np.zeros(n)
    nd = NormalDist()
    return [(nd.inv_cdf((i - 0.5) / n), float(z[i - 1])) for i in range(1, n + 1)]


# --- directions --------------------------------------------------------------

@dataclass
class DirectionResult:
    fits: dict[tuple[str, str], FitResult] = field(default_factory=dict)
    errors: dict[tuple[str, str], str] = field(default_factory=dict)

    def comparison_table(self) -> list[dict]:
        rows = []
        for (label, model), fit in self.fits.items():
            rows.append({
                "regression": label, "model": model, "n_obs": fit.n_obs,
                "r2": fit.r2, "r2_marginal": fit.r2_marginal, "r2_conditional": fit.r2_conditional,
                "log_likelihood": fit.log_likelihood, "aic": fit.aic, "degenerate": fit.degenerate,
            })
        for (label, model), msg in self.errors.items():
            rows.append({"regression": label, "model": model, "error": msg})
        return rows

    def to_dict(self) -> dict:
        return {
            "fits": [{"regression": lbl, **fit.to_dict()} for (lbl, _), fit in self.fits.items()],
            "errors": [{"regression": lbl, "model": m, "error": e} for (lbl, m), e in self.errors.items()],
            "comparison": self.comparison_table(),
        }


def _run_three(result: DirectionResult, frame: pd.DataFrame, label: str, response: str,
               predictors: Sequence[str], reml: bool) -> None:
    runs = (
        ("ols", lambda: ols(frame, response, predictors, average_by="province")),
        ("fixed_effects", lambda: fixed_effects(frame, response, predictors)),
        ("lmm", lambda: lmm_random_intercept(frame, response, predictors, reml=reml)),
    )
    for model, run in runs:
        try:
            fit = run()
        except (ValueError, RuntimeError, KeyError, np.linalg.LinAlgError) as exc:
            log.warning("%s %s failed: %s", label, model, exc)
            result.errors[(label, model)] = str(exc)
            continue
        result.fits[(label, model)] = fit
        if fit.degenerate:
            result.errors[(label, model)] = f"degenerate fit: {fit.degenerate}"


def run_direction1(frame: pd.DataFrame, responses: Sequence[str] = ("HDI", "POV"),
                   predictors: Sequence[str] = DYNASTIC, reml: bool = False) -> DirectionResult:
    """Socio indicator on the four dynastic indicators: OLS on province means, FE and LMM."""
    result = DirectionResult()
    for response in responses:
        _run_three(result, frame, response, response, predictors, reml)
    return result


def run_direction2(frame: pd.DataFrame, responses: Sequence[str] = DYNASTIC,
                   families: Sequence[str] = ("HDI", "POV"), reml: bool = False) -> DirectionResult:
    """Each dynastic indicator on one socio indicator and its 3-year lag."""
    result = DirectionResult()
    for response in responses:
        for fam in families:
            _run_three(result, frame, f"{response}~{fam}", response, (fam, f"{fam}_lag_3year"), reml)
    return result
