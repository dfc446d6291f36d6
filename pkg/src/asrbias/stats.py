"""Descriptive statistics, random-intercept LMM (REML), Wald and proportion tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from asrbias.alignment import ScoreTable, mean_se
from asrbias.errors import FitError

LOG_LAMBDA_BOUNDS = (-12.0, 12.0)
GOLDEN_TOL = 1e-9
_INVPHI = (math.sqrt(5) - 1) / 2


# ---------------------------------------------------------------- normal

def norm_sf(z: float) -> float:
    """Upper tail of the standard normal, via erfc (no cancellation for large z)."""
    return 0.5 * math.erfc(z / math.sqrt(2))


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2))


def two_sided_p(z: float) -> float:
    return min(1.0, math.erfc(abs(z) / math.sqrt(2)))


@dataclass(frozen=True)
class StatResult:
    estimate: float
    se: float | None
    z: float | None
    p_two_sided: float | None
    effect_size: float | None = None
    converged: bool = True
    degenerate: bool = False

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_two_sided is not None and self.p_two_sided < alpha

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "se": self.se, "z": self.z, "p": self.p_two_sided,
                "effect_size": self.effect_size, "converged": self.converged,
                "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StatResult":
        return cls(d["estimate"], d["se"], d["z"], d["p"], d.get("effect_size"),
                   d.get("converged", True), d.get("degenerate", False))


# ----------------------------------------------------------- descriptive

def descriptive(table: ScoreTable) -> dict[tuple[str, str, str], dict]:
    """Mean and SE of finite speaker rates per (group, system, metric)."""
    buckets: dict[tuple[str, str, str], list[float]] = {}
    for (spk, sys, metric), c in sorted(table.cells.items()):
        if math.isfinite(c.rate):
            buckets.setdefault((table.speaker_groups[spk], sys, metric), []).append(c.rate)
    out = {}
    for key, rates in sorted(buckets.items()):
        st = mean_se(rates)
        out[key] = {"mean": st.mean, "se": st.se, "n": st.n}
    return out


# ------------------------------------------------------------------ LMM

@dataclass(frozen=True)
class LmmDesign:
    y: np.ndarray
    X: np.ndarray
    groups: tuple[str, ...]
    columns: tuple[str, ...]

    def __post_init__(self):
        if self.X.shape[0] != len(self.y) or len(self.groups) != len(self.y):
            raise FitError("design dimensions disagree")
        if self.X.shape[1] != len(self.columns):
            raise FitError("column names do not match design width")


@dataclass(frozen=True)
class LmmFit:
    beta: np.ndarray
    se: np.ndarray
    sigma_b2: float
    sigma_e2: float
    reml_loglik: float
    converged: bool
    ratio: float          # sigma_b2 / sigma_e2
    columns: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "beta": [float(b) for b in self.beta],
                "se": [float(s) for s in self.se], "sigma_b2": self.sigma_b2,
                "sigma_e2": self.sigma_e2, "reml_loglik": self.reml_loglik,
                "converged": self.converged, "ratio": self.ratio}


class _RemlProfile:
    """REML criterion profiled over beta and sigma_e2 for a fixed variance ratio.

    Exploits the block structure of V = I + lam * Z Z^T: each speaker block
    is I + lam * 11^T, whose inverse and determinant are closed form.
    """

    def __init__(self, design: LmmDesign):
        y, X = np.asarray(design.y, float), np.asarray(design.X, float)
        labels = sorted(set(design.groups))
        idx = {g: i for i, g in enumerate(labels)}
        gi = np.array([idx[g] for g in design.groups])
        q = len(labels)
        self.n, self.p = X.shape
        self.sizes = np.bincount(gi, minlength=q).astype(float)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.S = np.zeros((q, self.p))          # per-speaker column sums of X
        np.add.at(self.S, gi, X)
        self.T = np.bincount(gi, weights=y, minlength=q)
        self.X, self.y, self.gi, self.q = X, y, gi, q

    def solve(self, lam: float):
        c = lam / (1.0 + lam * self.sizes)
        A = self.XtX - (self.S * c[:, None]).T @ self.S
        b = self.Xty - self.S.T @ (c * self.T)
        beta = np.linalg.solve(A, b)
        r = self.y - self.X @ beta
        rs = np.bincount(self.gi, weights=r, minlength=self.q)
        quad = float(r @ r - np.sum(c * rs * rs))
        dof = self.n - self.p
        sigma2 = quad / dof
        logdet_v = float(np.sum(np.log1p(lam * self.sizes)))
        sign, logdet_a = np.linalg.slogdet(A)
        if sigma2 <= 0 or sign <= 0:
            return -math.inf, beta, sigma2, A
        ll = -0.5 * (dof * math.log(2 * math.pi * sigma2) + dof + logdet_v + logdet_a)
        return ll, beta, sigma2, A

    def loglik(self, lam: float) -> float:
        return self.solve(lam)[0]


def reml_loglik(design: LmmDesign, ratio: float) -> float:
    """Profiled REML log-likelihood at variance ratio sigma_b2 / sigma_e2."""
    return _RemlProfile(design).loglik(ratio)


def _check_design(design: LmmDesign) -> None:
    n, p = design.X.shape
    counts: dict[str, int] = {}
    for g in design.groups:
        counts[g] = counts.get(g, 0) + 1
    if len(counts) < 2:
        raise FitError("need at least two speakers")
    if max(counts.values()) < 2:
        raise FitError("variance components unidentifiable: no speaker has two observations")
    if np.linalg.matrix_rank(design.X) < p:
        raise FitError("fixed-effect design matrix is rank deficient")
    if n <= p:
        raise FitError("not enough observations for the fixed effects")


def fit_lmm(design: LmmDesign, max_iter: int = 500) -> LmmFit:
    """REML fit of y = X beta + Z b + e with one random intercept per speaker.

    The variance ratio is found by golden-section search on its logarithm
    over [-12, 12], after a coarse scan picks the bracket; the zero-ratio
    boundary is evaluated separately.
    """
    _check_design(design)
    prof = _RemlProfile(design)
    f = lambda t: prof.loglik(math.exp(t))  # noqa: E731

    lo, hi = LOG_LAMBDA_BOUNDS
    grid = np.linspace(lo, hi, 49)
    values = [f(t) for t in grid]
    k = int(np.argmax(values))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    converged = False
    for _ in range(max_iter):
        if b - a <= GOLDEN_TOL:
            converged = True
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    t_best = (a + b) / 2
    candidates = [(f(t_best), math.exp(t_best)), (fc, math.exp(c)), (fd, math.exp(d)),
                  (prof.loglik(0.0), 0.0)]
    ll, lam = max(candidates, key=lambda x: (x[0], -x[1]))
    if not math.isfinite(ll):
        converged = False
    _, beta, sigma2, A = prof.solve(lam)
    cov = np.linalg.inv(A) * sigma2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return LmmFit(beta, se, max(lam * sigma2, 0.0), sigma2, ll, converged, lam, design.columns)


def wald_test(fit: LmmFit, coefficient: int | str) -> StatResult:
    if isinstance(coefficient, str):
        coefficient = fit.columns.index(coefficient)
    if not fit.converged:
        raise FitError("Wald test on a fit that did not converge")
    est, se = float(fit.beta[coefficient]), float(fit.se[coefficient])
    if not se > 0:
        raise FitError(f"degenerate test: standard error of {fit.columns[coefficient]!r} is 0")
    z = est / se
    return StatResult(est, se, z, two_sided_p(z), converged=fit.converged)


def build_design(
    table: ScoreTable,
    metric: str,
    reference_group: str | None = None,
    reference_system: str | None = None,
) -> LmmDesign:
    """Rates per (speaker, system) with treatment-coded ethnicity and system effects."""
    obs = sorted((spk, sys, rate) for (spk, sys), rate in table.speaker_rates(metric).items()
                 if math.isfinite(rate))
    if not obs:
        raise FitError(f"no finite {metric} rates to model")
    groups = sorted({table.speaker_groups[s] for s, _, _ in obs})
    systems = sorted({sys for _, sys, _ in obs})
    ref_g = reference_group if reference_group is not None else (
        "CA" if "CA" in groups else groups[0])
    ref_s = reference_system if reference_system is not None else systems[0]
    if ref_g not in groups:
        raise FitError(f"reference group {ref_g!r} has no observations")
    if ref_s not in systems:
        raise FitError(f"reference system {ref_s!r} has no observations")
    g_cols = [g for g in groups if g != ref_g]
    s_cols = [s for s in systems if s != ref_s]
    columns = ["(intercept)"] + [f"group:{g}" for g in g_cols] + [f"system:{s}" for s in s_cols]
    X = np.zeros((len(obs), len(columns)))
    X[:, 0] = 1.0
    for row, (spk, sys, _) in enumerate(obs):
        g = table.speaker_groups[spk]
        if g in g_cols:
            X[row, 1 + g_cols.index(g)] = 1.0
        if sys in s_cols:
            X[row, 1 + len(g_cols) + s_cols.index(sys)] = 1.0
    y = np.array([r for _, _, r in obs])
    return LmmDesign(y, X, tuple(s for s, _, _ in obs), tuple(columns))


# ------------------------------------------------------------- proportions

def cohens_h(p1: float, p2: float) -> float:
    return 2 * math.asin(math.sqrt(p1)) - 2 * math.asin(math.sqrt(p2))


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> StatResult:
    """Pooled two-proportion z-test with Cohen's h as effect size."""
    if n1 < 1 or n2 < 1 or not (0 <= k1 <= n1) or not (0 <= k2 <= n2):
        raise ValueError("need 0 <= k <= n and n >= 1 for both samples")
    p1, p2 = k1 / n1, k2 / n2
    h = cohens_h(p1, p2)
    pooled = (k1 + k2) / (n1 + n2)
    # no variance anywhere, or none within either sample
    if pooled in (0.0, 1.0) or (p1 in (0.0, 1.0) and p2 in (0.0, 1.0)):
        return StatResult(p1 - p2, None, None, None, h, degenerate=True)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    z = (p1 - p2) / se
    return StatResult(p1 - p2, se, z, two_sided_p(z), h)


# --------------------------------------------------------------- battery

def run_battery(
    score_table: ScoreTable,
    cooc=None,
    metrics: Sequence[str] | None = None,
    reference_group: str | None = None,
    reference_system: str | None = None,
    alpha: float = 0.05,
    markers: Sequence[str] | None = None,
) -> dict:
    """All tests the report shows, as a JSON-ready dict."""
    out: dict = {"digest": score_table.digest, "alpha": alpha, "lmm": {}, "proportion": {},
                 "errors": []}
    for metric in metrics or score_table.metrics:
        try:
            design = build_design(score_table, metric, reference_group, reference_system)
            fit = fit_lmm(design)
        except FitError as exc:
            out["errors"].append(f"{metric}: {exc}")
            continue
        tests = {}
        for i, col in enumerate(fit.columns):
            if i == 0:
                continue
            try:
                res = wald_test(fit, i)
            except FitError as exc:
                out["errors"].append(f"{metric} {col}: {exc}")
                continue
            tests[col] = {**res.to_dict(), "significant": res.significant(alpha)}
        out["lmm"][metric] = {"fit": fit.to_dict(), "tests": tests, "n_obs": int(len(design.y))}

    if cooc is not None:
        if cooc.digest != score_table.digest:
            raise FitError("co-occurrence table and score table come from different manifests")
        groups = cooc.group_names
        ref = reference_group if reference_group is not None else (
            "CA" if "CA" in groups else (groups[0] if groups else None))
        wanted = set(markers) if markers else None
        for (g, sys, m), cell in sorted(cooc.cells.items()):
            if g == ref or (wanted is not None and m not in wanted):
                continue
            base = cooc.cells.get((ref, sys, m))
            if base is None or cell.contexts == 0 or base.contexts == 0:
                continue
            res = two_proportion_test(cell.overlap, cell.contexts, base.overlap, base.contexts)
            out["proportion"][f"{m}/{sys}/{g}-vs-{ref}"] = {
                **res.to_dict(), "significant": res.significant(alpha)}
    return out
