"""Contingency-table epidemiology: prevalence, crude and adjusted odds ratios.

Crude ORs come from per-feature 2x2 tables against the declared
reference level. Adjusted ORs come from one unpenalized multivariable
logistic regression over reference-dropped dummy columns for every
schema feature (each level contrasts its reference, matching the crude
rows), with Wald standard errors from the inverse observed information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import RankDeficiencyError, SeparationError
from .ingest import Dataset, encode
from .learners import irls_fit
from .schema import DatasetSchema, FeatureSpec


@dataclass(frozen=True)
class ContingencyRow:
    feature: str
    category: str
    anemic: int
    not_anemic: int

    @property
    def total(self) -> int:
        return self.anemic + self.not_anemic

    @property
    def prevalence_pct(self) -> float | None:
        if self.total == 0:
            return None
        return 100.0 * self.anemic / self.total


@dataclass(frozen=True)
class OddsRatioRow:
    feature: str
    category: str
    anemic: int
    not_anemic: int
    is_reference: bool
    crude_or: float | None        # 1.0 on the reference row; None when undefined
    adjusted_or: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    p_value: float | None = None

    @property
    def total(self) -> int:
        return self.anemic + self.not_anemic

    @property
    def prevalence_pct(self) -> float | None:
        if self.total == 0:
            return None
        return 100.0 * self.anemic / self.total


def contingency(ds: Dataset, feature: str) -> list[ContingencyRow]:
    """Per-level outcome counts; declared-but-absent levels get zero rows."""
    spec = ds.schema.feature(feature)
    codes = ds.codes[feature]
    y = np.asarray(ds.labels)
    rows = []
    for idx, level in enumerate(spec.levels):
        mask = codes == idx
        rows.append(
            ContingencyRow(
                feature=feature,
                category=level,
                anemic=int(np.sum(y[mask] == 1)),
                not_anemic=int(np.sum(y[mask] == 0)),
            )
        )
    return rows


def crude_or(rows: list[ContingencyRow], reference: str) -> dict[str, float | None]:
    """Odds ratio of each level against the reference level.

    OR = (a * d_ref) / (b * c_ref) with a/b the level's anemic and
    not-anemic counts. The reference maps to 1.0; a zero cell anywhere in
    the pair leaves the OR undefined (None) — no continuity correction.
    """
    by_cat = {r.category: r for r in rows}
    if reference not in by_cat:
        raise KeyError(f"reference level {reference!r} not among rows")
    ref = by_cat[reference]
    out: dict[str, float | None] = {}
    for r in rows:
        if r.category == reference:
            out[r.category] = 1.0
        elif r.not_anemic == 0 or ref.anemic == 0 or r.anemic == 0 or ref.not_anemic == 0:
            out[r.category] = None
        else:
            out[r.category] = (r.anemic * ref.not_anemic) / (r.not_anemic * ref.anemic)
    return out


def wald_ci(beta: float, se: float, level: float = 0.95) -> tuple[float, float]:
    """Wald confidence interval on the odds-ratio scale: exp(beta +/- z*se)."""
    if se < 0:
        raise ValueError("standard error must be >= 0")
    z = stats.norm.ppf(0.5 + level / 2.0)
    return math.exp(beta - z * se), math.exp(beta + z * se)


def _dummy_schema(schema: DatasetSchema) -> DatasetSchema:
    """Every feature as reference-dropped indicators (ordinal kept per-level)."""
    features = []
    for spec in schema.features:
        kind = "one_hot" if len(spec.levels) > 2 else "binary"
        features.append(replace(spec, kind=kind))
    return DatasetSchema(
        features=tuple(features),
        label_name=schema.label_name,
        missing_tokens=schema.missing_tokens,
    )


@dataclass(frozen=True)
class AdjustedEstimate:
    feature: str
    category: str
    beta: float
    se: float
    adjusted_or: float
    ci_low: float
    ci_high: float
    p_value: float


def adjusted_or(ds: Dataset, ci_level: float = 0.95) -> list[AdjustedEstimate]:
    """Multivariable logistic regression over all schema features.

    Fits unpenalized IRLS on the all-dummies design; AOR = exp(beta) per
    non-reference level with Wald CI and two-sided normal p-value.
    """
    dummy_ds = Dataset(
        schema=_dummy_schema(ds.schema),
        codes={k: v.copy() for k, v in ds.codes.items()},
        labels=ds.labels.copy(),
    )
    matrix = encode(dummy_ds)
    X = matrix.values
    y = np.asarray(ds.labels, dtype=np.float64)

    try:
        result = irls_fit(X, y, l2=0.0)
    except RankDeficiencyError:
        raise
    except Exception as exc:
        raise SeparationError(f"adjusted model failed to converge: {exc}") from exc
    if not result.converged:
        worst = int(np.argmax(np.abs(result.beta[1:])))
        col = matrix.column_map[worst]
        raise SeparationError(
            "adjusted model did not converge (possible separation); "
            f"largest coefficient on {col.header}",
            column=col.header,
        )
    try:
        cov = np.linalg.inv(result.hessian)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("singular information matrix") from exc
    ses = np.sqrt(np.diag(cov))

    out = []
    for j, col in enumerate(matrix.column_map):
        beta = float(result.beta[j + 1])
        se = float(ses[j + 1])
        low, high = wald_ci(beta, se, ci_level)
        z = beta / se if se > 0 else math.inf
        p = float(2.0 * stats.norm.sf(abs(z)))
        level = col.level if col.level is not None else col.header
        out.append(
            AdjustedEstimate(
                feature=col.feature,
                category=level,
                beta=beta,
                se=se,
                adjusted_or=math.exp(beta),
                ci_low=low,
                ci_high=high,
                p_value=p,
            )
        )
    return out


def factors_table(ds: Dataset, adjust: bool = True) -> list[OddsRatioRow]:
    """One row per (feature, level): counts, prevalence, crude and adjusted OR.

    Levels appear in declared order with the reference row carrying
    crude OR 1.0 and empty adjusted fields.
    """
    adjusted: dict[tuple[str, str], AdjustedEstimate] = {}
    if adjust:
        for est in adjusted_or(ds):
            adjusted[(est.feature, est.category)] = est

    rows: list[OddsRatioRow] = []
    for spec in ds.schema.features:
        cont = contingency(ds, spec.name)
        crude = crude_or(cont, spec.reference_level)
        for c in cont:
            is_ref = c.category == spec.reference_level
            est = adjusted.get((spec.name, c.category))
            rows.append(
                OddsRatioRow(
                    feature=spec.name,
                    category=c.category,
                    anemic=c.anemic,
                    not_anemic=c.not_anemic,
                    is_reference=is_ref,
                    crude_or=crude[c.category],
                    adjusted_or=None if is_ref or est is None else est.adjusted_or,
                    ci_low=None if is_ref or est is None else est.ci_low,
                    ci_high=None if is_ref or est is None else est.ci_high,
                    p_value=None if is_ref or est is None else est.p_value,
                )
            )
    return rows


def format_or(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def format_ci(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


def format_p(value: float | None) -> str:
    if value is None:
        return ""
    if value < 0.001:
        return "<0.001"
    return f"{value:.3f}"
