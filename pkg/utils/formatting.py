"""Plain-text tables and summary rows for run reports."""
from typing import Dict, List, Optional, Sequence

import pandas as pd

from metrics.report import MetricsReport
from utils.constants import METRIC_NAMES, SCOPES

METRIC_LABELS = {"eate": "eATE", "pehe": "sqrt(PEHE)", "eatt": "eATT", "policy_risk": "R_pol"}
SCOPE_LABELS = {"within_sample": "in", "out_of_sample": "out"}
MISSING = "-"


def format_mean_se(mean: Optional[float], se: Optional[float], digits: int = 3) -> str:
    """``.150±.003`` style cell; a missing mean gives ``-``."""
    if mean is None:
        return MISSING
    text = f"{mean:.{digits}f}"
    if se is not None:
        text += f"±{se:.{digits}f}"
    return text


def summary_rows(results: Dict[str, Dict[str, MetricsReport]]) -> List[dict]:
    """One row per variant × scope with each metric's mean and standard error.

    Args:
        results: variant -> scope -> aggregated MetricsReport, in output order
    """
    rows = []
    for variant, by_scope in results.items():
        for scope in SCOPES:
            report = by_scope.get(scope)
            if report is None:
                continue
            row = {"variant": variant, "scope": scope, "n_replications": report.n_replications}
            for metric in METRIC_NAMES:
                row[metric] = report.value(metric)
                row[f"{metric}_se"] = report.se(metric)
            rows.append(row)
    return rows


def summary_frame(results: Dict[str, Dict[str, MetricsReport]]) -> pd.DataFrame:
    columns = ["variant", "scope", "n_replications"]
    for metric in METRIC_NAMES:
        columns += [metric, f"{metric}_se"]
    return pd.DataFrame(summary_rows(results), columns=columns)


def _present_columns(results: Dict[str, Dict[str, MetricsReport]]) -> List[tuple]:
    """(metric, scope) pairs with a value for at least one variant."""
    present = []
    for metric in METRIC_NAMES:
        for scope in SCOPES:
            if any(by_scope.get(scope) is not None and by_scope[scope].value(metric) is not None
                   for by_scope in results.values()):
                present.append((metric, scope))
    return present


def render_table(results: Dict[str, Dict[str, MetricsReport]], variants: Optional[Sequence[str]] = None) -> str:
    """Variants as rows, metric/scope pairs as columns, cells as mean±se.

    Args:
        results: variant -> scope -> aggregated MetricsReport
        variants: Row order (defaults to the order of ``results``)

    Returns:
        The table as a string without a trailing newline
    """
    variants = list(variants) if variants is not None else list(results)
    columns = _present_columns(results)
    header = ["variant"] + [f"{METRIC_LABELS[m]} ({SCOPE_LABELS[s]})" for m, s in columns]
    rows = []
    for variant in variants:
        by_scope = results.get(variant, {})
        cells = [variant]
        for metric, scope in columns:
            report = by_scope.get(scope)
            cells.append(MISSING if report is None else format_mean_se(report.value(metric), report.se(metric)))
        rows.append(cells)
    return pd.DataFrame(rows, columns=header).to_string(index=False, justify="left")


def render_tmle_summary(summary: dict, eate: Optional[float] = None) -> str:
    """Key/value block for a TMLE run."""
    lines = [
        f"ATE        {summary['ate']:.4f}",
        f"SE         {summary['se']:.4f}",
        f"95% CI     [{summary['ci_lower']:.4f}, {summary['ci_upper']:.4f}]",
        f"epsilon    {summary['epsilon_hat']:.6f}",
        f"mean IC    {summary['mean_ic']:.3e}",
        f"truncated  {summary['truncated']} of {summary['n']}",
    ]
    if eate is not None:
        lines.append(f"eATE       {eate:.4f}")
    return "\n".join(lines)
