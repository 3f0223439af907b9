"""CSV contract for causal datasets.

Files are UTF-8, comma-separated, with a header row ``t,y[,mu0,mu1][,e],x0,...,x{m-1}``.
Floats are written with 17 significant digits, so a write followed by a load reproduces
every value bit for bit. Row numbers in errors are 1-based file line numbers (the header
is line 1).
"""
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from data.models import CausalDataset
from utils.constants import COVARIATE_KINDS, OUTCOME_KINDS
from utils.errors import ParseError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
REQUIRED_COLUMNS = ("t", "y")
OPTIONAL_COLUMNS = ("mu0", "mu1", "e")


def _covariate_columns(columns: Sequence[str]) -> list:
    names = [c for c in columns if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    expected = [f"x{j}" for j in range(len(names))]
    if not names:
        raise ParseError("no covariate columns x0..x{m-1} in header", row=1)
    if set(names) != set(expected):
        unexpected = sorted(set(names) - set(expected))
        raise ParseError(f"unexpected or non-contiguous covariate columns: {unexpected}", row=1)
    return expected


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    parsed = pd.to_numeric(raw, errors="coerce")
    bad = ~np.isfinite(parsed.to_numpy(dtype=np.float64))
    if bad.any():
        position = int(np.flatnonzero(bad)[0])
        raise ParseError(f"non-numeric value {frame[column].iloc[position]!r}", row=position + 2, column=column)
    return raw.astype(np.float64).to_numpy()


def _require_binary(values: np.ndarray, column: str):
    bad = np.flatnonzero((values != 0) & (values != 1))
    if bad.size:
        raise ParseError(f"value {values[bad[0]]!r} is not binary", row=int(bad[0]) + 2, column=column)


def infer_covariate_kinds(x: np.ndarray) -> tuple:
    """Columns holding only 0 and 1 are binary, everything else continuous."""
    return tuple("binary" if np.all((col == 0) | (col == 1)) else "continuous" for col in x.T)


def load_csv(path: Union[str, Path], covariate_kinds: Optional[Sequence[str]] = None,
             outcome_kind: Optional[str] = None) -> CausalDataset:
    """Read a dataset file.

    Args:
        path: CSV file following the header contract
        covariate_kinds: Per-column kinds; inferred from the values when omitted
        outcome_kind: Outcome family; binary when y is 0/1, otherwise unbounded

    Returns:
        Typed CausalDataset

    Raises:
        ParseError: Missing required column, non-numeric cell, non-binary t or e,
            unpaired mu0/mu1, or a schema that does not fit the file
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} is empty", row=1) from e
    frame.columns = [c.strip() for c in frame.columns]

    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            raise ParseError(f"missing required column '{column}'", row=1, column=column)
    if ("mu0" in frame.columns) != ("mu1" in frame.columns):
        raise ParseError("mu0 and mu1 must appear together", row=1)
    x_columns = _covariate_columns(list(frame.columns))
    if frame.empty:
        raise ParseError(f"{path} has a header but no rows", row=2)

    t = _numeric(frame, "t")
    _require_binary(t, "t")
    y = _numeric(frame, "y")
    x = np.column_stack([_numeric(frame, c) for c in x_columns])
    mu0 = _numeric(frame, "mu0") if "mu0" in frame.columns else None
    mu1 = _numeric(frame, "mu1") if "mu1" in frame.columns else None
    rct_flag = None
    if "e" in frame.columns:
        e = _numeric(frame, "e")
        _require_binary(e, "e")
        rct_flag = e == 1

    if covariate_kinds is None:
        covariate_kinds = infer_covariate_kinds(x)
    else:
        covariate_kinds = tuple(covariate_kinds)
        if len(covariate_kinds) != x.shape[1]:
            raise ParseError(f"schema lists {len(covariate_kinds)} kinds for {x.shape[1]} covariate columns", row=1)
        for j, kind in enumerate(covariate_kinds):
            if kind not in COVARIATE_KINDS:
                raise ParseError(f"unknown covariate kind '{kind}'", row=1, column=f"x{j}")
            if kind == "binary":
                _require_binary(x[:, j], f"x{j}")

    if outcome_kind is None:
        outcome_kind = "binary" if np.all((y == 0) | (y == 1)) else "unbounded_continuous"
    elif outcome_kind not in OUTCOME_KINDS:
        raise ParseError(f"unknown outcome kind '{outcome_kind}'", column="y")
    if outcome_kind == "binary":
        _require_binary(y, "y")

    logger.info(f"Loaded {path}: n={len(t)}, m={x.shape[1]}, ground_truth={mu0 is not None}, rct={rct_flag is not None}")
    return CausalDataset(x=x, t=t, y=y, covariate_kinds=covariate_kinds, mu0=mu0, mu1=mu1,
                         rct_flag=rct_flag, outcome_kind=outcome_kind, name=path.stem)


def to_frame(data: CausalDataset) -> pd.DataFrame:
    """Column layout of the CSV contract."""
    columns = {"t": data.t, "y": data.y}
    if data.has_ground_truth:
        columns["mu0"] = data.mu0
        columns["mu1"] = data.mu1
    if data.rct_flag is not None:
        columns["e"] = data.rct_flag.astype(np.float64)
    for j in range(data.m):
        columns[f"x{j}"] = data.x[:, j]
    return pd.DataFrame(columns)


def write_csv(data: CausalDataset, path: Union[str, Path]) -> Path:
    """Write ``data`` losslessly; parent directories are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(data).to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")
    logger.info(f"Wrote {data.n} rows to {path}")
    return path
