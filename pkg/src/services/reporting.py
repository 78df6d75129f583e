"""CSV and text reports written at the end of each CLI command."""

import logging
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from ..models.kinetic_models import ResidualReport, SweepAssessment, SweepRecord

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["epsilon", "t", "metric", "value", "tail_floor", "order"]
FLOAT_FORMAT = "%.17g"


def records_frame(records: Sequence[SweepRecord], config_hash: str) -> pd.DataFrame:
    df = pd.DataFrame([r.model_dump() for r in records], columns=RECORD_COLUMNS + ["tail_norm"])
    df = df[RECORD_COLUMNS].copy()
    df["config_hash"] = config_hash
    return df


def write_records(records: Sequence[SweepRecord], out_dir: Path, config_hash: str) -> Path:
    path = Path(out_dir) / "records.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records, config_hash).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"[CLI] Wrote {len(records)} records to {path}")
    return path


def write_trajectory(rows: List[Dict[str, float]], out_dir: Path, config_hash: str) -> Path:
    path = Path(out_dir) / "trajectory.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(rows)
    df["config_hash"] = config_hash
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"[CLI] Wrote {len(rows)} trajectory rows to {path}")
    return path


def residual_table(reports: Sequence[ResidualReport]) -> str:
    df = pd.DataFrame([r.model_dump() for r in reports],
                      columns=["module", "name", "measured", "tolerance", "passed", "detail"])
    return df.to_string(index=False, float_format=lambda x: f"{x:.3e}")


def sweep_summary(
    assessments: Sequence[SweepAssessment],
    records: Sequence[SweepRecord],
    config_hash: str,
) -> str:
    """One line per (metric, t): verdict, fitted slope, and the largest retained limit-term norm."""
    tails: Dict[tuple, float] = {}
    for r in records:
        key = (r.metric, r.t)
        tails[key] = max(tails.get(key, 0.0), r.tail_norm)
    lines = [f"config_hash: {config_hash}", ""]
    for a in assessments:
        verdict = "exact" if a.exact else ("pass" if a.passed else "FAIL")
        slope = f"{a.slope:.4f}" if a.slope is not None else "n/a"
        lines.append(
            f"{a.metric:<26} t={a.t:<10.6g} {verdict:<6} slope={slope:<8} monotone={a.monotone} "
            f"tail_norm={tails.get((a.metric, a.t), 0.0):.3e} {a.note}".rstrip()
        )
    passed = all(a.passed for a in assessments)
    lines += ["", f"overall: {'pass' if passed else 'FAIL'}"]
    return "\n".join(lines) + "\n"


def write_summary(text: str, out_dir: Path) -> Path:
    path = Path(out_dir) / "summary.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"[CLI] Wrote summary to {path}")
    return path
