"""
Report emission: results.csv, the cross-seed summary, training curves and predictor
accuracy. Rows are sorted and floats written with repr so re-emission is byte-identical.
"""
import csv
import logging
import os
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from exceptions import ConfigurationError, StorageError
from schemas.experiment_schemas import EvalRow, SummaryRow
from schemas.training_schemas import IterationStats

logger = logging.getLogger(__name__)

RESULT_FIELDS = list(EvalRow.model_fields)
SUMMARY_FIELDS = list(SummaryRow.model_fields)
CURVE_FIELDS = ["experiment", "seed", "key"] + list(IterationStats.model_fields)
PREDICTOR_FIELDS = ["experiment", "seed", "t", "accuracy", "n"]
ORACLE_EXPERIMENTS = ("optimal", "oracle")

Curve = Tuple[str, int, str, Sequence[IterationStats]]


def _cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _write_csv(path: str, fields: List[str], rows: Iterable[Dict]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    temporary = f"{path}.tmp"
    with open(temporary, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row[field]) for field in fields])
    os.replace(temporary, path)
    return path


def sort_rows(rows: Iterable[EvalRow]) -> List[EvalRow]:
    return sorted(rows, key=lambda row: (row.experiment, row.partner, row.seed))


def aggregate_seeds(rows: Sequence[EvalRow], ddof: int = 0) -> List[SummaryRow]:
    """Mean and standard deviation of per-seed metrics, grouped by (experiment, partner)"""
    if not rows:
        raise ConfigurationError("Nothing to aggregate", code="EMPTY_GROUP")
    groups: "OrderedDict[Tuple[str, str], List[EvalRow]]" = OrderedDict()
    for row in sorted(rows, key=lambda row: (row.experiment, row.partner, row.seed)):
        groups.setdefault((row.experiment, row.partner), []).append(row)
    summaries = []
    for (experiment, partner), members in groups.items():
        if len(members) < 2:
            raise ConfigurationError(
                f"Group {experiment}/{partner} has {len(members)} seed; at least two are needed",
                code="TOO_FEW_SEEDS",
            )
        lengths = np.array([row.mean_length for row in members])
        returns = np.array([row.mean_return for row in members])
        last = np.array([row.mean_last_step_reward for row in members])
        summaries.append(SummaryRow(
            experiment=experiment,
            partner=partner,
            n_seeds=len(members),
            mean_length=float(lengths.mean()),
            std_length=float(lengths.std(ddof=ddof)),
            mean_return=float(returns.mean()),
            std_return=float(returns.std(ddof=ddof)),
            mean_last_step_reward=float(last.mean()),
            std_last_step_reward=float(last.std(ddof=ddof)),
        ))
    return summaries


def write_results(rows: Iterable[EvalRow], path: str) -> str:
    return _write_csv(path, RESULT_FIELDS, (row.model_dump() for row in sort_rows(rows)))


def read_results(path: str) -> List[EvalRow]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return [EvalRow(**row) for row in csv.DictReader(handle)]
    except OSError:
        raise StorageError(f"Cannot read results file {path}", path=path, code="MISSING_FILE") from None
    except ValidationError as error:
        raise StorageError(
            f"Malformed results file {path}",
            path=path,
            code="BAD_RESULTS",
            details={"path": path, "errors": [item["msg"] for item in error.errors()]},
        ) from None


def write_curves(curves: Iterable[Curve], path: str) -> str:
    ordered = sorted(curves, key=lambda curve: (curve[0], curve[2], curve[1]))
    rows = (
        dict(experiment=experiment, seed=seed, key=key, **stats.model_dump())
        for experiment, seed, key, history in ordered
        for stats in history
    )
    return _write_csv(path, CURVE_FIELDS, rows)


def write_predictor_accuracy(rows: Iterable[Tuple[str, int, int, float, int]], path: str) -> str:
    ordered = sorted(rows, key=lambda row: (row[0], row[1], row[2]))
    return _write_csv(path, PREDICTOR_FIELDS, (dict(zip(PREDICTOR_FIELDS, row)) for row in ordered))


def emit_report(
    rows: Sequence[EvalRow],
    out_dir: str,
    curves: Optional[Iterable[Curve]] = None,
    predictor_rows: Optional[Iterable[Tuple[str, int, int, float, int]]] = None,
    ddof: int = 0,
) -> List[str]:
    """Write results.csv and, when available, summary.csv, curves.csv and predictor.csv"""
    written = [write_results(rows, os.path.join(out_dir, "results.csv"))]
    trained = [row for row in rows if row.experiment not in ORACLE_EXPERIMENTS]
    if trained:
        try:
            summary = aggregate_seeds(trained, ddof)
        except ConfigurationError as error:
            logger.warning("Skipping summary.csv: %s", error.message)
        else:
            written.append(_write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_FIELDS, (s.model_dump() for s in summary)))
    if curves is not None:
        written.append(write_curves(curves, os.path.join(out_dir, "curves.csv")))
    if predictor_rows is not None:
        written.append(write_predictor_accuracy(predictor_rows, os.path.join(out_dir, "predictor.csv")))
    logger.info("Report written to %s (%d files)", out_dir, len(written))
    return written
