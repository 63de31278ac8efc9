"""Confusion-matrix metrics and accuracy breakdowns over months, stations and adopter groups.

Off-peak (action 1) is the positive class. Rates with a zero denominator are undefined: None in
Python and ``NA`` in the report files.
"""

from collections.abc import Mapping, Sequence
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, NonNegativeInt

from gcgail.errors import DataValidationError, ShapeError
from gcgail.panel.types import AdopterType, ExpertTrajectory, adopter_class
from gcgail.trainers.policy import PolicyModel, stack_trajectories

REPORT_COLUMNS = ('key', 'n', 'tp', 'fp', 'fn', 'tn', 'acc', 'prec', 'rec', 'f1', 'mean_acc', 'std_acc')
NA = 'NA'


class ConfusionMatrix(BaseModel):
    """Binary confusion counts."""

    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    fn: NonNegativeInt = 0
    tn: NonNegativeInt = 0

    @property
    def total(self) -> int:
        """Number of samples."""
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        """Elementwise sum."""
        return ConfusionMatrix(tp=self.tp + other.tp, fp=self.fp + other.fp, fn=self.fn + other.fn,
                               tn=self.tn + other.tn)


class MetricsReport(BaseModel):
    """Accuracy, precision, recall and F1; None where undefined."""

    model_config = ConfigDict(frozen=True)

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    n_samples: int


def confusion(predictions: Sequence[int] | np.ndarray, labels: Sequence[int] | np.ndarray) -> ConfusionMatrix:
    """Count outcomes of binary predictions.

    Raises:
        ShapeError: Different lengths.
        DataValidationError: Entries outside {0, 1}.
    """
    pred = np.asarray(predictions).ravel()
    true = np.asarray(labels).ravel()
    if pred.shape != true.shape:
        msg = f'{pred.size} predictions for {true.size} labels'
        raise ShapeError(msg)
    if not (np.isin(pred, (0, 1)).all() and np.isin(true, (0, 1)).all()):
        msg = 'Predictions and labels must be 0 or 1'
        raise DataValidationError(msg)
    return ConfusionMatrix(tp=int(np.sum((pred == 1) & (true == 1))), fp=int(np.sum((pred == 1) & (true == 0))),
                           fn=int(np.sum((pred == 0) & (true == 1))), tn=int(np.sum((pred == 0) & (true == 0))))


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Rates of a confusion matrix.

    Raises:
        DataValidationError: The matrix is empty.
    """
    if cm.total == 0:
        msg = 'Cannot compute metrics of an empty confusion matrix'
        raise DataValidationError(msg)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = None
    if precision is not None and recall is not None:
        f1 = _ratio(2.0 * precision * recall, precision + recall)
    return MetricsReport(accuracy=(cm.tp + cm.tn) / cm.total, precision=precision, recall=recall, f1=f1,
                         n_samples=cm.total)


class BreakdownAxis(str, Enum):
    """Keys a report can be split by."""

    MONTH = 'month'
    STATION = 'station'
    ADOPTER_CLASS = 'adopter_class'
    ADOPTER_TYPE = 'adopter_type'
    SCENARIO = 'scenario'


class BreakdownCell(BaseModel):
    """Metrics of one key with the spread of per-unit accuracy."""

    model_config = ConfigDict(frozen=True)

    confusion: ConfusionMatrix
    metrics: MetricsReport
    mean_acc: float
    std_acc: float


class BreakdownReport(BaseModel):
    """Cells of one axis, keyed by the stringified key."""

    model_config = ConfigDict(frozen=True)

    axis: BreakdownAxis
    cells: dict[str, BreakdownCell]


def _cell(frame: pd.DataFrame, spread_over: str) -> BreakdownCell:
    cm = confusion(frame['pred'].to_numpy(), frame['label'].to_numpy())
    per_unit = (frame['pred'] == frame['label']).groupby(frame[spread_over]).mean()
    return BreakdownCell(confusion=cm, metrics=metrics(cm), mean_acc=float(per_unit.mean()),
                         std_acc=float(np.std(per_unit.to_numpy())))


def breakdown(records: pd.DataFrame, axis: BreakdownAxis | str, *, spread_over: str = 'pid') -> BreakdownReport:
    """Split per-sample records along an axis.

    Args:
        records: One row per (passenger, month) with columns ``pid, month, station, adopter_class,
            adopter_types, scenario, pred, label``; ``adopter_types`` holds a tuple of type names.
        axis: Split key. Adopter types overlap, so one passenger can appear in several cells.
        spread_over: ``'pid'`` for the spread of per-passenger accuracy, ``'month'`` for per-month.

    Raises:
        DataValidationError: Unknown axis or spread unit.
    """
    try:
        axis = BreakdownAxis(axis)
    except ValueError:
        msg = f'Unknown breakdown axis {axis!r}'
        raise DataValidationError(msg) from None
    if spread_over not in {'pid', 'month'}:
        msg = f"spread_over must be 'pid' or 'month', got {spread_over!r}"
        raise DataValidationError(msg)
    if axis is BreakdownAxis.ADOPTER_TYPE:
        frame = records.explode('adopter_types').dropna(subset=['adopter_types'])
        key = 'adopter_types'
    else:
        frame, key = records, axis.value
    cells = {str(k): _cell(group, spread_over) for k, group in frame.groupby(key, sort=True)}
    return BreakdownReport(axis=axis, cells=cells)


def evaluation_records(policy: PolicyModel,
                       test_set: Sequence[ExpertTrajectory],
                       adopters: Mapping[int, frozenset[AdopterType]],
                       scenario: str = 'full') -> pd.DataFrame:
    """Greedy predictions on every test (passenger, month) with the breakdown keys."""
    arrays = stack_trajectories(test_set)
    stations = {t.passenger_id: t.work_station for t in test_set}
    types = {pid: tuple(sorted(t.value for t in adopters.get(pid, frozenset()))) for pid in stations}
    pids = arrays.passenger_ids
    return pd.DataFrame({'pid': pids,
                         'month': arrays.months,
                         'station': [stations[p] for p in pids],
                         'adopter_class': [adopter_class(adopters.get(p, frozenset())) for p in pids],
                         'adopter_types': [types[p] for p in pids],
                         'scenario': scenario,
                         'pred': policy.predict(arrays),
                         'label': arrays.actions})


def _fmt(value: float | None) -> float | str:
    return NA if value is None else value


def _report_row(key: str, cell: BreakdownCell) -> dict:
    cm, m = cell.confusion, cell.metrics
    return {'key': key, 'n': cm.total, 'tp': cm.tp, 'fp': cm.fp, 'fn': cm.fn, 'tn': cm.tn,
            'acc': _fmt(m.accuracy), 'prec': _fmt(m.precision), 'rec': _fmt(m.recall), 'f1': _fmt(m.f1),
            'mean_acc': cell.mean_acc, 'std_acc': cell.std_acc}


def report_frame(report: BreakdownReport) -> pd.DataFrame:
    """Report cells as rows with the report columns; month keys sort numerically."""
    items = list(report.cells.items())
    if report.axis in {BreakdownAxis.MONTH, BreakdownAxis.STATION}:
        items.sort(key=lambda kv: int(kv[0]))
    return pd.DataFrame([_report_row(k, c) for k, c in items], columns=list(REPORT_COLUMNS))


def global_cell(records: pd.DataFrame, *, spread_over: str = 'pid') -> BreakdownCell:
    """Pooled metrics over all records."""
    return _cell(records, spread_over)


def write_reports(records: pd.DataFrame, directory: Path, *, spread_over: str = 'pid') -> list[Path]:
    """Write every evaluation CSV into `directory` and return their paths."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    def save(frame: pd.DataFrame, name: str) -> None:
        path = directory / name
        frame.to_csv(path, index=False, na_rep=NA, lineterminator='\n')
        written.append(path)

    save(pd.DataFrame([_report_row('all', global_cell(records, spread_over=spread_over))],
                      columns=list(REPORT_COLUMNS)), 'metrics_global.csv')
    for axis, name in ((BreakdownAxis.MONTH, 'acc_by_month.csv'),
                       (BreakdownAxis.STATION, 'acc_by_station.csv'),
                       (BreakdownAxis.ADOPTER_TYPE, 'acc_by_adopter_type.csv'),
                       (BreakdownAxis.ADOPTER_CLASS, 'acc_by_adopter_class.csv')):
        save(report_frame(breakdown(records, axis, spread_over=spread_over)), name)

    correct = records.assign(correct=(records['pred'] == records['label']).astype(float))
    by_month = (correct.groupby(['month', 'adopter_class'], sort=True)
                .agg(n=('correct', 'size'), acc=('correct', 'mean'),
                     predicted_off_peak=('pred', 'mean'), observed_off_peak=('label', 'mean'))
                .reset_index())
    save(by_month, 'plotdata_month.csv')
    by_station = (correct.groupby('station', sort=True)
                  .agg(n=('correct', 'size'), acc=('correct', 'mean'),
                       predicted_off_peak=('pred', 'mean'), observed_off_peak=('label', 'mean'))
                  .reset_index())
    save(by_station, 'plotdata_station.csv')
    return written
