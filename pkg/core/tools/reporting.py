"""
File outputs: JSON reports, CSV side files and plot data, raw sample persistence.

Every real in a CSV is rendered with 17 significant digits.
"""
import csv
import logging
import struct
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from core.errors import DomainError, ReportIOError
from core.labs.inequalities.exact import LOWER_DEVIATION_FACTOR
from core.models.distributions import ConcentrationProfile, EmpiricalDistribution
from core.models.dvoretzky import DvoretzkyEstimate
from core.models.functions import RateFunction
from core.models.rearrangement import RearrangementCurve
from core.models.verdicts import InequalityVerdict
from core.tools.catalog import rate_value
from core.utils import fmt_real

_log = logging.getLogger('reporting')

SAMPLES_MAGIC = b'CONCLAB\x00'
_HEADER = struct.Struct('<8sQ')
Plottable = ConcentrationProfile | InequalityVerdict | RearrangementCurve


def _cell(value: Any) -> str:
    match value:
        case None:
            return ''
        case bool():
            return 'true' if value else 'false'
        case int() | np.integer():
            return str(int(value))
        case float() | np.floating():
            return fmt_real(float(value))
        case _:
            return str(value)


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportIOError(f'Cannot create directory {path.parent}: {e}') from e


def write_json(model: BaseModel, path: str | Path) -> Path:
    target = Path(path)
    _ensure_parent(target)
    try:
        target.write_text(model.model_dump_json(indent=2), encoding='utf-8')
    except OSError as e:
        raise ReportIOError(f'Cannot write {target}: {e}') from e
    _log.debug(f'Wrote {target}')
    return target


def write_csv(path: str | Path,
              header: Sequence[str],
              rows: Iterable[Sequence[Any]],
              columns_doc: str | None = None) -> Path:
    """A CSV file with an optional leading `# ...` line documenting the columns."""
    target = Path(path)
    _ensure_parent(target)
    try:
        with target.open('w', encoding='utf-8', newline='') as f:
            if columns_doc:
                f.write(f'# {columns_doc}\n')
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
    except OSError as e:
        raise ReportIOError(f'Cannot write {target}: {e}') from e
    _log.debug(f'Wrote {target}')
    return target


def write_verdict_rollup(verdicts: Sequence[InequalityVerdict], path: str | Path) -> Path:
    """One row per verdict."""
    rows = [
        (verdict.name, verdict.function_key, verdict.status.value, verdict.passed, verdict.worst_margin,
         ';'.join(f'{c.name}={fmt_real(c.value)}' for c in verdict.constants))
        for verdict in verdicts
    ]
    return write_csv(path, ['name', 'function_key', 'status', 'passed', 'worst_margin', 'constants'], rows)


def write_success_table(estimates: Sequence[DvoretzkyEstimate], path: str | Path) -> Path:
    rows = [
        (record.epsilon, record.k, record.successes, record.trials, record.wilson_lo, record.wilson_hi)
        for estimate in estimates
        for record in sorted(estimate.records, key=lambda r: r.k)
    ]
    return write_csv(path, ['epsilon', 'k', 'successes', 'trials', 'wilson_lo', 'wilson_hi'], rows)


def _profile_rows(profile: ConcentrationProfile) -> tuple[list[str], list[tuple], str]:
    t = np.asarray(profile.t_grid)
    match profile.scale_label:
        case 'lipschitz':
            upper: Sequence[float | None] = (0.5 * np.exp(-t ** 2 / 2.0)).tolist()
        case _:
            upper = [None] * t.size
    match profile.scale_label:
        case 'sd':
            lower: Sequence[float | None] = (0.5 * np.exp(-(t / LOWER_DEVIATION_FACTOR) ** 2)).tolist()
        case _:
            lower = [None] * t.size

    rows = list(zip(t, profile.upper_tail, profile.upper_lo, profile.upper_hi, upper, lower))
    doc = (f't: deviation in units of {profile.scale_label} from the {profile.center_label}; empirical, ci_lo, '
           f'ci_hi: upper tail with its Wilson interval; bound_upper: Gaussian concentration bound; bound_lower: '
           f'lower deviation bound')
    return ['t', 'empirical', 'ci_lo', 'ci_hi', 'bound_upper', 'bound_lower'], rows, doc


def _rate_rows(verdict: InequalityVerdict, rate: RateFunction) -> tuple[list[str], list[tuple], str]:
    lower = [record for record in verdict.grid if record.label.endswith('lower')]
    upper = [record for record in verdict.grid if record.label.endswith('upper')]

    def log_or_none(value: float) -> float | None:
        return float(np.log(value)) if value > 0 else None

    rows = [(low.t, float(rate_value(rate, low.t)), log_or_none(low.empirical), log_or_none(high.bound),
             log_or_none(low.bound))
            for low, high in zip(lower, upper)]
    doc = 't: deviation; alpha_value: rate at t; log_empirical: log two-sided tail; fitted_*: log of the fitted bounds'
    return ['t', 'alpha_value', 'log_empirical', 'fitted_upper', 'fitted_lower'], rows, doc


def _verdict_rows(verdict: InequalityVerdict) -> tuple[list[str], list[tuple], str]:
    rows = [(r.t, r.label, r.empirical, r.empirical_lo, r.empirical_hi, r.bound, r.margin, r.resolved)
            for r in verdict.grid]
    doc = f'{verdict.name} on {verdict.function_key}: empirical side with its interval against the bound'
    return ['t', 'label', 'empirical', 'ci_lo', 'ci_hi', 'bound', 'margin', 'resolved'], rows, doc


def emit_plot_data(item: Plottable, path: str | Path, rate: RateFunction | None = None) -> Path:
    """
    Plot data for a tail profile, a verdict (rate sandwiches need their `rate`) or a rearrangement curve.
    """
    match item:
        case ConcentrationProfile():
            header, rows, doc = _profile_rows(item)
        case InequalityVerdict(name='two_sided_rates') if rate is not None:
            header, rows, doc = _rate_rows(item, rate)
        case InequalityVerdict():
            header, rows, doc = _verdict_rows(item)
        case RearrangementCurve():
            header = ['s', 'f_star']
            rows = list(zip(item.s_grid, item.values))
            doc = f's: Gaussian coordinate; f_star: rearrangement of {item.source}'
        case _:
            raise DomainError(f'Nothing to plot for {type(item).__name__}')
    return write_csv(path, header, rows, doc)


def save_samples(samples: EmpiricalDistribution | np.ndarray, path: str | Path) -> Path:
    """Raw draws in draw order: an 8-byte magic, a little-endian uint64 count, then little-endian float64 values."""
    draws = samples.draws if isinstance(samples, EmpiricalDistribution) else np.asarray(samples, dtype=float)
    target = Path(path)
    _ensure_parent(target)
    try:
        with target.open('wb') as f:
            f.write(_HEADER.pack(SAMPLES_MAGIC, draws.size))
            f.write(np.ascontiguousarray(draws, dtype='<f8').tobytes())
    except OSError as e:
        raise ReportIOError(f'Cannot write {target}: {e}') from e
    return target


def load_samples(path: str | Path) -> np.ndarray:
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise ReportIOError(f'Cannot read {source}: {e}') from e

    if len(data) < _HEADER.size:
        raise ReportIOError(f'{source} is too short to hold a sample header')
    magic, count = _HEADER.unpack_from(data)
    if magic != SAMPLES_MAGIC:
        raise ReportIOError(f'{source} is not a sample file')
    if len(data) != _HEADER.size + 8 * count:
        raise ReportIOError(f'{source} announces {count} values but holds {(len(data) - _HEADER.size) / 8:g}')
    return np.frombuffer(data, dtype='<f8', offset=_HEADER.size).astype(float)
