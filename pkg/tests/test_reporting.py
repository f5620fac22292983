import json

import numpy as np
import pytest

from core.errors import DomainError, ReportIOError
from core.labs.inequalities.fitting import box, make_records, make_verdict
from core.labs.mc_engine import tail_curve
from core.models.verdicts import FittedConstant, Preference
from core.tools import reporting
from core.tools.catalog import parse_key


def _lines(path):
    return path.read_text(encoding='utf-8').splitlines()


def test_csv_cells_are_rendered_exactly(tmp_path):
    path = reporting.write_csv(tmp_path / 'a' / 'b.csv', ['x', 'flag', 'missing', 'count'],
                               [(0.1, True, None, np.int64(3))], columns_doc='x: a number')
    assert _lines(path) == ['# x: a number', 'x,flag,missing,count', '0.10000000000000001,true,,3']


def test_verdict_rollup(tmp_path):
    constants = [FittedConstant(name='C', value=2.0, box=box(1.0, 4.0), preference=Preference.MINIMIZE)]
    verdict = make_verdict('demo', 'linf:n=16', make_records([0.0], [0.1], [0.1], [0.1], [0.2], [0.5]), constants)
    lines = _lines(reporting.write_verdict_rollup([verdict], tmp_path / 'verdicts.csv'))
    assert lines[0] == 'name,function_key,status,passed,worst_margin,constants'
    assert lines[1] == 'demo,linf:n=16,passed,true,0.5,C=2'


def test_profile_plot_data(engine, seed, tmp_path):
    emp = engine.sample_values(parse_key('linear:n=2'), 2_000, seed)
    profile = tail_curve(emp, emp.median(), 1.0, [0.0, 1.0, 2.0], scale_label='lipschitz')
    lines = _lines(reporting.emit_plot_data(profile, tmp_path / 'tails.csv'))
    assert lines[0].startswith('# t: deviation in units of lipschitz')
    assert lines[1] == 't,empirical,ci_lo,ci_hi,bound_upper,bound_lower'
    assert len(lines) == 5
    first = lines[2].split(',')
    assert first[4] == '0.5' and first[5] == ''


def test_verdict_plot_data(tmp_path):
    verdict = make_verdict('demo', 'x', make_records([0.0, 1.0], [0.1, 0.2], [0.1, 0.2], [0.1, 0.2], [0.3, 0.3],
                                                      [0.5, 0.25], [True, False]))
    lines = _lines(reporting.emit_plot_data(verdict, tmp_path / 'demo.csv'))
    assert lines[1] == 't,label,empirical,ci_lo,ci_hi,bound,margin,resolved'
    assert lines[3].endswith(',false')


def test_nothing_to_plot(tmp_path):
    with pytest.raises(DomainError):
        reporting.emit_plot_data('not plottable', tmp_path / 'x.csv')  # type: ignore[arg-type]


def test_json_report(tmp_path):
    verdict = make_verdict('demo', 'x', [])
    path = reporting.write_json(verdict, tmp_path / 'verdict.json')
    assert json.loads(path.read_text())['status'] == 'passed'


def test_unwritable_target(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pytest.raises(ReportIOError):
        reporting.write_json(make_verdict('demo', 'x', []), blocker / 'report.json')


def test_samples_keep_draw_order(engine, seed, tmp_path):
    emp = engine.sample_values(parse_key('linf:n=16'), 1_000, seed)
    path = reporting.save_samples(emp, tmp_path / 'linf.samples')
    assert path.stat().st_size == 16 + 8 * 1_000
    np.testing.assert_array_equal(reporting.load_samples(path), emp.draws)


@pytest.mark.parametrize('content', [b'short', b'NOTLAB\x00\x00' + bytes(8), reporting.SAMPLES_MAGIC + bytes(8) + b'x'])
def test_corrupt_sample_files(tmp_path, content):
    path = tmp_path / 'bad.samples'
    path.write_bytes(content)
    with pytest.raises(ReportIOError):
        reporting.load_samples(path)


def test_missing_sample_file(tmp_path):
    with pytest.raises(ReportIOError):
        reporting.load_samples(tmp_path / 'absent.samples')
