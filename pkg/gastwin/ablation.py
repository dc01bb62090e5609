# -*- coding: utf-8 -*-
"""
Ablation rows as configuration fragments.

Every row of the published ablations (decoder branch fusion, feed-forward
type, decoder width, classifier feature stage, attention pattern,
segmentation loss, local window size) is reachable by applying a config
fragment to the default configuration. The decoder, feed-forward,
classifier, pattern and loss ablations were run with 7x7 windows, so their
fragments include ``model.window = 7x7``.

:class:`AblationTable` profiles all rows and lists the counted parameters and
operations next to the published values (parameters in millions, "FLOPs" in
G as reported, i.e. multiply-accumulates, compared with
:attr:`gastwin.profiler.CostReport.gmacs`).

=================  =================  ======================================
table              row                fragment
=================  =================  ======================================
decoder fusion     F1 ... F1+F2+F3    ``decoder.branches = F1,F2``
ffn                regular, mix       ``model.ffn = plain``
decoder channels   128 ... 2048       ``decoder.channels = 256``
classifier source  stage 4, 3, 2      ``classifier.source_stage = 3``
attention pattern  LE, EL, LL, EE ... ``model.pattern = LL,LL,EE,EE``
loss               CE, Dice, ...      ``loss.seg = focal``
window             7x7, 5x5, 3x3      ``model.window = 3x3``
=================  =================  ======================================
"""
from collections import namedtuple
import pandas as pd

from gastwin.modelconfig import ModelConfig, apply_overrides
from gastwin.profiler import count_flops, relative_deviation

AblationRow = namedtuple('AblationRow', ['table', 'row', 'fragment',
                                         'ref_params_m', 'ref_gflops'])

_W7 = 'model.window = 7x7\n'


def _rows():
    rows = []
    for name, params, flops in [('F1', 3.256, 3.323),
                                ('F1+F2', 3.285, 3.443),
                                ('F2', 3.261, 3.407),
                                ('F2+F3', 3.326, 3.140),
                                ('F1+F3', 3.319, 3.387),
                                ('F3', 3.297, 3.019),
                                ('F1+F2+F3', 3.348, 3.508)]:
        rows.append(AblationRow('decoder fusion', name, _W7 +
                                'decoder.branches = {}\n'.format(
                                    name.replace('+', ',')), params, flops))
    rows += [AblationRow('ffn', 'regular', _W7 + 'model.ffn = plain\n',
                         3.065, 3.471),
             AblationRow('ffn', 'mix', _W7 + 'model.ffn = mix\n', 3.085,
                         3.508)]
    for channels, params, flops in [(128, 3.348, 3.508), (256, 3.644, 4.729),
                                    (512, 4.630, 9.309),
                                    (768, 6.140, 16.741),
                                    (1024, 8.174, 27.025),
                                    (2048, 21.555, 96.684)]:
        rows.append(AblationRow('decoder channels', str(channels),
                                _W7 + 'decoder.channels = {}\n'.format(
                                    channels), params, flops))
    for stage, params, flops in [(4, 3.348, 3.508), (3, 3.323, None),
                                 (2, 3.299, None)]:
        rows.append(AblationRow('classifier source', 'stage {}'.format(stage),
                                _W7 + 'classifier.source_stage = {}\n'.format(
                                    stage), params, flops))
    for name, pattern, params, flops in [
            ('LE', 'LE', 3.348, 3.508), ('EL', 'EL', 3.348, 3.508),
            ('LL', 'LL', 3.113, 3.214), ('EE', 'EE', 3.582, 3.802),
            ('LL-LL-EE-EE', 'LL,LL,EE,EE', 3.319, 3.259),
            ('EE-EE-LL-LL', 'EE,EE,LL,LL', 3.376, 3.757)]:
        rows.append(AblationRow('attention pattern', name,
                                _W7 + 'model.pattern = {}\n'.format(pattern),
                                params, flops))
    for name, loss in [('CE', 'cross_entropy'), ('Dice', 'dice'),
                       ('Focal', 'focal'), ('GPW', 'gaussian_plume')]:
        rows.append(AblationRow('loss', name, _W7 + 'loss.seg = {}\n'.format(
            loss), 3.348, 3.508))
    for window, flops in [(7, 3.508), (5, 3.428), (3, 3.367)]:
        rows.append(AblationRow('window', '{0}x{0}'.format(window),
                                'model.window = {0}x{0}\n'.format(window),
                                3.348, flops))
    return rows


ABLATIONS = _rows()
"""All ablation rows, see the module docstring."""

TABLES = tuple(dict.fromkeys(r.table for r in ABLATIONS))


def ablation_config(row, base=None):
    """Configuration of an :class:`AblationRow`, applied to `base` (default:
    the default configuration)."""
    return apply_overrides(base or ModelConfig().validate(), row.fragment)


class AblationTable:
    """
    Profiles ablation rows.

    Parameters
    ----------
    rows : sequence of :class:`AblationRow`, optional
        Default: :data:`ABLATIONS`.
    input_size : (int, int), optional
        Profiled input extents.
    base : :class:`gastwin.modelconfig.ModelConfig`, optional
        Configuration the fragments are applied to.

    Attributes
    ----------
    results : :class:`pandas.DataFrame` or `None`
        Results of the latest :meth:`run`.
    """
    def __init__(self, rows=None, input_size=(512, 512), base=None):
        self.rows = list(ABLATIONS if rows is None else rows)
        self.input_size = tuple(input_size)
        self.base = base
        self.results = None

    def select(self, table):
        """Return a table restricted to the rows of `table`."""
        return AblationTable([r for r in self.rows if r.table == table],
                             input_size=self.input_size, base=self.base)

    def run(self):
        """
        Profile all rows.

        Returns
        -------
        results : :class:`pandas.DataFrame`
            Columns ``'table'``, ``'row'``, ``'params_m'``, ``'gmacs'``,
            ``'gflops'``, ``'ref_params_m'``, ``'ref_gflops'``,
            ``'params_dev'``, ``'macs_dev'`` (relative deviations from the
            published values).
        """
        records = []
        for row in self.rows:
            report = count_flops(ablation_config(row, self.base),
                                 *self.input_size)
            records.append({
                'table': row.table, 'row': row.row,
                'params_m': report.mparams, 'gmacs': report.gmacs,
                'gflops': report.gflops,
                'ref_params_m': row.ref_params_m,
                'ref_gflops': row.ref_gflops,
                'params_dev': relative_deviation(report.mparams,
                                                 row.ref_params_m),
                'macs_dev': (relative_deviation(report.gmacs, row.ref_gflops)
                             if row.ref_gflops is not None else None)})
        self.results = pd.DataFrame(records)
        return self.results

    def to_string(self):
        results = self.results if self.results is not None else self.run()
        return ('macs_dev compares gmacs with ref_gflops, the published '
                '"FLOPs (G)" (multiply-accumulates)\n\n' +
                results.to_string(index=False, float_format='{:.3f}'.format))

    def __str__(self):
        return self.to_string()
