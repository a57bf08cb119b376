#    This file is part of bevtrack 0.1.
#    Copyright (C) 2024-2026  The bevtrack authors
#
#    bevtrack is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.


"""
:synopsis: Output formatter.
"""


# standard library imports
# third party imports
# library specific imports
from src.template import Template

TEMPLATE = Template()


def pprint_value(value):
    """Pretty-print metric value.

    :param value: rate, count or None

    :returns: pretty-printed value
    :rtype: str
    """
    if value is None:
        return TEMPLATE.missing.format(value="-")
    if isinstance(value, int):
        return TEMPLATE.count.format(value=value)
    return TEMPLATE.rate.format(value=value)


def pprint_header(columns=Template.COLUMNS):
    """Pretty-print table header.

    :param tuple columns: metric names

    :returns: pretty-printed header
    :rtype: str
    """
    return TEMPLATE.label.format(label="") + "".join(
        TEMPLATE.title.format(title=column.upper()) for column in columns
    )


def pprint_row(label, metrics, columns=Template.COLUMNS):
    """Pretty-print table row.

    :param str label: row label
    :param dict metrics: metrics by name
    :param tuple columns: metric names

    :returns: pretty-printed row
    :rtype: str
    """
    return TEMPLATE.label.format(label=label) + "".join(
        pprint_value(metrics.get(column)) for column in columns
    )


def pprint_report(report):
    """Pretty-print metric report as a table.

    :param MetricReport report: report

    :returns: pretty-printed lines
    :rtype: tuple
    """
    return (
        pprint_header(),
        *(pprint_row(name, metrics) for name, metrics in report.classes.items()),
        pprint_row("overall", report.overall),
        *(pprint_info(note) for note in report.notes),
    )


def pprint_summary(reports):
    """Pretty-print one overall row per run.

    :param dict reports: MetricReport by run label

    :returns: pretty-printed lines
    :rtype: tuple
    """
    return (
        pprint_header(),
        *(pprint_row(label, report.overall) for label, report in reports.items()),
    )


def pprint_info(info):
    return TEMPLATE.info.format(info=info)


def pprint_error(error):
    return TEMPLATE.error.format(error=error)
