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
:synopsis: Templates.
"""


# standard library imports
# third party imports
# library specific imports


class Template:
    """Output formatting template.

    :cvar tuple COLUMNS: metric columns of the result tables
    """

    COLUMNS = (
        "amota",
        "amotp",
        "hota",
        "deta",
        "assa",
        "mota",
        "motp",
        "recall",
        "ids",
        "frag",
        "map",
    )

    @property
    def label(self):
        return "{label:<12}"

    @property
    def title(self):
        return "{title:>8}"

    @property
    def rate(self):
        return "{value:>8.3f}"

    @property
    def count(self):
        return "{value:>8d}"

    @property
    def missing(self):
        return "{value:>8}"

    @property
    def info(self):
        return "{info}"

    @property
    def error(self):
        return "error: {error}"
