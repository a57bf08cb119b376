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
:synopsis: Basic objects.
"""


# standard library imports
import math
import collections

# third party imports
# library specific imports


__version__ = "0.1"

# nuScenes tracking classes, indexed by class_id
CLASSES = ("bicycle", "bus", "car", "motorcycle", "pedestrian", "trailer", "truck")
# extra logit for unmatched queries
NO_OBJECT = len(CLASSES)


_Box3D = collections.namedtuple(
    "Box3D",
    ("cx", "cy", "cz", "w", "l", "h", "yaw", "score", "class_id"),
    defaults=(1.0, 0),
)


class Box3D(_Box3D):
    """Oriented 3D box in the ego frame with confidence and class.

    Yaw rotates the length axis from ego +x towards ego +y.
    """

    __slots__ = ()

    @property
    def center(self):
        """Box center.

        :returns: center (in meters)
        :rtype: tuple
        """
        return (self.cx, self.cy, self.cz)

    @property
    def volume(self):
        return self.w * self.l * self.h

    @property
    def is_valid(self):
        """Whether the box satisfies its invariants.

        :returns: True when sizes are positive, yaw is normalized and
            score lies in [0,1]
        :rtype: bool
        """
        values = (self.cx, self.cy, self.cz, self.w, self.l, self.h, self.yaw)
        return (
            all(math.isfinite(value) for value in values)
            and min(self.w, self.l, self.h) > 0
            and -math.pi < self.yaw <= math.pi
            and 0.0 <= self.score <= 1.0
        )


# decoded track state: box, class, confidence c_j and identity id_j
TrackedObject = collections.namedtuple(
    "TrackedObject", ("box", "class_id", "confidence", "track_id")
)
