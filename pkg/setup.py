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


# standard library imports
from setuptools import setup

# third party imports
# library specific imports


__version__ = "0.1"


with open("README.md") as fp:
    long_description = fp.read()


setup(
    name="bevtrack",
    version=__version__,
    description="Camera-LiDAR fusion, query-based 3D multi-object tracking.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="The bevtrack authors",
    packages=["src"],
    python_requires=">=3.8",
    install_requires=["numpy>=1.22", "scipy>=1.8", "torch>=1.13"],
    classifiers=[
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    entry_points={"console_scripts": ["bevtrack = src.__main__:main"]},
)
