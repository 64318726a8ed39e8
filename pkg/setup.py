"""
Copyright (C) 2026 ccopf developers

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""
from setuptools import setup

setup(
    name="ccopf",
    version="0.1.0",
    packages=['ccopf', 'ccopf.qp_backends', 'ccopf.report_engines'],
    package_data={'ccopf': ['cases/*.m', 'cases/*.json']},
    description="Chance-constrained DC optimal power flow with wind uncertainty, solved by a cutting-plane method",
    author="ccopf developers",
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    keywords='optimal-power-flow chance-constraints wind cutting-plane robust-optimization',
    classifiers=[
        "Programming Language :: Python :: 3",
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License (GPL)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires='>=3.8',
    install_requires=['lru-dict', 'numpy', 'scipy', 'msgpack', 'msgpack-numpy'],
    extras_require={'cvxpy': ['cvxpy']},
    entry_points={'console_scripts': ['ccopf=ccopf.cli:main']},
)
