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
import os
import uuid
import shutil
import tempfile

import numpy as np

from ccopf import *
from ccopf.errors import CCOPFException


def random_folder():
    return uuid.uuid4().hex.upper()[:8]


def clean(path):
    if os.path.isdir(path):
        shutil.rmtree(path)
    elif os.path.isfile(path):
        os.remove(path)


def setup_test():
    path = os.path.join(tempfile.gettempdir(), random_folder())
    clean(path)
    return path


def fixture(name: str) -> str:
    return bundled_case(name)


def load_fixture(name: str, config: str = None) -> GridCase:
    """ Bundled case with its JSON configuration applied (default: the .json next to it, if any) """
    path = fixture(name)
    if config is None:
        candidate = os.path.splitext(path)[0] + '.json'
        config = candidate if os.path.isfile(candidate) else None
    else:
        config = fixture(config)
    chance = load_config(config)
    return apply_config(load_case(path), chance)


def desk_case() -> GridCase:
    """ Three-bus path with one generator and one wind farm (mu 30, sigma 9) """
    return load_fixture('case3_path.m')


def random_grid(rng: np.random.Generator, n: int, wind: int, limit: float = np.inf) -> GridCase:
    """
    Random connected grid: a random spanning tree plus a few extra lines. Generators on the
    first buses, wind farms after them, the slack bus last with the largest load.
    """
    lines = []
    for k in range(1, n):
        lines.append((int(rng.integers(0, k)), k))
    for _ in range(int(rng.integers(0, n))):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        lines.append((i, j))
    order = rng.permutation(n)
    generators = 1 + int(rng.integers(0, max(1, n - 1 - wind)))
    loads = rng.uniform(0, 20, size=n)
    loads[:generators] = 0.
    loads[-1] += 30.
    buses = tuple(Bus(i, i + 1, float(loads[i])) for i in range(n))
    # Relabel so the tree is not always rooted at bus 0
    edges = tuple(Line(int(order[i]), int(order[j]), float(rng.uniform(1, 10)), limit) for i, j in lines)
    gens = tuple(Generator(k, 0., 1000., float(rng.uniform(0.01, 0.1)), float(rng.uniform(1, 10)))
                 for k in range(generators))
    farms = tuple(WindFarm(generators + k, float(rng.uniform(1, 5)), float(rng.uniform(0.5, 2)))
                  for k in range(min(wind, n - 1 - generators)))
    return GridCase(buses, edges, gens, farms, n - 1, name=f'random{n}')


def control_for(case: GridCase, rng: np.random.Generator = None) -> AffineControl:
    """ A viable control spreading the net load and the response over all generators """
    count = len(case.generators)
    if rng is None:
        alpha = np.full(count, 1. / count)
    else:
        alpha = rng.dirichlet(np.ones(count))
    net = case.total_load - float(np.sum(case.wind_mean))
    return AffineControl(np.full(count, net / count), alpha)


def star_case(sigma: float = 10.) -> GridCase:
    """ Two generators and a wind farm, each on its own line to the load bus; line 1-4 is tight """
    buses = (Bus(0, 1), Bus(1, 2), Bus(2, 3), Bus(3, 4, 150.))
    lines = (Line(0, 3, 1., 60.), Line(1, 3, 1., 200.), Line(2, 3, 1.))
    generators = (Generator(0, 0., 200., .01, 10.), Generator(1, 0., 200., .02, 12.))
    return GridCase(buses, lines, generators, (WindFarm(2, 40., sigma),), 3, name='star')
