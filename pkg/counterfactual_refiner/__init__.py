"""
Iterative counterfactual refinement of documents: a small discriminating
classifier scores each rewrite a large generator produces, and its verdict
is fed back until the prediction flips.
"""
# ##### BEGIN GPL LICENSE BLOCK #####
#
#  This program is free software; you can redistribute it and/or
#  modify it under the terms of the GNU General Public License
#  as published by the Free Software Foundation; either version 2
#  of the License, or (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
# ##### END GPL LICENSE BLOCK #####

from .structures import RefinerError, ValidationError
from . import config
from . import runner


def run(command, config_path=None, overrides=None, progress=True, **kwargs):
    """A function to allow scripts and tests to invoke a run without going
    through the command line, with a call to
    counterfactual_refiner.run(command, config_path).
    The overrides property takes dotted config keys, they win over the
    config file, which wins over the defaults.
    Eg:
    counterfactual_refiner.run(
        "refine",
        "experiment.toml",
        {
            'run.seed': 3,
            'engine.strategy': 'prompt',
        }
    )
    """
    settings = config.load_config(config_path, overrides)
    return runner.execute(command, settings, progress, **kwargs)


__all__ = ["run", "RefinerError", "ValidationError"]
