"""Settings of the gcgail command line, read once through dynaconf.

Sources, later ones winning:

* ``src/conf/parameters.toml``: ``GCGAIL_THREADS`` plus the ``[generator]``, ``[training]`` and
  ``[experiment]`` tables that sit under a run's own TOML files and flags;
* ``.secrets.toml`` and ``.env`` in the working directory, when present;
* environment variables, e.g. ``export GCGAIL_THREADS=4``.

from conf.config import conf

conf['GCGAIL_THREADS']
conf.training.max_iterations
conf.get('generator', {})
"""

from pathlib import Path

from dynaconf import Dynaconf, Validator

_HERE = Path(__file__).parent

VALIDATORS = [Validator('GCGAIL_THREADS', default=1, gte=1, cast=int),
              Validator('generator', 'training', 'experiment', default={}, is_type_of=dict)]

conf = Dynaconf(envvar_prefix=False,
                load_dotenv=True,
                settings_files=[str(_HERE / 'parameters.toml'), '.secrets.toml'],
                validators=VALIDATORS)
