"""Use Typer to run the experiment pipeline: generate data, train, evaluate and compare.

Usage: gcgail --help
Examples:
gcgail gen --out out --seed 0
gcgail train --model gcgail --scenario ges --seed 1
gcgail eval --run out/gcgail/ges/1
gcgail compare --config experiments/benchmark.toml --run-missing

Exit codes: 0 ok, 2 bad input or config, 3 training aborted, 4 conditioning mismatch,
5 incomplete comparison matrix.
"""

from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import pandas as pd
import toml
import typer
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from conf.config import conf
from gcgail.errors import CompatibilityError, ConfigError, GcgailError, TrainingDivergedError
from gcgail.evaluation import NA, evaluation_records, write_reports
from gcgail.mdp import ConditioningMode
from gcgail.panel.adopters import classify_adopters
from gcgail.panel.features import PromotionConfig, extract_features
from gcgail.panel.generator import GeneratorConfig, synthesize_population
from gcgail.panel.io import (
    PROFILES_FILE,
    TRAJECTORIES_FILE,
    TRIPS_FILE,
    load_generator_config,
    read_trajectories,
    write_profiles,
    write_trajectories,
    write_trips,
)
from gcgail.panel.scenarios import Scenario, split_and_filter
from gcgail.trainers.bc import train_bc
from gcgail.trainers.checkpoint import (
    CHECKPOINT_FILE,
    TRAIN_LOG_FILE,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
    write_training_log,
)
from gcgail.trainers.config import ModelName, TrainConfig
from gcgail.trainers.gail import train_gail
from gcgail.utils.log import configure_logging
from gcgail.utils.provenance import PROVENANCE_FILE, write_provenance

EXIT_INPUT = 2
EXIT_TRAINING = 3
EXIT_COMPATIBILITY = 4
EXIT_INCOMPLETE = 5

DATA_DIR = 'data'
RUN_LOG = 'run.log'
COMPARISON_FILE = 'comparison.csv'
SUMMARY_FILE = 'summary_by_scenario.csv'
ORDERING_FILE = 'ordering.txt'
ORDERED_MODELS = (ModelName.GCGAIL, ModelName.CGAIL, ModelName.GAIL)

app = typer.Typer(help='Group-conditioned imitation learning of departure-time choices.', no_args_is_help=True)


class ExperimentConfig(BaseModel):
    """Run matrix of a comparison plus the shared data and training settings."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    generator_config: Path | None = None
    models: list[ModelName] = Field(min_length=1)
    scenarios: list[Scenario] = Field(min_length=1)
    seeds: list[int] = Field(min_length=1)
    data_seed: int = 0
    output_dir: Path = Path('out')
    training: dict[str, Any] = Field(default_factory=dict)


def _section(name: str, keys: Iterable[str]) -> dict[str, Any]:
    """Keys of a settings table that are set."""
    table = conf.get(name) or {}
    return {key: table.get(key) for key in keys if table.get(key) is not None}


def load_experiment_config(path: Path | None) -> ExperimentConfig:
    """Experiment settings from a TOML file, falling back to ``[experiment]`` in the settings.

    Raises:
        ConfigError: Missing or invalid file.
    """
    data = _section('experiment', ExperimentConfig.model_fields)
    if path is not None:
        if not path.is_file():
            msg = f'Experiment config not found: {path}'
            raise ConfigError(msg)
        try:
            data.update(toml.load(path))
        except toml.TomlDecodeError as e:
            msg = f'Malformed TOML in {path}: {e}'
            raise ConfigError(msg) from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        msg = f'Invalid experiment config {path}: {e}'
        raise ConfigError(msg) from e


def build_train_config(overrides: dict[str, Any] | None = None, **flags: Any) -> TrainConfig:  # noqa: ANN401
    """Defaults < ``[training]`` settings < experiment overrides < command-line flags."""
    data = _section('training', TrainConfig.model_fields)
    data.update(overrides or {})
    data.update({k: v for k, v in flags.items() if v is not None})
    try:
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        msg = f'Invalid training config: {e}'
        raise ConfigError(msg) from e


def _generator_config(path: Path | None) -> GeneratorConfig:
    if path is not None:
        return load_generator_config(path)
    try:
        return GeneratorConfig.model_validate(_section('generator', GeneratorConfig.model_fields))
    except ValidationError as e:
        msg = f'Invalid [generator] settings: {e}'
        raise ConfigError(msg) from e


def _threads() -> int:
    return max(1, int(conf.get('GCGAIL_THREADS', 1)))


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Translate package errors into the exit-code contract."""
    try:
        yield
    except CompatibilityError as e:
        _fail(e, EXIT_COMPATIBILITY)
    except TrainingDivergedError as e:
        _fail(e, EXIT_TRAINING)
    except (GcgailError, ValidationError, OSError) as e:
        _fail(e, EXIT_INPUT)


def _fail(error: Exception, code: int) -> None:
    logger.error('{}: {}', type(error).__name__, error)
    typer.echo(f'error: {error}', err=True)
    raise typer.Exit(code) from error


def run_dir(out: Path, model: ModelName, scenario: Scenario, seed: int) -> Path:
    """Output directory of one (model, scenario, seed) run."""
    return out / model.value / scenario.value / str(seed)


def default_data_dir(run: Path) -> Path:
    """Data directory of the output root that `run` sits three levels under.

    Raises:
        ConfigError: `run` is too shallow to have an output root.
    """
    parents = run.resolve().parents
    if len(parents) < 3:  # noqa: PLR2004
        msg = f'Cannot locate the data directory for run {run}; expected <out>/<model>/<scenario>/<seed> or --data'
        raise ConfigError(msg)
    return parents[2] / DATA_DIR


def generate_data(gen_cfg: GeneratorConfig, seed: int, data_dir: Path) -> list[Path]:
    """Synthesize the population and write trips, trajectories, profiles and provenance."""
    data_dir.mkdir(parents=True, exist_ok=True)
    trips, profiles = synthesize_population(gen_cfg, seed)
    promotion = PromotionConfig(start_date=gen_cfg.promotion_start, discount_stations=gen_cfg.discount_set)
    trajectories = extract_features(trips, promotion, profiles)
    files = [write_trips(trips, data_dir / TRIPS_FILE),
             write_trajectories(trajectories, data_dir / TRAJECTORIES_FILE),
             write_profiles(profiles, data_dir / PROFILES_FILE)]
    write_provenance(data_dir, files, config=gen_cfg, seed=seed)
    logger.info('Data written', directory=str(data_dir), passengers=len(trajectories))
    return files


def train_run(data_dir: Path, model: ModelName, scenario: Scenario, seed: int, cfg: TrainConfig, out: Path) -> Path:
    """Split, filter and train one model; writes checkpoint, training log and provenance."""
    trajectories = read_trajectories(data_dir / TRAJECTORIES_FILE)
    train, _ = split_and_filter(trajectories, scenario, seed)
    cfg = cfg.for_model(model).model_copy(update={'seed': seed})
    target = run_dir(out, model, scenario, seed)
    target.mkdir(parents=True, exist_ok=True)

    header: dict[str, Any] = {'model': model.value, 'conditioning': cfg.conditioning_mode.value,
                              'scenario': scenario.value, 'excluded_groups': scenario.excluded_groups,
                              'seed': seed, 'train_passengers': len(train)}
    if model.adversarial:
        result = train_gail(train, cfg, threads=_threads())
        checkpoint = Checkpoint.from_gail(model, result, scenario.value, seed)
        header.update(value_coef=cfg.value_coef, entropy_coef=0.0, grad_clip=None,
                      stop_reason=result.stop_reason.value, best_iteration=result.best.iteration)
        rows = result.log
    else:
        bc = train_bc(train, cfg)
        checkpoint = Checkpoint.from_bc(bc, scenario.value, seed)
        header.update(best_epoch=bc.best_epoch)
        rows = bc.log
    files = [save_checkpoint(target / CHECKPOINT_FILE, checkpoint),
             write_training_log(target / TRAIN_LOG_FILE, rows, header)]
    write_provenance(target, files, config={'train': cfg, 'data': str(data_dir)}, seed=seed,
                     extra={'model': model.value, 'scenario': scenario.value})
    return target


def eval_run(target: Path, data_dir: Path, *, requested: ConditioningMode | None = None,
             std_over: str = 'pid') -> list[Path]:
    """Evaluate a run's checkpoint on its untouched test split and write the report CSVs."""
    checkpoint = load_checkpoint(target / CHECKPOINT_FILE)
    if requested is not None and requested is not checkpoint.conditioning:
        msg = (f'Checkpoint uses {checkpoint.conditioning.value} conditioning, '
               f'requested {requested.value}')
        raise CompatibilityError(msg)
    trajectories = read_trajectories(data_dir / TRAJECTORIES_FILE)
    _, test = split_and_filter(trajectories, Scenario.FULL, checkpoint.seed)
    records = evaluation_records(checkpoint.policy_model, test, classify_adopters(test), checkpoint.scenario)
    reports = write_reports(records, target, spread_over=std_over)
    files = sorted(p for p in target.iterdir() if p.is_file() and p.name not in {PROVENANCE_FILE, RUN_LOG})
    write_provenance(target, files, config={'train': checkpoint.cfg, 'data': str(data_dir)}, seed=checkpoint.seed,
                     extra={'model': checkpoint.model.value, 'scenario': checkpoint.scenario})
    return reports


def _cell_value(frame: pd.DataFrame, key: str, column: str) -> Any:  # noqa: ANN401
    row = frame[frame['key'].astype(str) == key]
    return NA if row.empty or pd.isna(row[column].iloc[0]) else row[column].iloc[0]


def _comparison_row(target: Path, model: ModelName, scenario: Scenario, seed: int) -> dict[str, Any]:
    global_ = pd.read_csv(target / 'metrics_global.csv', keep_default_na=True, na_values=[NA])
    by_class = pd.read_csv(target / 'acc_by_adopter_class.csv', keep_default_na=True, na_values=[NA])
    return {'model': model.value, 'scenario': scenario.value, 'seed': seed,
            'acc': _cell_value(global_, 'all', 'acc'), 'prec': _cell_value(global_, 'all', 'prec'),
            'rec': _cell_value(global_, 'all', 'rec'), 'f1': _cell_value(global_, 'all', 'f1'),
            'acc_adopters': _cell_value(by_class, 'adopter', 'mean_acc'),
            'std_adopters': _cell_value(by_class, 'adopter', 'std_acc'),
            'acc_nonadopters': _cell_value(by_class, 'non_adopter', 'mean_acc'),
            'std_nonadopters': _cell_value(by_class, 'non_adopter', 'std_acc')}


def scenario_summary(comparison: pd.DataFrame) -> pd.DataFrame:
    """Mean over seeds per (model, scenario) with the relative accuracy drop versus ``full``."""
    numeric = comparison.replace(NA, float('nan'))
    for column in ('acc', 'f1', 'acc_adopters'):
        numeric[column] = pd.to_numeric(numeric[column])
    summary = (numeric.groupby(['model', 'scenario'], sort=False)
               .agg(n_seeds=('seed', 'size'), acc=('acc', 'mean'), f1=('f1', 'mean'),
                    acc_adopters=('acc_adopters', 'mean'))
               .reset_index())
    full = summary[summary['scenario'] == Scenario.FULL.value].set_index('model')['acc']
    summary['acc_drop_vs_full'] = [(full[m] - a) / full[m] if m in full.index and full[m] > 0 else float('nan')
                                   for m, a in zip(summary['model'], summary['acc'], strict=True)]
    return summary


def ordering_lines(comparison: pd.DataFrame, scenarios: list[Scenario]) -> list[str]:
    """Per seed, whether held-out accuracy satisfies gcgail >= cgail >= gail on the reference scenario."""
    if not {m.value for m in ORDERED_MODELS} <= set(comparison['model']):
        return []
    reference = Scenario.FULL if Scenario.FULL in scenarios else scenarios[0]
    rows = comparison[comparison['scenario'] == reference.value]
    lines = []
    for seed in sorted(rows['seed'].unique()):
        acc = rows[rows['seed'] == seed].set_index('model')['acc']
        values = [pd.to_numeric(acc.get(m.value, float('nan')), errors='coerce') for m in ORDERED_MODELS]
        holds = all(pd.notna(v) for v in values) and values[0] >= values[1] >= values[2]
        lines.append(f'seed={seed} order=gcgail>=cgail>=gail:{str(bool(holds)).lower()}')
    return lines


QuietOpt = Annotated[bool, typer.Option('--quiet', '-q', help='Only warnings and errors on stderr.')]
OutOpt = Annotated[Path, typer.Option('--out', help='Output root directory.')]


@app.command()
def gen(config: Annotated[Path | None, typer.Option('--config', help='Generator TOML file.')] = None,
        out: OutOpt = Path('out'),
        seed: Annotated[int | None, typer.Option('--seed', help='Generator seed.')] = None,
        quiet: QuietOpt = False) -> None:
    """Generate the synthetic panel into <out>/data."""
    data_dir = out / DATA_DIR
    configure_logging(quiet=quiet, log_file=data_dir / RUN_LOG)
    with _exit_codes():
        gen_cfg = _generator_config(config)
        seed = seed if seed is not None else int(_section('generator', ['seed']).get('seed', 0))
        generate_data(gen_cfg, seed, data_dir)


@app.command()
def train(model: Annotated[ModelName, typer.Option('--model', help='Model to train.')] = ModelName.GCGAIL,
          scenario: Annotated[str, typer.Option('--scenario', help='Training scenario.')] = 'full',
          seed: Annotated[int, typer.Option('--seed', help='Split and training seed.')] = 0,
          out: OutOpt = Path('out'),
          data: Annotated[Path | None, typer.Option('--data', help='Data directory, default <out>/data.')] = None,
          config: Annotated[Path | None, typer.Option('--config', help='Experiment TOML with [training].')] = None,
          max_iterations: Annotated[int | None, typer.Option('--max-iterations')] = None,
          rollout_passengers: Annotated[int | None, typer.Option('--rollout-passengers')] = None,
          quiet: QuietOpt = False) -> None:
    """Train one model on one scenario and seed."""
    with _exit_codes():
        parsed = Scenario.parse(scenario)
        target = run_dir(out, model, parsed, seed)
        configure_logging(quiet=quiet, log_file=target / RUN_LOG)
        overrides = load_experiment_config(config).training if config is not None else {}
        cfg = build_train_config(overrides, max_iterations=max_iterations,
                                 rollout_passengers_per_iter=rollout_passengers)
        train_run(data or out / DATA_DIR, model, parsed, seed, cfg, out)


@app.command(name='eval')
def evaluate(run: Annotated[Path, typer.Option('--run', help='Run directory holding checkpoint.json.')],
             data: Annotated[Path | None, typer.Option('--data', help='Data directory.')] = None,
             model: Annotated[ModelName | None, typer.Option('--model', help='Expected model.')] = None,
             conditioning: Annotated[ConditioningMode | None, typer.Option('--conditioning')] = None,
             std_over: Annotated[str, typer.Option('--std-over', help="'pid' or 'month'.")] = 'pid',
             quiet: QuietOpt = False) -> None:
    """Evaluate a trained run on its test passengers."""
    configure_logging(quiet=quiet, log_file=run / RUN_LOG if run.is_dir() else None)
    with _exit_codes():
        requested = conditioning
        if requested is None and model is not None:
            requested = model.conditioning(load_checkpoint(run / CHECKPOINT_FILE).cfg)
        data_dir = data if data is not None else default_data_dir(run)
        eval_run(run, data_dir, requested=requested, std_over=std_over)


@app.command()
def compare(config: Annotated[Path | None, typer.Option('--config', help='Experiment TOML file.')] = None,
            out: Annotated[Path | None, typer.Option('--out', help='Output root, overrides the config.')] = None,
            run_missing: Annotated[bool, typer.Option('--run-missing', help='Generate, train and evaluate '
                                                                             'missing runs.')] = False,
            quiet: QuietOpt = False) -> None:
    """Collect every (model, scenario, seed) run into comparison tables."""
    with _exit_codes():
        experiment = load_experiment_config(config)
        root = out or experiment.output_dir
        configure_logging(quiet=quiet, log_file=root / RUN_LOG)
        data_dir = root / DATA_DIR
        cells = [(m, s, seed) for m in experiment.models for s in experiment.scenarios for seed in experiment.seeds]
        missing = [c for c in cells if not (run_dir(root, *c) / 'acc_by_adopter_class.csv').is_file()]
        if missing and not run_missing:
            for m, s, seed in missing:
                typer.echo(f'missing: model={m.value} scenario={s.value} seed={seed}', err=True)
            logger.error('Incomplete run matrix', missing=len(missing))
            raise typer.Exit(EXIT_INCOMPLETE)
        if missing:
            if not (data_dir / TRAJECTORIES_FILE).is_file():
                generate_data(_generator_config(experiment.generator_config), experiment.data_seed, data_dir)
            cfg = build_train_config(experiment.training)
            for m, s, seed in missing:
                logger.info('Running missing cell', model=m.value, scenario=s.value, seed=seed)
                eval_run(train_run(data_dir, m, s, seed, cfg, root), data_dir)

        comparison = pd.DataFrame([_comparison_row(run_dir(root, *c), *c) for c in cells])
        lines = ordering_lines(comparison, experiment.scenarios)
        files = [root / COMPARISON_FILE, root / SUMMARY_FILE, root / ORDERING_FILE]
        comparison.to_csv(files[0], index=False, na_rep=NA, lineterminator='\n')
        scenario_summary(comparison).to_csv(files[1], index=False, na_rep=NA, lineterminator='\n')
        files[2].write_text(''.join(f'{line}\n' for line in lines), encoding='utf-8')
        write_provenance(root, files, config=experiment, seed=None)
        for line in lines:
            typer.echo(line)


if __name__ == '__main__':
    app()
