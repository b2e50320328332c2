"""
Command Line Handler Module

This module defines the argparse command line: one subcommand per pipeline
stage, plus `pipeline` which chains them.

    python run.py synth --out data/synth --seed 7
    python run.py pipeline --data data/synth --out output --task next --model gbm --cv group

Exit codes:
- 0 success
- 1 usage error (unknown flag, missing argument)
- 2 input error (bad files, invalid config, schema mismatch, too few entities)
- 3 internal invariant failure or unexpected error

Design Decisions:
- Reports go to files (and summaries to stdout); logs go to stderr
- Paths default to TURNS_DATA_DIR / TURNS_OUTPUT_DIR
- `--model all` and `--cv all` expand to every family and every scheme
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, NoReturn, Optional, Sequence

from turntaking import __version__
from turntaking.cli.processor import PipelineProcessor, load_corpus, summarize_corpus
from turntaking.config import PipelineConfig, get_settings, load_pipeline_config
from turntaking.exceptions import EXIT_OK, EXIT_USAGE, exit_code_for
from turntaking.logging_config import get_logger, setup_logging
from turntaking.models import CVScheme, ModelFamily, Task
from turntaking.services.synth import CueConfig, SynthConfig, load_synth_config

logger = get_logger(__name__)

ALL = "all"
TASK_CHOICES = [t.value for t in Task] + [ALL]
MODEL_CHOICES = [f.value for f in ModelFamily] + [ALL]
CV_CHOICES = [s.value for s in CVScheme] + [ALL]
NEGATE_CHOICES = ("none", "a", "b", "both")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class UsageError(Exception):
    """Arguments parse but make no sense together."""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped onto exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# =============================================================================
# Parser
# =============================================================================

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="PipelineConfig JSON file")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    parser.add_argument("--jobs", type=int, default=1, help="Parallel workers (default 1)")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS)


def _data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, help="Directory of session directories")


def _out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, help="Output directory")


def _dataset(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", type=Path, required=True, help="Dataset CSV")


def build_parser() -> ArgumentParser:
    """The full command line."""
    parser = ArgumentParser(
        prog="turntaking",
        description="Turn-taking analytics for multi-user VR session recordings",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("synth", help="Generate a synthetic corpus with ground truth")
    _common(p)
    _out(p)
    p.add_argument("--synth-config", type=Path, help="SynthConfig JSON used as template")
    p.add_argument("--n-groups", type=int, default=10)
    p.add_argument("--sessions-per-group", type=int, default=2)
    p.add_argument("--duration", type=float, help="Session length in seconds")
    p.add_argument("--no-cues", action="store_true", help="Disable every nonverbal cue")

    p = sub.add_parser("validate", help="Validate recordings and summarize the corpus")
    _common(p)
    _data(p)
    _out(p)

    p = sub.add_parser("label", help="Label speech events and turn transitions")
    _common(p)
    _data(p)
    _out(p)

    p = sub.add_parser("features", help="Feature table of every candidate sample")
    _common(p)
    _data(p)
    _out(p)
    p.add_argument("--task", choices=TASK_CHOICES[:-1], required=True)

    p = sub.add_parser("build-dataset", help="Balanced dataset of one task")
    _common(p)
    _data(p)
    _out(p)
    p.add_argument("--task", choices=TASK_CHOICES, required=True)

    p = sub.add_parser("train", help="Train one family on a full dataset")
    _common(p)
    _dataset(p)
    _out(p)
    p.add_argument("--model", choices=MODEL_CHOICES[:-1], required=True)

    p = sub.add_parser("evaluate", help="Cross-validate families under fold schemes")
    _common(p)
    _dataset(p)
    _out(p)
    p.add_argument("--model", choices=MODEL_CHOICES, default=ModelFamily.GBM.value)
    p.add_argument("--cv", choices=CV_CHOICES, help="Fold scheme (default from config)")

    p = sub.add_parser("interpret", help="Permutation importance and partial dependence")
    _common(p)
    _dataset(p)
    _out(p)
    p.add_argument("--model", choices=MODEL_CHOICES[:-1], default=ModelFamily.GBM.value)
    p.add_argument("--cv", choices=CV_CHOICES[:-1], help="Fold scheme for importance")
    p.add_argument("--groups", help="'headline', 'full' or a feature-group JSON file")
    p.add_argument("--pd-feature", action="append", dest="pd_features",
                   help="Feature for a 1-D dependence curve (repeatable)")
    p.add_argument("--pd-pair", nargs=2, metavar=("A", "B"),
                   help="Feature pair for the 2-D dependence surface")
    p.add_argument("--negate", choices=NEGATE_CHOICES, default="b",
                   help="Surface axes shown negated (default b)")

    p = sub.add_parser("pipeline", help="validate -> label -> build-dataset -> evaluate")
    _common(p)
    _data(p)
    _out(p)
    p.add_argument("--task", choices=TASK_CHOICES, default=ALL)
    p.add_argument("--model", choices=MODEL_CHOICES, default=ModelFamily.GBM.value)
    p.add_argument("--cv", choices=CV_CHOICES, help="Fold scheme (default from config)")
    p.add_argument("--interpret", action="store_true", help="Also run interpretation")

    return parser


# =============================================================================
# Argument Expansion
# =============================================================================

def _tasks(value: str) -> List[Task]:
    return list(Task) if value == ALL else [Task(value)]


def _families(value: str) -> List[ModelFamily]:
    return list(ModelFamily) if value == ALL else [ModelFamily(value)]


def _schemes(value: Optional[str], config: PipelineConfig) -> List[CVScheme]:
    if value is None:
        return [config.evaluation.scheme]
    return list(CVScheme) if value == ALL else [CVScheme(value)]


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_pipeline_config(args.config)
    return config.with_seed(args.seed) if args.seed is not None else config


def _processor(
    args: argparse.Namespace, config: PipelineConfig, default_out: Optional[Path] = None
) -> PipelineProcessor:
    if args.jobs == 0:
        raise UsageError("--jobs must be non-zero")
    out = args.out or default_out or get_settings().output_dir
    return PipelineProcessor(config, out, jobs=args.jobs)


def _data_dir(args: argparse.Namespace) -> Path:
    return args.data or get_settings().data_dir


def _print(document: object) -> None:
    sys.stdout.write(json.dumps(document, sort_keys=True, indent=2) + "\n")


# =============================================================================
# Commands
# =============================================================================

def cmd_synth(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Generate and write a synthetic corpus."""
    template = load_synth_config(args.synth_config) if args.synth_config else SynthConfig()
    updates: Dict[str, object] = {}
    if args.duration is not None:
        updates["duration"] = args.duration
    if args.no_cues:
        updates["cues"] = CueConfig.disabled()
    if updates:
        template = SynthConfig.model_validate({**template.model_dump(), **updates})
    if args.n_groups < 1 or args.sessions_per_group < 1:
        raise UsageError("--n-groups and --sessions-per-group must be positive")
    processor = _processor(args, config, default_out=get_settings().data_dir)
    directories = processor.synthesize(
        template, args.n_groups, args.sessions_per_group
    )
    _print({"sessions": [d.name for d in directories]})


def cmd_validate(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Validation reports and the corpus summary."""
    processor = _processor(args, config)
    recordings = load_corpus(_data_dir(args), config, processor.jobs)
    reports = processor.validate(recordings)
    _print(
        {
            "corpus": summarize_corpus(recordings).model_dump(),
            "gap_warnings": {r.session_id: r.gap_warnings for r in reports},
        }
    )


def cmd_label(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Transitions and timelines of every session."""
    processor = _processor(args, config)
    recordings = load_corpus(_data_dir(args), config, processor.jobs)
    labels = processor.label(recordings)
    _print({lab.session_id: lab.summary["transition_counts"] for lab in labels})


def cmd_features(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Candidate feature table of one task."""
    processor = _processor(args, config)
    recordings = load_corpus(_data_dir(args), config, processor.jobs)
    path = processor.features(recordings, Task(args.task))
    _print({"features": str(path)})


def cmd_build_dataset(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Balanced dataset(s)."""
    processor = _processor(args, config)
    recordings = load_corpus(_data_dir(args), config, processor.jobs)
    counts = {}
    for task in _tasks(args.task):
        dataset = processor.build(recordings, task)
        counts[task.value] = dataset.header["counts"]
    _print(counts)


def cmd_train(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Train on a full dataset."""
    processor = _processor(args, config)
    dataset = processor.read_dataset(args.dataset)
    family = ModelFamily(args.model)
    processor.train(dataset, family)
    _print({"task": dataset.task.value, "family": family.value, "rows": dataset.n_rows})


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Cross-validation reports."""
    processor = _processor(args, config)
    dataset = processor.read_dataset(args.dataset)
    reports = processor.evaluate(dataset, _families(args.model), _schemes(args.cv, config))
    _print(
        [
            {"family": r.family.value, "scheme": r.scheme.value,
             "mean_auc": r.mean_auc, "std_auc": r.std_auc}
            for r in reports
        ]
    )


def cmd_interpret(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Importance and dependence tables."""
    processor = _processor(args, config)
    dataset = processor.read_dataset(args.dataset)
    kwargs: Dict[str, object] = {
        "negate": (args.negate in ("a", "both"), args.negate in ("b", "both")),
    }
    if args.pd_features:
        kwargs["pd_features"] = args.pd_features
    if args.pd_pair:
        kwargs["pd_pair"] = tuple(args.pd_pair)
    table = processor.interpret(
        dataset,
        ModelFamily(args.model),
        CVScheme(args.cv) if args.cv else None,
        args.groups,
        **kwargs,
    )
    _print([row.model_dump() for row in table.ranked()[:5]])


def cmd_pipeline(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Every stage from recordings to reports."""
    processor = _processor(args, config)
    reports = processor.process(
        _data_dir(args),
        _tasks(args.task),
        _families(args.model),
        _schemes(args.cv, config),
        interpret=args.interpret,
    )
    _print(
        [
            {"task": r.task.value, "family": r.family.value, "scheme": r.scheme.value,
             "mean_auc": r.mean_auc, "std_auc": r.std_auc}
            for r in reports
        ]
    )


COMMANDS: Dict[str, Callable[[argparse.Namespace, PipelineConfig], None]] = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "label": cmd_label,
    "features": cmd_features,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "interpret": cmd_interpret,
    "pipeline": cmd_pipeline,
}


def run_subcommand(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, run the subcommand, and return its exit status.

    Usage errors from argparse exit the process with status 1 through
    SystemExit; everything else is mapped here.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = _pipeline_config(args)
        COMMANDS[args.command](args, config)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {e}\n")
        return EXIT_USAGE
    except Exception as e:
        code = exit_code_for(e)
        logger.error(
            "Command failed",
            command=args.command,
            error=str(e),
            error_type=type(e).__name__,
            exit_code=code,
        )
        return code
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns instead of exiting so tests can call it."""
    try:
        return run_subcommand(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
