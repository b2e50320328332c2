"""
Command Line Package

- handler: argparse routing and exit codes
- processor: stage orchestration and artifact writing
"""

from turntaking.cli.handler import build_parser, main, run_subcommand
from turntaking.cli.processor import PipelineProcessor, summarize_corpus

__all__ = ["build_parser", "main", "run_subcommand", "PipelineProcessor", "summarize_corpus"]
