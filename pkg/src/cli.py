"""
Command-line entry point::

    graphprompt <subcommand> [--config config/default.yaml] [--artifact-root artifact] [--<key> <value> ...]

Every ``--<key> <value>`` pair overrides one RunConfig field (last writer wins). The resolved config is written
into ``<artifact-root>/run_<hash>/config.yaml`` before the stage runs. Exit codes: 0 ok, 2 config error,
3 missing artifact, 4 invariant violation, 5 numeric failure, 1 anything else.
"""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from src.constants import ARTIFACT_DIR, DEFAULT_CONFIG_FILE_PATH, SUBCOMMANDS
from src.entity.config_entity import RunConfig, TrainingPipelineConfig
from src.exception import ConfigError, CustomException
from src.logger import log
from src.pipeline.training_pipeline import TrainPipeline
from src.utils.main_utils import read_yaml_file


def parse_overrides(tokens: Sequence[str]) -> Dict[str, str]:
    """``--key value`` and ``--key=value`` pairs; dashes in keys become underscores."""
    overrides: Dict[str, str] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or token == "--":
            raise ConfigError(f"expected --key value, got {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"override {token} has no value")
            value = tokens[i + 1]
            i += 2
        overrides[key.replace("-", "_")] = value
    return overrides


def resolve_config(config_path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """Config file values, then command-line overrides; unknown keys are rejected."""
    path = config_path
    if path is None and os.path.exists(DEFAULT_CONFIG_FILE_PATH):
        path = DEFAULT_CONFIG_FILE_PATH
    values = read_yaml_file(path) if path is not None else {}
    if not isinstance(values, dict):
        raise ConfigError(f"{path} must hold a flat key: value mapping")
    values = {**values, **overrides}
    return RunConfig.from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphprompt", description="Multimodal graph instruction pipeline",
                                     allow_abbrev=False)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="flat YAML config file (default: config/default.yaml)")
    parser.add_argument("--artifact-root", default=ARTIFACT_DIR, help="directory holding run_<hash> folders")
    return parser


def run(subcommand: str, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
        artifact_root: str = ARTIFACT_DIR) -> int:
    """Runs one stage; returns the process exit status."""
    try:
        run_config = resolve_config(config_path, overrides or {})
        pipeline_config = TrainingPipelineConfig(run_config=run_config, artifact_root=artifact_root)
        log.info(f"Running {subcommand!r} in {pipeline_config.artifact_dir}")
        artifact = TrainPipeline(pipeline_config).run_stage(subcommand)
        log.info(f"{subcommand} finished: {artifact}")
        print(pipeline_config.artifact_dir)
        return 0
    except CustomException as e:
        log.error(f"{subcommand} failed (exit {e.exit_code}): {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        log.exception(f"{subcommand} failed with an unexpected error")
        print(f"error: {e}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    args, rest = build_parser().parse_known_args(argv)
    try:
        overrides = parse_overrides(rest)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return run(args.subcommand, args.config, overrides, args.artifact_root)


if __name__ == "__main__":
    sys.exit(main())
