"""
Base command class and registry for the CLI subcommands
"""
import argparse
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from config import settings
from core.errors import PipelineError
from services.dataset_io import (
    ATTRIBUTE_VOCAB_FILE,
    OBJECT_VOCAB_FILE,
    PREDICATE_VOCAB_FILE,
    VocabularySet,
    read_vocabularies,
)
from services.manifest import write_manifest
from services.synthetic_world import default_vocabularies


@dataclass
class CommandResult:
    success: bool
    artifact: Optional[Path] = None
    data: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None


class BaseCommand(ABC):
    """Base class for all pipeline subcommands"""

    def __init__(self):
        self.name = self.get_name()
        self.description = self.get_description()

    @abstractmethod
    def get_name(self) -> str:
        """Return subcommand name"""
        pass

    @abstractmethod
    def get_description(self) -> str:
        """Return one-line help text"""
        pass

    @abstractmethod
    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Declare command-specific flags"""
        pass

    @abstractmethod
    def run(self, args: argparse.Namespace) -> CommandResult:
        """
        Execute the command

        Returns:
            CommandResult with:
                - success: bool
                - artifact: path of the written artifact
                - data: summary values for logging and tests
                - error: message if failed
        """
        pass

    def execute(self, args: argparse.Namespace) -> CommandResult:
        """Run the command, turning pipeline and I/O errors into a failed result"""
        try:
            return self.run(args)
        except (PipelineError, OSError, ValidationError) as e:
            logger.error(f"{self.name} failed: {e}")
            return self.format_error(str(e))

    def format_success(self, artifact: Path, **data: Any) -> CommandResult:
        return CommandResult(success=True, artifact=artifact, data=data)

    def format_error(self, error: str) -> CommandResult:
        return CommandResult(success=False, error=error)

    def load_vocabularies(self, args: argparse.Namespace, data_dir: Optional[Path] = None) -> VocabularySet:
        """Vocabulary flags win; otherwise the files inside data_dir; otherwise the default world"""
        defaults = {
            "vocab_objects": OBJECT_VOCAB_FILE,
            "vocab_predicates": PREDICATE_VOCAB_FILE,
            "vocab_attributes": ATTRIBUTE_VOCAB_FILE,
        }
        paths = {}
        for flag, filename in defaults.items():
            explicit = getattr(args, flag, None)
            if explicit is not None:
                paths[flag] = Path(explicit)
            elif data_dir is not None and (data_dir / filename).exists():
                paths[flag] = data_dir / filename
        if not paths:
            logger.debug("No vocabulary files given, using the default world vocabulary")
            return default_vocabularies()
        if len(paths) != len(defaults):
            missing = sorted(set(defaults) - set(paths))
            raise PipelineError(f"incomplete vocabulary: no file for {', '.join(missing)}")
        return read_vocabularies(paths["vocab_objects"], paths["vocab_predicates"], paths["vocab_attributes"])

    def record(self, args: argparse.Namespace, artifact: Path, inputs: Sequence[Path]) -> Path:
        """Write the manifest next to an artifact"""
        config = {
            key: (str(value) if isinstance(value, Path) else value)
            for key, value in sorted(vars(args).items())
            if key not in ("command", "handler")
        }
        return write_manifest(self.name, artifact, inputs, getattr(args, "seed", None), config)


def non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {number}")
    return number


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=non_negative_int, default=settings.default_seed, help="random seed")
    common.add_argument("--log-level", default=None, help="override RELDET_LOG_LEVEL")
    common.add_argument("--vocab-objects", type=Path, default=None)
    common.add_argument("--vocab-predicates", type=Path, default=None)
    common.add_argument("--vocab-attributes", type=Path, default=None)
    return common


class CommandRegistry:
    """Registry for managing subcommands"""

    def __init__(self):
        self._commands: Dict[str, BaseCommand] = {}

    def register(self, command: BaseCommand):
        """Register a command"""
        self._commands[command.name] = command

    def get(self, name: str) -> Optional[BaseCommand]:
        """Get a command by name"""
        return self._commands.get(name)

    def get_all(self) -> Dict[str, BaseCommand]:
        """Get all registered commands"""
        return self._commands

    def build_parser(self, prog: str = "reldet") -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=prog, description="Relationship detection scoring pipeline")
        subparsers = parser.add_subparsers(dest="command", required=True)
        common = _common_parser()
        for name, command in self._commands.items():
            sub = subparsers.add_parser(name, help=command.description, parents=[common])
            command.add_arguments(sub)
        return parser

    def execute(self, args: argparse.Namespace) -> CommandResult:
        command = self.get(args.command)
        if not command:
            return CommandResult(success=False, error=f"Command '{args.command}' not found")
        return command.execute(args)
