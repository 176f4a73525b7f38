"""Commands package - CLI subcommands"""
from .base_command import BaseCommand, CommandRegistry, CommandResult
from .data_commands import BuildFreqCommand, SynthCommand
from .inference_commands import EvalCommand, InferCommand
from .train_commands import TrainAttrCommand, TrainRelCommand


def build_registry() -> CommandRegistry:
    registry = CommandRegistry()
    for command in (
        SynthCommand(),
        BuildFreqCommand(),
        TrainRelCommand(),
        TrainAttrCommand(),
        InferCommand(),
        EvalCommand(),
    ):
        registry.register(command)
    return registry


__all__ = [
    "BaseCommand",
    "CommandRegistry",
    "CommandResult",
    "BuildFreqCommand",
    "SynthCommand",
    "EvalCommand",
    "InferCommand",
    "TrainAttrCommand",
    "TrainRelCommand",
    "build_registry",
]
