from .attack import command as attack_command
from .diagnose import command as diagnose_command
from .evaluate import command as evaluate_command
from .ingest import command as ingest_command
from .registry import Command
from .sweep import command as sweep_command
from .synth import command as synth_command
from .trace import command as trace_command

COMMANDS = [
    ingest_command,
    synth_command,
    attack_command,
    evaluate_command,
    diagnose_command,
    trace_command,
    sweep_command,
]

__all__ = ["COMMANDS", "Command"]
