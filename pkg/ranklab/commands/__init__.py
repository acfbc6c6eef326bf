"""
Subcommand handlers for the ranklab command line.
"""

from .handlers import CommandDispatcher, command, get_dispatcher

__all__ = ["CommandDispatcher", "command", "get_dispatcher"]
