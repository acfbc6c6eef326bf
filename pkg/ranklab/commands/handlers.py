"""
Command Handlers

Each subcommand of the ``ranklab`` command line is a plain function tagged
with ``@command``. The dispatcher loads the command modules on first use and
passes every handler only the options its signature names, so the global
``--seed``/``--threads``/``--out`` flags reach just the subcommands that use
them.
"""

import importlib
import inspect
import logging
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional

from ..common.exceptions import ArgumentError, CommandNotFoundError
from ..common.protocol import Response
from ..config import Settings

logger = logging.getLogger(__name__)

COMMAND_MODULES = ("sigma", "classify", "operator", "run", "verify", "report")

_commands: Dict[str, Callable[..., Response]] = {}


def command(name: str):
    """
    Tag a function as the handler of subcommand ``name``.

    The function is registered unchanged. A second handler for the same name
    is an error.
    """
    def decorator(func: Callable[..., Response]) -> Callable[..., Response]:
        existing = _commands.get(name)
        if existing is not None and existing is not func:
            raise ArgumentError(f"subcommand {name!r} already has a handler",
                                details={"command": name, "handler": existing.__qualname__})
        _commands[name] = func
        return func
    return decorator


class CommandDispatcher:
    """Subcommand name to handler, plus the keyword options each handler takes."""

    def __init__(self):
        self.handlers: Dict[str, Callable[..., Response]] = {}
        self._options: Dict[str, FrozenSet[str]] = {}

    def register(self, name: str, handler_func: Callable[..., Response]) -> None:
        self.handlers[name] = handler_func
        self._options[name] = frozenset(inspect.signature(handler_func).parameters)

    def options_for(self, name: str, options: Mapping[str, Any]) -> Dict[str, Any]:
        """The subset of parsed options that the handler of ``name`` accepts."""
        accepted = self._options.get(name, frozenset())
        return {key: value for key, value in options.items() if key in accepted}

    def dispatch(self, name: str, params: Mapping[str, Any]) -> Response:
        """
        Run subcommand ``name`` with the options it accepts out of ``params``.

        Raises:
            CommandNotFoundError: no handler registered under ``name``
        """
        handler_func = self.handlers.get(name)
        if handler_func is None:
            raise CommandNotFoundError(name)
        kwargs = self.options_for(name, params)
        ignored = sorted(set(params) - set(kwargs))
        if ignored:
            logger.debug(f"{name} ignores options {ignored}")
        return handler_func(**kwargs)

    def list_commands(self) -> List[str]:
        return sorted(self.handlers)


_dispatcher: Optional[CommandDispatcher] = None


def get_dispatcher() -> CommandDispatcher:
    """The process-wide dispatcher, built on first call."""
    global _dispatcher
    if _dispatcher is None:
        dispatcher = CommandDispatcher()
        for module in COMMAND_MODULES:
            importlib.import_module(f"{__package__}.{module}")
        for name, handler_func in _commands.items():
            dispatcher.register(name, handler_func)
        logger.debug(f"Loaded {len(dispatcher.handlers)} subcommands")
        _dispatcher = dispatcher
    return _dispatcher


# Shared option resolution

def resolve_out(cli_out: Optional[str], config_out: Optional[str] = None) -> Path:
    """
    Output directory: --out, then RANKLAB_OUT, then output.dir from the
    experiment file, then the settings default.
    """
    if cli_out:
        return Path(cli_out)
    current = Settings()
    if "out" in current.model_fields_set:
        return Path(current.out)
    if config_out:
        return Path(config_out)
    return Path(current.out)


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int] = None) -> int:
    """Seed: --seed, then check.seed from the experiment file, then RANKLAB_SEED."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    return Settings().seed


def resolve_threads(cli_threads: Optional[int]) -> int:
    threads = Settings().threads if cli_threads is None else int(cli_threads)
    return max(1, threads)
