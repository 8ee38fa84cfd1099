import argparse
import json
import logging
import sys
from typing import Any, Dict
from django.core.exceptions import ValidationError
from django.core.management.base import CommandError, CommandParser, DjangoHelpFormatter
from jutil.command import SafeCommand
from jgreedy.errors import PropertyViolation
from jgreedy.parsers import write_text_file

EXIT_ERROR = 1
EXIT_IO_ERROR = 2
EXIT_PROPERTY_VIOLATION = 3

# options every Django management command has, left out of the resolved config echo
DJANGO_DEFAULT_OPTIONS = {"verbosity", "settings", "pythonpath", "traceback", "no_color", "force_color", "skip_checks"}

logger = logging.getLogger(__name__)


class DefaultsHelpFormatter(DjangoHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    pass


class GreedyCommand(SafeCommand):
    """Base of jgreedy management commands.

    Exit codes: 0 success, 1 invalid argument or domain error (ValidationError),
    2 I/O error (OSError), 3 property violation (PropertyViolation).
    The resolved options are echoed to stderr before the command runs.
    """

    def create_parser(self, prog_name: str, subcommand: str, **kwargs) -> CommandParser:
        kwargs.setdefault("formatter_class", DefaultsHelpFormatter)
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def error(message: str):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_ERROR, "{}: error: {}\n".format(parser.prog, message))
            raise CommandError("Error: {}".format(message), returncode=EXIT_ERROR)

        parser.error = error  # type: ignore
        return parser

    def resolved_config(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {k: v for k, v in options.items() if k not in DJANGO_DEFAULT_OPTIONS and k not in ("stdout", "stderr")}

    def handle(self, *args, **options):
        self.stderr.write("config: " + json.dumps(self.resolved_config(options), sort_keys=True, default=str))
        try:
            return super().handle(*args, **options)
        except PropertyViolation as exc:
            raise CommandError(str(exc), returncode=EXIT_PROPERTY_VIOLATION) from exc
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=EXIT_ERROR) from exc
        except OSError as exc:
            raise CommandError(str(exc), returncode=EXIT_IO_ERROR) from exc

    def emit(self, content: str, filename: str = ""):
        """Writes content to `filename`, or to stdout if filename is empty or "-"."""
        if filename and filename != "-":
            write_text_file(filename, content)
        else:
            self.stdout.write(content, ending="")
