import logging
from django.core.exceptions import ValidationError
from django.core.management.base import CommandParser
from django.utils.translation import gettext as _
from jgreedy.bounds import bounds_row, bounds_sweep, dai_decay_rate, dai_rho_enabled, format_bounds_csv
from jgreedy.command import GreedyCommand

logger = logging.getLogger(__name__)


class Command(GreedyCommand):
    help = "Prints convergence constants (rho_4k, rho_3k, c_cosamp, c_sp, Dai bound per K) at one delta or over a delta grid"
    range_required = False

    def add_arguments(self, parser: CommandParser):
        if not self.range_required:
            parser.add_argument("--delta", type=float, default=None, help="single delta value")
        parser.add_argument("--delta-min", type=float, default=None, required=self.range_required, help="grid start")
        parser.add_argument("--delta-max", type=float, default=None, required=self.range_required, help="grid end")
        parser.add_argument("--steps", type=int, default=None, required=self.range_required, help="number of grid points")
        parser.add_argument("--enable-dai-rho", action="store_true", help="append Dai bound column using the earlier decay constant")
        parser.add_argument("--out", type=str, default="-", help="output CSV file")

    def do(self, *args, **kwargs):
        with_dai_rho = kwargs["enable_dai_rho"] or dai_rho_enabled()
        decay = dai_decay_rate if kwargs["enable_dai_rho"] else None
        delta = kwargs.get("delta")
        ranged = [kwargs["delta_min"], kwargs["delta_max"], kwargs["steps"]]
        if delta is not None:
            if any(v is not None for v in ranged):
                raise ValidationError(_("--delta cannot be combined with --delta-min, --delta-max or --steps"))
            rows = [bounds_row(delta, decay)]
        else:
            if any(v is None for v in ranged):
                raise ValidationError(_("Either --delta or all of --delta-min, --delta-max and --steps are required"))
            rows = bounds_sweep(kwargs["delta_min"], kwargs["delta_max"], kwargs["steps"], decay)
        self.emit(format_bounds_csv(rows, with_dai_rho=with_dai_rho), kwargs["out"])
