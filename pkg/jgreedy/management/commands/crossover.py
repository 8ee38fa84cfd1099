import logging
from collections import OrderedDict
from django.core.management.base import CommandParser
from jgreedy.bounds import DAI_RHO, DAI_VARIANTS, SAME_RHO, UNIT_ROOT_TOL, convergence_thresholds, crossover_delta, dai_decay_rate
from jgreedy.command import GreedyCommand
from jgreedy.helpers import json_dumps

logger = logging.getLogger(__name__)


class Command(GreedyCommand):
    help = "Finds delta_3k where the SP bound ceil(cK) meets the Dai bound 1.5K/ln(1/rho), plus the rho = 1 thresholds"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--variant", type=str, choices=DAI_VARIANTS, default=SAME_RHO, help="decay rate used inside the Dai bound")
        parser.add_argument("--enable-dai-rho", action="store_true", help="allow the dai_rho variant")
        parser.add_argument("--out", type=str, default="-", help="output JSON file")

    def do(self, *args, **kwargs):
        decay = dai_decay_rate if kwargs["enable_dai_rho"] and kwargs["variant"] == DAI_RHO else None
        res = crossover_delta(kwargs["variant"], decay)
        thresholds = convergence_thresholds()
        data = OrderedDict(
            [
                ("variant", res.variant),
                ("delta", res.delta),
                ("bracket", list(res.bracket)),
                ("endpoint_values", list(res.endpoint_values)),
                ("tolerance", res.tolerance),
                ("note", res.note),
                ("delta_cosamp_rho1", thresholds.delta_cosamp_rho1),
                ("delta_sp_rho1", thresholds.delta_sp_rho1),
                ("delta_lemma2", thresholds.delta_lemma2),
                ("unit_root_tolerance", UNIT_ROOT_TOL),
            ]
        )
        self.emit(json_dumps(data), kwargs["out"])
