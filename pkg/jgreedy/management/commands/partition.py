import logging
import math
from collections import OrderedDict
from django.core.management.base import CommandParser
from jgreedy.bounds import greedy_partition, iteration_constant_cosamp, kmin_noiseless
from jgreedy.command import GreedyCommand
from jgreedy.helpers import json_dumps
from jgreedy.parsers import read_vector_file
from jgreedy.sparse import SparseSignal

logger = logging.getLogger(__name__)


class Command(GreedyCommand):
    help = "Prints the magnitude band partition of a signal and the CoSaMP iterations needed per band"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--signal", type=str, required=True, help="signal vector file")
        parser.add_argument("--delta", type=float, required=True, help="delta_4k")
        parser.add_argument("--out", type=str, default="-", help="output JSON file")

    def do(self, *args, **kwargs):
        x = SparseSignal(read_vector_file(kwargs["signal"]))
        delta = kwargs["delta"]
        schedule = greedy_partition(x, delta)
        data = OrderedDict(
            [
                ("K", x.nnz),
                ("delta", delta),
                ("partitions", [list(p) for p in schedule.partitions]),
                ("iterations", list(schedule.iterations)),
                ("total", schedule.total),
                ("kmin", kmin_noiseless(x, delta)),
                ("bound", int(math.ceil(iteration_constant_cosamp(delta) * x.nnz))),
            ]
        )
        self.emit(json_dumps(data), kwargs["out"])
