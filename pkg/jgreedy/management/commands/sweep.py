from jgreedy.management.commands.bounds import Command as BoundsCommand


class Command(BoundsCommand):
    help = "Sweeps convergence constants over a uniform delta grid (bounds with a required range)"
    range_required = True
