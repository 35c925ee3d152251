"""Pipeline commands of the TV-ULoG command-line driver."""

from tasks.bench import cmd_bench
from tasks.demo import cmd_demo_1d, cmd_demo_2d
from tasks.stages import cmd_extract, cmd_solve, cmd_tube

__all__ = ["cmd_bench", "cmd_demo_1d", "cmd_demo_2d", "cmd_extract", "cmd_solve", "cmd_tube"]
