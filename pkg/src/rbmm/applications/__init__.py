"""Stylized optimization problems packaged as block problems.

Each module builds a `BlockProblem`, a matching `SolverConfig` (closed-form
block solvers where they exist), a feasible initial state, and an
application-specific error metric, bundled as a `RunSetup` for the CLI and
the test suite.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

from ..driver import BlockProblem, RunResult, SolverConfig
from ..geometry import ProductPoint


@dataclasses.dataclass(frozen=True, eq=False)
class RunSetup:
    """Everything one experiment run needs."""

    name: str
    problem: BlockProblem
    config: SolverConfig
    init: ProductPoint
    final_metric: Optional[Callable[[RunResult], float]]
    metric_name: str
    params: dict


__all__ = ["RunSetup"]
