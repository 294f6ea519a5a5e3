"""
Monte-Carlo experiment engine.

Runs every (L, M, K, solver) cell of an ExperimentSpec. Trials of a cell run
concurrently on a bounded thread pool; each trial draws its scenario from a
generator keyed by (L, M, K, trial), so results do not depend on the worker
count and every solver of a cell sees the same scenarios.
"""
import asyncio
import itertools
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import structlog

from covlearn.core.config import ExperimentSpec
from covlearn.core.jadce import nmse, prob_missed_detection, run_jadce
from covlearn.core.models import DetectionRule, Dims, PilotMatrix, ResultRow, SolverConfig
from covlearn.core.scenario import generate_pilots, generate_scenario, sample_covariance, trial_rng
from covlearn.solvers.base import create_solver

# spawn-key prefix of the pilot stream used when pilots are held fixed
PILOT_STREAM = 2**32 - 1
TIMING_GROUPS = 5


class TrialError(RuntimeError):
    """Raised when a trial fails; aborts the experiment."""
    pass


@dataclass(frozen=True)
class Cell:
    """One point of the sweep."""

    solver: str
    L: int
    M: int
    K: int


@dataclass
class TrialOutcome:
    """Metrics of one Monte-Carlo trial."""

    trial: int
    p_md: float
    nmse: float
    solver_time: float
    iterations: int
    converged: bool


def _mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))


def median_of_means(values: np.ndarray, groups: int = TIMING_GROUPS) -> float:
    """Median of the means of up to ``groups`` contiguous blocks."""
    blocks = np.array_split(np.asarray(values, dtype=float), min(groups, len(values)))
    return float(np.median([block.mean() for block in blocks]))


def aggregate(cell: Cell, outcomes: List[TrialOutcome]) -> ResultRow:
    """
    Aggregate trial outcomes into a ResultRow.

    Outcomes are ordered by trial index first so the result does not depend on
    completion order.
    """
    outcomes = sorted(outcomes, key=lambda o: o.trial)
    p_md_mean, p_md_se = _mean_stderr(np.array([o.p_md for o in outcomes]))
    nmse_mean, nmse_se = _mean_stderr(np.array([o.nmse for o in outcomes]))
    return ResultRow(
        solver=cell.solver,
        L=cell.L,
        M=cell.M,
        K=cell.K,
        trials=len(outcomes),
        p_md_mean=p_md_mean,
        p_md_stderr=p_md_se,
        nmse_mean=nmse_mean,
        nmse_stderr=nmse_se,
        mean_solver_time_s=median_of_means(np.array([o.solver_time for o in outcomes])),
        mean_iterations=float(np.mean([o.iterations for o in outcomes])),
    )


class ExperimentEngine:
    """
    Runs an experiment sweep.

    Attributes:
        spec: The validated experiment description
        workers: Size of the trial thread pool
        solver_config: Configuration passed to every solver (defaults when None)
    """

    def __init__(
        self,
        spec: ExperimentSpec,
        workers: int = 1,
        solver_config: Optional[SolverConfig] = None,
    ):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.spec = spec
        self.workers = workers
        self.solver_config = solver_config
        self.logger = structlog.get_logger("covlearn.engine")
        self._solvers = {name: create_solver(name) for name in set(spec.solvers)}

    def cells(self) -> Iterator[Cell]:
        """Cells in output order: L, then M, then K, then solver."""
        for L, M, K in itertools.product(
            self.spec.L_values, self.spec.M_values, self.spec.K_values
        ):
            for solver in self.spec.solvers:
                yield Cell(solver=solver, L=L, M=M, K=K)

    def _rule(self, K: int) -> DetectionRule:
        detection = self.spec.detection
        if detection.rule == "threshold":
            return DetectionRule.threshold(detection.gamma_th)
        return DetectionRule.top_k(K)

    def _pilots(self, dims: Dims) -> Optional[PilotMatrix]:
        if not self.spec.fixed_pilots:
            return None
        return generate_pilots(dims, trial_rng(self.spec.master_seed, (PILOT_STREAM, dims.L)))

    def run_trial(self, cell: Cell, trial: int) -> TrialOutcome:
        """
        Run one trial of a cell.

        Raises:
            TrialError: If anything fails; the message names the cell and trial
        """
        try:
            dims = Dims(N=self.spec.N, L=cell.L, M=cell.M, K=cell.K)
            rng = trial_rng(self.spec.master_seed, (cell.L, cell.M, cell.K, trial))
            scenario = generate_scenario(dims, self.spec.noise_var, rng, self._pilots(dims))
            S = sample_covariance(scenario.received)
            output = run_jadce(
                scenario.received,
                scenario.pilots.entries,
                scenario.noise_var,
                self._rule(cell.K),
                solver=self._solvers[cell.solver],
                config=self.solver_config,
                S=S,
                K=cell.K,
            )
            outcome = TrialOutcome(
                trial=trial,
                p_md=prob_missed_detection(scenario.activity.support, output.support_hat),
                nmse=nmse(output.x_hat, scenario.effective_channels),
                solver_time=output.result.wall_time,
                iterations=output.result.iterations,
                converged=output.result.converged,
            )
        except Exception as e:
            self.logger.error(
                "trial_failed",
                solver=cell.solver, L=cell.L, M=cell.M, K=cell.K, trial=trial,
                exc_info=True,
            )
            raise TrialError(
                f"Trial failed (solver={cell.solver}, L={cell.L}, M={cell.M}, "
                f"K={cell.K}, trial={trial}): {str(e)}"
            ) from e

        self.logger.debug(
            "trial_done",
            solver=cell.solver, trial=trial,
            iterations=outcome.iterations, converged=outcome.converged,
            solver_time=outcome.solver_time,
        )
        return outcome

    async def run_cell(self, cell: Cell, executor: Executor) -> ResultRow:
        """
        Run all trials of a cell on the executor and aggregate them.

        One warm-up trial runs first and is discarded.
        """
        self.logger.info(
            "cell_started", solver=cell.solver, L=cell.L, M=cell.M, K=cell.K,
            trials=self.spec.trials,
        )
        loop = asyncio.get_running_loop()
        await loop.run_in_executor(executor, self.run_trial, cell, 0)

        outcomes = await asyncio.gather(
            *(
                loop.run_in_executor(executor, self.run_trial, cell, trial)
                for trial in range(self.spec.trials)
            )
        )
        row = aggregate(cell, list(outcomes))
        self.logger.info(
            "cell_finished", solver=cell.solver, L=cell.L, M=cell.M, K=cell.K,
            p_md=row.p_md_mean, nmse=row.nmse_mean,
        )
        return row

    async def run(self, progress: Optional[Callable[[ResultRow], None]] = None) -> List[ResultRow]:
        """
        Run every cell in order.

        Args:
            progress: Called with each finished row

        Returns:
            One ResultRow per cell
        """
        rows = []
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            for cell in self.cells():
                row = await self.run_cell(cell, executor)
                rows.append(row)
                if progress is not None:
                    progress(row)
        return rows


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    solver_config: Optional[SolverConfig] = None,
    progress: Optional[Callable[[ResultRow], None]] = None,
) -> List[ResultRow]:
    """
    Run a Monte-Carlo sweep.

    Args:
        spec: Experiment description
        workers: Trial thread-pool size; results other than timings do not depend on it
        solver_config: Solver configuration shared by all cells
        progress: Called with each finished row

    Returns:
        One ResultRow per (L, M, K, solver) cell

    Raises:
        TrialError: If any trial fails
    """
    engine = ExperimentEngine(spec, workers=workers, solver_config=solver_config)
    return asyncio.run(engine.run(progress))


def runtime_comparison(
    spec: ExperimentSpec,
    solver_config: Optional[SolverConfig] = None,
    progress: Optional[Callable[[ResultRow], None]] = None,
) -> List[ResultRow]:
    """
    Solver timing sweep.

    Trials run on a single worker so timings are not distorted by contention.
    Solver time excludes building the sample covariance. Rows are grouped by
    (L, M, K) and ordered from fastest to slowest within each group.
    """
    rows = run_experiment(spec, workers=1, solver_config=solver_config, progress=progress)
    return sorted(rows, key=lambda r: (r.L, r.M, r.K, r.mean_solver_time_s))
