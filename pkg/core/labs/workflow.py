import time
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

from langgraph.graph import StateGraph
from pydantic import BaseModel, Field, InstanceOf

import core
from core.errors import DomainError
from core.labs.base import BaseLab
from core.labs.dvoretzky import DvoretzkyLab
from core.labs.inequalities.suite import CheckContext, InequalitySuite
from core.labs.mc_engine import MonteCarloEngine, estimate_stats
from core.labs.rearrangement import gaussian_rearrangement
from core.models.dvoretzky import InstabilityReport
from core.models.experiment import ExperimentConfig, FunctionSummary, RunReport, RunTiming
from core.models.functions import FunctionSpec, TiltParams
from core.models.verdicts import InequalityVerdict
from core.tools import reporting
from core.tools.catalog import parse_key, rate_for
from core.utils import require

REPORT_FILE = 'report.json'
TIMING_FILE = 'timing.json'
VERDICTS_FILE = 'verdicts.csv'
TRACKED_PACKAGES = ('numpy', 'scipy', 'pydantic', 'langgraph')


def file_stem(key: str) -> str:
    """A catalog key made safe for file names."""
    return key.replace(':', '_').replace('=', '-').replace('/', '_')


def collect_versions() -> dict[str, str]:
    versions = {'conclab': core.__version__}
    for package in TRACKED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = 'unknown'
    return versions


class ExperimentInput(BaseModel):
    config: ExperimentConfig = Field(
        description='The validated experiment request'
    )


class ExperimentState(BaseModel):
    """State object passed between the nodes of the experiment workflow"""
    config: ExperimentConfig = Field(
        description='The validated experiment request'
    )
    specs: list[InstanceOf[FunctionSpec]] = Field(
        description='Functions resolved from the catalog keys, in config order',
        default_factory=list
    )
    contexts: list[InstanceOf[CheckContext]] = Field(
        description='One lazily sampled check context per function',
        default_factory=list
    )
    summaries: list[FunctionSummary] = Field(default_factory=list)
    verdicts: list[InequalityVerdict] = Field(default_factory=list)
    dvoretzky: list[InstabilityReport] = Field(default_factory=list)
    report: RunReport | None = Field(
        description='The final report, set by the last node',
        default=None
    )
    timing: dict[str, float] = Field(default_factory=dict)


class ExperimentWorkflow(BaseLab):
    """
    resolve_specs → sample → estimate → run_checks → [dvoretzky] → write_outputs. Every stage derives its
    randomness from the config seed, so the report body depends on the config alone.
    """

    def __init__(self, threads: int | None = None) -> None:
        super().__init__(name='experiment', threads=threads)
        self.engine = MonteCarloEngine(threads=self.threads)
        self.suite = InequalitySuite(engine=self.engine, threads=self.threads)
        self.workflow = self._create_workflow().compile()

    def invoke(self, config: ExperimentConfig) -> RunReport:
        final_state = self.workflow.invoke(input=ExperimentInput(config=config))
        return final_state['report']

    def _create_workflow(self) -> StateGraph[ExperimentState, Any, ExperimentInput, Any]:
        workflow = StateGraph(
            input_schema=ExperimentInput,
            state_schema=ExperimentState
        )

        (workflow
         .add_node('resolve_specs', self._timed('resolve_specs', self._resolve_specs))
         .add_node('sample', self._timed('sample', self._sample))
         .add_node('estimate', self._timed('estimate', self._estimate))
         .add_node('run_checks', self._timed('run_checks', self._run_checks))
         .add_node('dvoretzky', self._timed('dvoretzky', self._run_dvoretzky))
         .add_node('write_outputs', self._write_outputs))

        (workflow
         .set_entry_point('resolve_specs')
         .add_edge('resolve_specs', 'sample')
         .add_edge('sample', 'estimate')
         .add_edge('estimate', 'run_checks')
         .add_conditional_edges(
            'run_checks',
            self._wants_dvoretzky,
            {
                'dvoretzky': 'dvoretzky',
                'write': 'write_outputs'
            }
        )
         .add_edge('dvoretzky', 'write_outputs')
         .set_finish_point('write_outputs'))

        return workflow

    @staticmethod
    def _timed(stage: str,
               node: Callable[[ExperimentState], ExperimentState]) -> Callable[[ExperimentState], ExperimentState]:
        def run(state: ExperimentState) -> ExperimentState:
            started = time.perf_counter()
            state = node(state)
            state.timing[stage] = time.perf_counter() - started
            return state

        return run

    def _resolve_specs(self, state: ExperimentState) -> ExperimentState:
        self._log.info(f'📚 Resolving {len(state.config.keys)} catalog key(s)')
        state.specs = [parse_key(key, state.config.n) for key in state.config.keys]
        return state

    def _sample(self, state: ExperimentState) -> ExperimentState:
        config = state.config
        state.contexts = [
            self.suite.context(spec, config.samples, config.seed, t_grid=config.t_grid, alpha=config.alpha,
                               chi2_k=config.chi2_k)
            for spec in state.specs
        ]
        for ctx in state.contexts:
            _ = ctx.emp
        return state

    def _estimate(self, state: ExperimentState) -> ExperimentState:
        for ctx in state.contexts:
            try:
                constants = ctx.constants
            except DomainError as e:
                self._log.warning(f'⚠️ No concentration constants for {ctx.spec.key}: {e}')
                constants = None
            state.summaries.append(FunctionSummary(function_key=ctx.spec.key,
                                                   stats=estimate_stats(ctx.emp, state.config.p_list),
                                                   constants=constants))
        return state

    def _run_checks(self, state: ExperimentState) -> ExperimentState:
        names = self.suite.resolve(state.config.checks)
        self._log.info(f'🔎 Running {len(names)} check(s) on {len(state.contexts)} function(s)')
        for ctx in state.contexts:
            state.verdicts += [self.suite.run_check(name, ctx) for name in names]
        return state

    def _run_dvoretzky(self, state: ExperimentState) -> ExperimentState:
        config = state.config
        lab = DvoretzkyLab(engine=self.engine, trials=config.trials, directions=config.directions,
                           polish=config.polish, threads=self.threads)
        for spec in state.specs:
            try:
                match spec.params:
                    case TiltParams(base=base, t=t):
                        report = lab.tilted_instability_experiment(base, config.seed, t, config.epsilon_grid,
                                                                   config.samples)
                    case _:
                        report = lab.instability_experiment(spec, config.seed, config.epsilon_grid,
                                                            config.samples)
            except DomainError as e:
                self._log.warning(f'⚠️ Skipping the Dvoretzky experiment on {spec.key}: {e}')
                continue
            state.dvoretzky.append(report)
        return state

    def _wants_dvoretzky(self, state: ExperimentState) -> str:
        if state.config.epsilon_grid:
            self._log.info('Epsilon grid given, running the Dvoretzky experiment...')
            return 'dvoretzky'
        return 'write'

    def _write_outputs(self, state: ExperimentState) -> ExperimentState:
        config = state.config
        out = Path(config.output_dir)
        self._log.info(f'💾 Writing reports to {out}')

        state.report = RunReport(config=config, seed=config.seed, versions=collect_versions(),
                                 summaries=state.summaries, verdicts=state.verdicts, dvoretzky=state.dvoretzky)
        reporting.write_json(state.report, out / REPORT_FILE)
        reporting.write_verdict_rollup(state.verdicts, out / VERDICTS_FILE)
        if state.dvoretzky:
            reporting.write_success_table([estimate for report in state.dvoretzky for estimate in report.estimates],
                                          out / 'dvoretzky_success.csv')

        if config.plots:
            self._write_plots(state, out)
        if config.keep_samples:
            for ctx in state.contexts:
                reporting.save_samples(ctx.emp, out / f'{file_stem(ctx.spec.key)}.samples')

        reporting.write_json(RunTiming(seconds=state.timing), out / TIMING_FILE)
        return state

    def _write_plots(self, state: ExperimentState, out: Path) -> None:
        verdicts_by_key: dict[str, list[InequalityVerdict]] = {}
        for verdict in state.verdicts:
            verdicts_by_key.setdefault(verdict.function_key, []).append(verdict)

        for ctx in state.contexts:
            stem = file_stem(ctx.spec.key)
            profile = ctx.lipschitz_profile if ctx.spec.lipschitz else ctx.sd_profile
            reporting.emit_plot_data(profile, out / f'{stem}_tails.csv')

            for verdict in verdicts_by_key.get(ctx.spec.key, []):
                if not verdict.grid:
                    continue
                rate = None
                if verdict.name == 'two_sided_rates':
                    rate = rate_for(ctx.spec)
                reporting.emit_plot_data(verdict, out / f'{stem}_{verdict.name}.csv', rate=rate)
                if verdict.name == 'rearrangement':
                    reporting.emit_plot_data(gaussian_rearrangement(ctx.emp), out / f'{stem}_rearrangement_curve.csv')


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> RunReport:
    """Runs one experiment end to end and returns its report; the report and side files are already written."""
    report = ExperimentWorkflow(threads=threads).invoke(config)
    return require(report)
