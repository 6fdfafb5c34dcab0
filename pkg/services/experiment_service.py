import asyncio
import hashlib
import json
import logging
import zlib
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, computed_field

from environments.environment import RunTrace, env_step, super_arm_reward
from environments.instance import BanditInstance
from policies.base_policy import Policy
from policies.factory import get_policy
from solvers.enumeration import DEFAULT_ENUMERATION_CAP

from .config_service import ExperimentConfig, PolicySpec, build_instance, require_valid_instance
from .heatmap_service import (
    AggregationError,
    TRACE_SUFFIX,
    default_bucket,
    encode_super_arm,
    exploration_heatmap,
    save_heatmap,
)
from .oracle_service import oracle_curve, regret_curve

logger = logging.getLogger(__name__)

REGRET_COLUMNS = ["t", "policy", "seed", "expected_reward", "cum_reward", "oracle_cum", "regret"]
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class RunSummary(BaseModel):
    policy: str
    seed: int
    final_regret: Optional[float] = None
    regret_file: Optional[str] = None
    trace_file: Optional[str] = None
    error: Optional[str] = None

    @computed_field
    @property
    def status(self) -> str:
        return "ok" if self.error is None else "failed"


class ExperimentManifest(BaseModel):
    name: str
    config_hash: str
    instance: str
    horizon: int
    bit_generator: str
    runs: List[RunSummary] = Field(default_factory=list)
    aggregates: Dict[str, str] = Field(default_factory=dict)
    heatmaps: Dict[str, str] = Field(default_factory=dict)

    @property
    def failures(self) -> List[RunSummary]:
        return [run for run in self.runs if run.error is not None]


def config_hash(config: ExperimentConfig) -> str:
    """Stable digest of the config; the output directory does not take part."""
    payload = config.model_dump(mode="json", exclude={"output_dir", "max_concurrent_runs"})
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def run_rng(seed: int, policy_label: str) -> np.random.Generator:
    """Generator determined by (seed, policy) only, so concurrent runs never share streams."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(policy_label.encode("utf-8"))]))


def simulate(instance: BanditInstance, policy: Policy, horizon: int, rng: np.random.Generator,
             seed: int = 0, label: Optional[str] = None) -> RunTrace:
    """Play `horizon` rounds of policy against the instance."""
    pulls = np.zeros(instance.num_arms, dtype=int)
    trace = RunTrace(instance_name=instance.name, policy=label or policy.name, seed=seed)
    for t in range(1, horizon + 1):
        super_arm = policy.select(t)
        record = env_step(instance, pulls, super_arm, t, rng)
        policy.update(record)
        means = [instance.arms[arm].mu(n) for arm, _, n in record.outcomes]
        trace.actions.append(record.super_arm)
        trace.expected_rewards.append(super_arm_reward(instance, means))
        trace.sampled_rewards.append(super_arm_reward(instance, record.values))
    trace.final_pulls = pulls.tolist()
    return trace


def execute_run(instance: BanditInstance, spec: PolicySpec, seed: int, horizon: int,
                enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> RunTrace:
    rng = run_rng(seed, spec.display_name)
    policy = get_policy(spec.name, instance, rng, spec.params, horizon=horizon, enumeration_cap=enumeration_cap)
    logger.info(f"Running {spec.display_name} seed={seed} for T={horizon}")
    trace = simulate(instance, policy, horizon, rng, seed=seed, label=spec.display_name)
    trace.metadata = {"policy_name": spec.name, "params": spec.params}
    return trace


def aggregate_curves(curves: List[np.ndarray]) -> pd.DataFrame:
    """Per-round mean and sample standard deviation (std is 0 for a single run)."""
    if not curves:
        raise AggregationError("No regret curves to aggregate.")
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise AggregationError(f"Regret curves have different lengths: {sorted(lengths)}")
    stacked = np.vstack(curves)
    std = stacked.std(axis=0, ddof=1) if len(curves) > 1 else np.zeros(stacked.shape[1])
    return pd.DataFrame({
        "t": np.arange(1, stacked.shape[1] + 1),
        "mean_regret": stacked.mean(axis=0),
        "std_regret": std,
        "runs": len(curves),
    })


def _trace_frame(trace: RunTrace) -> pd.DataFrame:
    return pd.DataFrame({
        "t": np.arange(1, trace.horizon + 1),
        "super_arm": [encode_super_arm(s) for s in trace.actions],
        "expected_reward": trace.expected_rewards,
        "sampled_reward": trace.sampled_rewards,
    })


def _write_run(out_dir: Path, instance: BanditInstance, trace: RunTrace, oracle_cum: np.ndarray,
               config: ExperimentConfig) -> Tuple[RunSummary, np.ndarray]:
    curve = regret_curve(trace, instance, config.enumeration_cap, sampled=config.sampled_regret, oracle_cum=oracle_cum)
    frame = curve.to_frame()
    frame.insert(1, "policy", trace.policy)
    frame.insert(2, "seed", trace.seed)

    stem = f"{instance.name}__{trace.policy}__seed{trace.seed}"
    regret_file = out_dir / f"{stem}.csv"
    trace_file = out_dir / f"{stem}{TRACE_SUFFIX}"
    frame[REGRET_COLUMNS].to_csv(regret_file, index=False)
    _trace_frame(trace).to_csv(trace_file, index=False)

    summary = RunSummary(policy=trace.policy, seed=trace.seed, final_regret=float(curve.regret[-1]),
                         regret_file=regret_file.name, trace_file=trace_file.name)
    return summary, curve.regret


@contextmanager
def run_log(out_dir: Path) -> Iterator[None]:
    """Mirror all log records into <out_dir>/run.log for the duration of an experiment."""
    handler = logging.FileHandler(out_dir / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    previous_level = root.level
    if root.getEffectiveLevel() > logging.INFO:
        root.setLevel(logging.INFO)
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        root.setLevel(previous_level)
        handler.close()


async def run_experiment_async(config: ExperimentConfig, instance: Optional[BanditInstance] = None) -> ExperimentManifest:
    """
    Run every (policy, seed) pair of the config concurrently and write the results.

    Runs are CPU-bound and go through worker threads; a semaphore caps how many
    are in flight. The GIL still serialises the simulation itself. A failing
    run is reported in the manifest without stopping the others.
    """
    instance = require_valid_instance(instance) if instance is not None else build_instance(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle_cum = oracle_curve(instance, config.horizon, config.enumeration_cap)
    semaphore = asyncio.Semaphore(config.max_concurrent_runs)

    async def one_run(spec: PolicySpec, seed: int) -> Tuple[RunSummary, Optional[np.ndarray], Optional[RunTrace]]:
        async with semaphore:
            try:
                trace = await asyncio.to_thread(execute_run, instance, spec, seed, config.horizon, config.enumeration_cap)
                summary, regret = await asyncio.to_thread(_write_run, out_dir, instance, trace, oracle_cum, config)
                return summary, regret, trace
            except ValueError as e:
                logger.error(f"Run {spec.display_name} seed={seed} failed: {e}", exc_info=True)
                return RunSummary(policy=spec.display_name, seed=seed, error=str(e)), None, None

    jobs = [(spec, seed) for spec in config.policies for seed in config.seeds]
    results = await asyncio.gather(*(one_run(spec, seed) for spec, seed in jobs), return_exceptions=True)

    manifest = ExperimentManifest(name=config.name, config_hash=config_hash(config),
                                  instance=instance.name, horizon=config.horizon,
                                  bit_generator=type(run_rng(0, "").bit_generator).__name__)
    regrets: Dict[str, List[np.ndarray]] = {spec.display_name: [] for spec in config.policies}
    traces: Dict[str, List[RunTrace]] = {spec.display_name: [] for spec in config.policies}
    for (spec, seed), result in zip(jobs, results):
        if isinstance(result, BaseException):
            logger.error(f"Run {spec.display_name} seed={seed} raised {result!r}", exc_info=result)
            manifest.runs.append(RunSummary(policy=spec.display_name, seed=seed, error=repr(result)))
            continue
        summary, regret, trace = result
        manifest.runs.append(summary)
        if regret is not None:
            regrets[spec.display_name].append(regret)
            traces[spec.display_name].append(trace)

    for label, curves in regrets.items():
        if not curves:
            continue
        aggregate_file = out_dir / f"{instance.name}__{label}__aggregate.csv"
        aggregate_curves(curves).to_csv(aggregate_file, index=False)
        manifest.aggregates[label] = aggregate_file.name

        if config.record_heatmap:
            bucket = config.heatmap_bucket or default_bucket(config.horizon)
            heatmap_file = out_dir / f"{instance.name}__{label}__heatmap.csv"
            counts = exploration_heatmap([t.actions for t in traces[label]], instance.num_arms, bucket)
            save_heatmap(counts, bucket, heatmap_file)
            manifest.heatmaps[label] = heatmap_file.name

    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Experiment '{config.name}' finished: {len(manifest.runs)} runs, {len(manifest.failures)} failed")
    return manifest


def run_experiment(config: ExperimentConfig, instance: Optional[BanditInstance] = None) -> ExperimentManifest:
    """Synchronous entry point; writes run.log next to the results."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with run_log(out_dir):
        return asyncio.run(run_experiment_async(config, instance))
