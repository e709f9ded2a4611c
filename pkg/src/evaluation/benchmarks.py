"""
Pose, payload, push and path benchmarks.

Every goal is an independent episode from the spawn hover with its own seed
stream, spawned from the benchmark seed. Sequential and parallel mode
therefore produce the same logs in the same order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.dynamics.contact import PushRig
from src.dynamics.model import DsamModel
from src.evaluation.episodes import (
    EpisodeArchive, EpisodeLog, PolicyController, PoseController, PushContact, run_episode,
)
from src.evaluation.metrics import Scoring, build_report
from src.evaluation.paths import path_samples, push_path
from src.geometry.se3 import Pose
from src.models.config import BenchmarkSpec, PathSpec, PushRigConfig, RunConfig
from src.models.results import MetricsReport
from src.policy.network import Policy, PolicyWeights
from src.training.env import sample_goal

logger = logging.getLogger(__name__)

ControllerSource = Union[PolicyWeights, PoseController]


@dataclass
class _GoalJob:
    index: int
    goals: Pose
    settle_steps: int
    seed: np.random.SeedSequence


def _controller(source: ControllerSource) -> Tuple[PoseController, Optional[Policy]]:
    """A fresh controller per episode, so parallel episodes share no state."""
    if isinstance(source, PolicyWeights):
        policy = Policy(source)
        return PolicyController(policy), policy
    return source, None


def _run_jobs(source: ControllerSource, jobs: Sequence[_GoalJob], config: RunConfig, spec: BenchmarkSpec,
              model: DsamModel, contact: Optional[Callable[[], PushContact]] = None
              ) -> Tuple[List[EpisodeLog], Optional[float]]:
    def run(job: _GoalJob) -> Tuple[EpisodeLog, Optional[Policy]]:
        controller, policy = _controller(source)
        log = run_episode(controller, job.goals, config, model, np.random.default_rng(job.seed),
                          disturbance=contact() if contact is not None else None,
                          goal_index=job.index, settle_steps=job.settle_steps,
                          payload_mass=spec.payload_mass)
        outcome = "CRASHED" if log.crashed else "done"
        logger.info("%s goal %d/%d %s (%d steps)", spec.task, job.index + 1, len(jobs), outcome, log.num_steps)
        return log, policy

    if spec.parallel and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(len(jobs), 8)) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    policies = [policy for _, policy in results if policy is not None]
    calls = sum(p.calls for p in policies)
    latency = 1e3 * sum(p.total_seconds for p in policies) / calls if calls else None
    return [log for log, _ in results], latency


def _report(task: str, logs: List[EpisodeLog], latency: Optional[float], spec: BenchmarkSpec,
            config: RunConfig, scoring: Scoring) -> Tuple[MetricsReport, EpisodeArchive]:
    rate = config.simulation.policy_rate_hz
    report = build_report(
        task, logs, seed=spec.seed, scoring=scoring, window_s=spec.window_s, rate_hz=rate,
        position_threshold_m=spec.position_threshold_m,
        orientation_threshold_deg=spec.orientation_threshold_deg,
        payload_mass=spec.payload_mass, inference_latency_ms=latency,
    )
    meta = {"seed": spec.seed, "scoring": scoring, "window_s": spec.window_s, "rate_hz": rate,
            "position_threshold_m": spec.position_threshold_m,
            "orientation_threshold_deg": spec.orientation_threshold_deg,
            "payload_mass": spec.payload_mass, "inference_latency_ms": latency}
    if report.crashed_count:
        logger.warning("%s: %d of %d episodes crashed", task, report.crashed_count, report.goal_count)
    return report, EpisodeArchive(task=task, logs=logs, meta=meta)


def _plant(config: RunConfig, spec: BenchmarkSpec) -> DsamModel:
    return DsamModel.from_params(config.model, payload_mass=spec.payload_mass)


# =============================================================================
# Benchmarks
# =============================================================================

def _hold_benchmark(task: str, source: ControllerSource, config: RunConfig,
                    spec: BenchmarkSpec) -> Tuple[MetricsReport, EpisodeArchive]:
    steps = int(round(spec.hold_duration_s * config.simulation.policy_rate_hz))
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.goal_count)
    ranges = spec.goal_ranges()
    jobs = []
    for index, seed in enumerate(seeds):
        # sensor noise draws from a child stream, so goals do not depend on it
        goal = sample_goal(np.random.default_rng(seed), ranges)
        held = Pose(np.broadcast_to(goal.position, (steps, 3)).copy(),
                    np.broadcast_to(goal.orientation, (steps, 4)).copy())
        jobs.append(_GoalJob(index, held, 0, seed.spawn(1)[0]))
    logs, latency = _run_jobs(source, jobs, config, spec, _plant(config, spec))
    return _report(task, logs, latency, spec, config, "window")


def run_pose_benchmark(source: ControllerSource, config: RunConfig,
                       spec: Optional[BenchmarkSpec] = None) -> Tuple[MetricsReport, EpisodeArchive]:
    """Hold each sampled goal and score the final window."""
    return _hold_benchmark("pose", source, config, spec or config.evaluation.pose)


def run_payload_benchmark(source: ControllerSource, config: RunConfig,
                          spec: Optional[BenchmarkSpec] = None) -> Tuple[MetricsReport, EpisodeArchive]:
    """Pose benchmark with spec.payload_mass added to the gripper; unknown to the controller."""
    return _hold_benchmark("payload", source, config, spec or config.evaluation.payload)


def run_payload_sweep(source: ControllerSource, config: RunConfig,
                      payloads: Optional[Sequence[float]] = None,
                      spec: Optional[BenchmarkSpec] = None) -> List[Tuple[MetricsReport, EpisodeArchive]]:
    """Payload benchmark once per payload mass, same goals and seeds each time."""
    spec = spec or config.evaluation.payload
    payloads = config.evaluation.payload_sweep if payloads is None else payloads
    results = []
    for payload in payloads:
        logger.info("payload sweep: %.3f kg", payload)
        results.append(run_payload_benchmark(source, config, spec.model_copy(update={"payload_mass": float(payload)})))
    return results


def run_push_benchmark(source: ControllerSource, config: RunConfig,
                       spec: Optional[BenchmarkSpec] = None) -> Tuple[MetricsReport, EpisodeArchive]:
    """Push the box along a straight line at constant gripper speed; reports box displacement."""
    spec = spec or config.evaluation.push
    rig_config = spec.push or PushRigConfig()
    rig = PushRig(rig_config, gravity=config.model.gravity)
    samples = push_path(rig_config, config.simulation.policy_rate_hz)
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.goal_count)
    jobs = [_GoalJob(i, samples.poses, samples.settle_steps, seed) for i, seed in enumerate(seeds)]
    logs, latency = _run_jobs(source, jobs, config, spec, _plant(config, spec),
                              contact=lambda: PushContact(rig))
    return _report("push", logs, latency, spec, config, "path")


def run_path_benchmark(source: ControllerSource, config: RunConfig,
                       spec: Optional[BenchmarkSpec] = None) -> Tuple[MetricsReport, EpisodeArchive]:
    """Feed the sampled path one pose per policy step; RMSE against the pose commanded at each step."""
    spec = spec or config.evaluation.path
    samples = path_samples(spec.path or PathSpec(), config.simulation.policy_rate_hz)
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.goal_count)
    jobs = [_GoalJob(i, samples.poses, samples.settle_steps, seed) for i, seed in enumerate(seeds)]
    logs, latency = _run_jobs(source, jobs, config, spec, _plant(config, spec))
    return _report("path", logs, latency, spec, config, "path")


BENCHMARKS = {
    "pose": run_pose_benchmark,
    "payload": run_payload_benchmark,
    "push": run_push_benchmark,
    "path": run_path_benchmark,
}
