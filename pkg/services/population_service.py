"""
Self-play partner populations for the gridworld.

A population is trained in two phases. Clone training puts the latest parameters in
both seats. Co-op training keeps updating only the latest parameters while the
partner seat draws frozen snapshots. Skill levels are picked from the snapshots
afterwards and the whole population is persisted as `manifest.txt` plus one
`snap_<iter>.bcpm` checkpoint per snapshot.
"""
import logging
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from exceptions import ConfigurationError, NumericError, StorageError
from models.agents import ActorCritic, tsg_self_play_agent
from models.layers import Network
from models.networks import tsg_policy_spec
from models.params import ParamSet
from schemas.label_schemas import SkillLevel
from schemas.population_schemas import PopulationConfig, PopulationManifest, SnapshotInfo
from services.ppo_service import PpoTrainer, write_stats_csv
from services.rollout_service import (
    FrozenPolicy,
    LabelledPartners,
    SelfPlayPartners,
    TsgEnvAdapter,
    collect_episodes,
)
from storage import load_params, load_text, save_params, save_text

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.txt"


@dataclass
class Snapshot:
    params: ParamSet
    iteration: int
    phase: str = "clone"
    eval_return: Optional[float] = None

    @property
    def file(self) -> str:
        return f"snap_{self.iteration}.bcpm"

    def info(self) -> SnapshotInfo:
        return SnapshotInfo(
            iteration=self.iteration,
            phase=self.phase,
            file=self.file,
            digest=self.params.digest(),
            eval_return=self.eval_return,
        )


def self_play_return(
    agent: ActorCritic, env: TsgEnvAdapter, episodes: int, rng: np.random.Generator
) -> Callable[[ParamSet], float]:
    """Mean return of a snapshot partnered with itself"""

    def evaluate(params: ParamSet) -> float:
        batch = collect_episodes(env, agent, params, SelfPlayPartners(), episodes, rng)
        return float(batch.episode_returns().mean())

    return evaluate


class PopulationService:
    """Trains and persists one population; one instance per seed"""

    def __init__(self, config: PopulationConfig, seed: int, out_dir: Optional[str] = None):
        self.config = config
        self.seed = seed
        self.out_dir = out_dir
        self.rng = np.random.default_rng(seed)
        self.eval_rng = np.random.default_rng([seed, 1])
        self.agent = tsg_self_play_agent(config.net)
        self.env = TsgEnvAdapter(config.tsg, config.wave_size)
        self.trainer = PpoTrainer(
            self.agent,
            self.env,
            config.hyper,
            self.rng,
            total_iterations=max(1, config.total_iterations),
            optim=config.optim,
            label=f"population[{seed}]",
        )
        self.snapshots: List[Snapshot] = []

    def _take_snapshot(self, iteration: int, params: ParamSet, phase: str) -> Snapshot:
        snapshot = Snapshot(params.copy(), iteration, phase)
        self.snapshots.append(snapshot)
        if self.out_dir:
            save_params(snapshot.params, os.path.join(self.out_dir, snapshot.file))
        logger.debug("Population %d snapshot at iteration %d (%s)", self.seed, iteration, phase)
        return snapshot

    def _run_phase(self, partners, iterations: int, phase: str, on_snapshot=None) -> None:
        interval = self.config.snapshot_interval
        start = self.trainer.iteration

        def on_iteration(iteration: int, params: ParamSet) -> None:
            if (iteration - start) % interval == 0 and not any(s.iteration == iteration for s in self.snapshots):
                snapshot = self._take_snapshot(iteration, params, phase)
                if on_snapshot is not None:
                    on_snapshot(snapshot)

        try:
            self.trainer.train(partners, iterations, on_iteration=on_iteration)
        except NumericError:
            logger.error("Population %d aborted at iteration %d; %d snapshots kept",
                         self.seed, self.trainer.iteration, len(self.snapshots))
            if self.out_dir:
                self.save_manifest()
            raise
        final = self.trainer.iteration
        if not any(s.iteration == final for s in self.snapshots):
            snapshot = self._take_snapshot(final, self.trainer.params, phase)
            if on_snapshot is not None:
                on_snapshot(snapshot)

    def clone_train(self) -> List[Snapshot]:
        """Both seats run the latest parameters; snapshot 0 is the fresh initialization"""
        logger.info("Population %d: clone training for %d iterations", self.seed, self.config.clone_iterations)
        self._run_phase(SelfPlayPartners(), self.config.clone_iterations, "clone")
        return list(self.snapshots)

    def coop_train(self, pool: Optional[Sequence[Snapshot]] = None) -> Snapshot:
        """
        Partners are drawn uniformly from frozen snapshots; only the latest parameters
        receive updates. Snapshots taken during the phase join the pool.
        """
        pool = list(pool if pool is not None else self.snapshots)
        if not pool:
            raise ConfigurationError("Co-op training needs a non-empty pool", code="EMPTY_POOL")
        logger.info("Population %d: co-op training for %d iterations over %d snapshots",
                    self.seed, self.config.coop_iterations, len(pool))
        network = Network(tsg_policy_spec(self.config.net))
        digests = {snapshot.iteration: snapshot.params.digest() for snapshot in pool}
        partners = LabelledPartners(
            [(FrozenPolicy(network, snapshot.params, f"snap_{snapshot.iteration}"), np.zeros(0)) for snapshot in pool]
        )

        def join_pool(snapshot: Snapshot) -> None:
            partners.entries.append((FrozenPolicy(network, snapshot.params, f"snap_{snapshot.iteration}"), np.zeros(0)))

        self._run_phase(partners, self.config.coop_iterations, "coop", on_snapshot=join_pool)
        changed = [it for it, digest in digests.items() if self._by_iteration(it, pool).params.digest() != digest]
        if changed:
            raise NumericError("Frozen partner snapshots changed during co-op training", details={"iterations": changed})
        return self.snapshots[-1]

    @staticmethod
    def _by_iteration(iteration: int, pool: Sequence[Snapshot]) -> Snapshot:
        return next(snapshot for snapshot in pool if snapshot.iteration == iteration)

    def evaluate_snapshots(self) -> None:
        evaluate = self_play_return(self.agent, self.env, self.config.eval_episodes, self.eval_rng)
        for snapshot in self.snapshots:
            if snapshot.eval_return is None:
                snapshot.eval_return = evaluate(snapshot.params)

    def manifest(self) -> PopulationManifest:
        skill_map = {}
        if len(self.snapshots) >= 3 and all(s.eval_return is not None for s in self.snapshots):
            skill_map = select_skill_levels(self.snapshots)
        return PopulationManifest(
            seed=self.seed,
            config=self.config,
            snapshots=[snapshot.info() for snapshot in self.snapshots],
            skill_map=skill_map,
        )

    def save_manifest(self) -> PopulationManifest:
        manifest = self.manifest()
        save_text(manifest.model_dump_json(indent=2), os.path.join(self.out_dir, MANIFEST_FILE))
        return manifest

    def generate(self) -> PopulationManifest:
        """Clone phase, co-op phase, snapshot evaluation and skill selection"""
        self.clone_train()
        self.coop_train()
        self.evaluate_snapshots()
        manifest = self.manifest()
        if self.out_dir:
            save_population(manifest, self.snapshots, self.out_dir)
            write_stats_csv(self.trainer.history, os.path.join(self.out_dir, "stats.csv"))
        levels = ", ".join(f"{level.value}={iteration}" for level, iteration in manifest.skill_map.items())
        logger.info("Population %d done: %s", self.seed, levels)
        return manifest


def clone_train(config: PopulationConfig, seed: int, out_dir: Optional[str] = None) -> List[Snapshot]:
    return PopulationService(config, seed, out_dir).clone_train()


def select_skill_levels(
    snapshots: Sequence[Snapshot], eval_fn: Optional[Callable[[ParamSet], float]] = None
) -> Dict[SkillLevel, int]:
    """
    Novice is the first snapshot, skilled the last; intermediate is the interior
    snapshot whose return lies closest to the midpoint of those two (earliest on ties).
    Returns must then read novice <= intermediate <= skilled, else SKILL_ORDER.
    """
    if len(snapshots) < 3:
        raise ConfigurationError("Skill selection needs at least three snapshots", code="TOO_FEW_SNAPSHOTS")
    ordered = sorted(snapshots, key=lambda snapshot: snapshot.iteration)
    for snapshot in ordered:
        if snapshot.eval_return is None:
            if eval_fn is None:
                raise ConfigurationError(f"Snapshot {snapshot.iteration} has no evaluation return")
            snapshot.eval_return = eval_fn(snapshot.params)
    novice, skilled = ordered[0], ordered[-1]
    midpoint = 0.5 * (novice.eval_return + skilled.eval_return)
    intermediate = min(ordered[1:-1], key=lambda snapshot: abs(snapshot.eval_return - midpoint))
    if not novice.eval_return <= intermediate.eval_return <= skilled.eval_return:
        raise ConfigurationError(
            "Snapshot returns do not rise from novice to skilled",
            code="SKILL_ORDER",
            details={level: (s.iteration, s.eval_return) for level, s in
                     (("novice", novice), ("intermediate", intermediate), ("skilled", skilled))},
        )
    return {
        SkillLevel.NOVICE: novice.iteration,
        SkillLevel.INTERMEDIATE: intermediate.iteration,
        SkillLevel.SKILLED: skilled.iteration,
    }


def save_population(manifest: PopulationManifest, snapshots: Sequence[Snapshot], directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    by_iteration = {snapshot.iteration: snapshot for snapshot in snapshots}
    for info in manifest.snapshots:
        if info.iteration not in by_iteration:
            raise ConfigurationError(f"Manifest lists snapshot {info.iteration} without parameters")
        save_params(by_iteration[info.iteration].params, os.path.join(directory, info.file))
    return save_text(manifest.model_dump_json(indent=2), os.path.join(directory, MANIFEST_FILE))


def load_population(directory: str) -> PopulationManifest:
    path = os.path.join(directory, MANIFEST_FILE)
    try:
        manifest = PopulationManifest.model_validate_json(load_text(path))
    except ValidationError as error:
        raise StorageError(
            f"Invalid population manifest {path}",
            path=path,
            code="BAD_MANIFEST",
            details={"path": path, "errors": [item["msg"] for item in error.errors()]},
        ) from None
    missing = [info.file for info in manifest.snapshots if not os.path.exists(os.path.join(directory, info.file))]
    if missing:
        raise StorageError(f"Population {directory} lacks snapshot files", path=directory,
                           code="MISSING_FILE", details={"path": directory, "files": missing})
    return manifest


def load_snapshot(directory: str, info: SnapshotInfo) -> Snapshot:
    path = os.path.join(directory, info.file)
    params = load_params(path)
    if params.digest() != info.digest:
        raise StorageError(f"Checkpoint {path} does not match its manifest digest", path=path, code="CORRUPT")
    return Snapshot(params, info.iteration, info.phase, info.eval_return)


def load_snapshots(directory: str, manifest: Optional[PopulationManifest] = None) -> List[Snapshot]:
    manifest = manifest or load_population(directory)
    return [load_snapshot(directory, info) for info in manifest.snapshots]


def nearest_skill(manifest: PopulationManifest, eval_return: Optional[float]) -> SkillLevel:
    """Skill level whose selected snapshot has the closest evaluation return"""
    if not manifest.skill_map:
        raise ConfigurationError("Population has no skill map", code="NO_SKILL_MAP")
    if eval_return is None:
        raise ConfigurationError("Snapshot has no evaluation return")
    anchors = [(level, manifest.skill_snapshot(level).eval_return) for level in SkillLevel]
    return min(anchors, key=lambda item: abs(item[1] - eval_return))[0]


def skill_partners(directory: str, manifest: Optional[PopulationManifest] = None) -> List[Tuple[FrozenPolicy, np.ndarray]]:
    """The three selected snapshots, each labelled with its skill one-hot"""
    manifest = manifest or load_population(directory)
    if not manifest.skill_map:
        raise ConfigurationError(f"Population {directory} has no skill map", code="NO_SKILL_MAP")
    network = Network(tsg_policy_spec(manifest.config.net))
    entries = []
    for level in SkillLevel:
        snapshot = load_snapshot(directory, manifest.skill_snapshot(level))
        entries.append((FrozenPolicy(network, snapshot.params, level.value), level.one_hot()))
    return entries


def labelled_pool(directory: str, manifest: Optional[PopulationManifest] = None) -> List[Tuple[FrozenPolicy, np.ndarray]]:
    """Every snapshot, labelled by the nearest skill level"""
    manifest = manifest or load_population(directory)
    network = Network(tsg_policy_spec(manifest.config.net))
    entries = []
    for info in manifest.snapshots:
        level = nearest_skill(manifest, info.eval_return)
        snapshot = load_snapshot(directory, info)
        entries.append((FrozenPolicy(network, snapshot.params, level.value), level.one_hot()))
    return entries
