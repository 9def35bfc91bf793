"""
End-to-end experiment pipeline with resumable stages.

Every stage writes its artifacts and then a marker under `stages/`; a rerun skips
stages whose marker exists. Each stage seeds its own generator from the experiment
seed and the stage name, so a resumed run matches an uninterrupted one.
"""
import logging
import os
import zlib
from typing import Callable, List, Optional, Tuple

import numpy as np

from exceptions import ConfigurationError
from models.agents import matrix_conditioned_agent, rl2_agent, tsg_conditioned_agent, tsg_lstm_agent
from models.layers import Network
from models.networks import matrix_predictor_spec, skill_predictor_spec
from schemas.experiment_schemas import EvalRow, ExperimentConfig
from schemas.label_schemas import SkillLevel
from schemas.population_schemas import PopulationManifest
from schemas.training_schemas import PredictorConfig
from services.baseline_service import train_lstm_policy, train_rl2
from services.behaviour_service import (
    matrix_predictor_dataset,
    predict_sequences,
    skill_predictor_dataset,
    step_accuracy,
    train_matrix_bc_policy,
    train_matrix_predictor,
    train_skill_predictor,
    train_tsg_bc_policy,
)
from services.evaluation_service import PolicyBundle, evaluate, matrix_oracle_row, oracle_rows
from services.population_service import PopulationService
from services.ppo_service import read_stats_csv, write_stats_csv
from services.report_service import emit_report, read_results, write_predictor_accuracy, write_results
from services.rollout_service import MatrixEnvAdapter, TsgEnvAdapter
from storage import load_params, load_text, save_params, save_text

logger = logging.getLogger(__name__)

STAGE_DIR = "stages"


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(stage.encode("utf-8"))])


class StageRunner:
    """Runs named stages once per directory"""

    def __init__(self, directory: str):
        self.directory = directory

    def marker(self, name: str) -> str:
        return os.path.join(self.directory, STAGE_DIR, f"{name}.done")

    def is_done(self, name: str) -> bool:
        return os.path.exists(self.marker(name))

    def run(self, name: str, action: Callable[[], None]) -> bool:
        if self.is_done(name):
            logger.info("Stage %s in %s already complete, skipping", name, self.directory)
            return False
        logger.info("Stage %s in %s", name, self.directory)
        action()
        save_text("done\n", self.marker(name))
        return True


def generate_population(seed: int, config, out_dir: str) -> PopulationManifest:
    return PopulationService(config, seed, out_dir).generate()


def _alpha_tag(alpha: float) -> str:
    return f"a{alpha:g}"


# matrix game

def _matrix_seed_stages(config: ExperimentConfig, seed: int) -> None:
    directory = config.seed_dir(seed)
    stages = StageRunner(directory)
    hyper = config.matrix_hyper()
    predictor_config = PredictorConfig(
        iterations=config.matrix.predictor_iterations,
        batch_episodes=config.matrix.predictor_episodes,
        dataset_episodes=config.matrix.predictor_dataset,
        optim=config.optim,
    )
    for alpha in config.matrix.alphas:
        tag = _alpha_tag(alpha)
        cfg = config.matrix.matrix_config(alpha)

        def predictor_stage(alpha=alpha, tag=tag, cfg=cfg):
            rng = stage_rng(seed, f"predictor_{tag}")
            data = matrix_predictor_dataset(alpha, predictor_config.dataset_episodes, rng, cfg)
            params, _ = train_matrix_predictor(data, predictor_config, rng)
            save_params(params, os.path.join(directory, f"predictor_{tag}.bcpm"))

        def bc_stage(tag=tag, cfg=cfg):
            params, history = train_matrix_bc_policy(cfg, hyper, config.matrix.iterations, stage_rng(seed, f"bc_{tag}"), config.optim)
            save_params(params, os.path.join(directory, f"bc_{tag}.bcpm"))
            write_stats_csv(history, os.path.join(directory, f"stats_bc_{tag}.csv"))

        def rl2_stage(tag=tag, cfg=cfg):
            params, history = train_rl2(cfg, hyper, config.matrix.iterations, stage_rng(seed, f"rl2_{tag}"), config.optim)
            save_params(params, os.path.join(directory, f"rl2_{tag}.bcpm"))
            write_stats_csv(history, os.path.join(directory, f"stats_rl2_{tag}.csv"))

        stages.run(f"predictor_{tag}", predictor_stage)
        stages.run(f"bc_{tag}", bc_stage)
        if config.matrix.train_rl2:
            stages.run(f"rl2_{tag}", rl2_stage)

    def eval_stage():
        rows: List[EvalRow] = []
        rng = stage_rng(seed, "eval")
        for alpha in config.matrix.alphas:
            tag = _alpha_tag(alpha)
            env = MatrixEnvAdapter(config.matrix.matrix_config(alpha))
            partner = f"dist:{alpha:g}"
            bc = PolicyBundle(
                "bc", seed, matrix_conditioned_agent(), load_params(os.path.join(directory, f"bc_{tag}.bcpm")), env,
                Network(matrix_predictor_spec()), load_params(os.path.join(directory, f"predictor_{tag}.bcpm")),
            )
            rows += evaluate(bc, [partner], config.eval.episodes, rng)
            if config.matrix.train_rl2:
                rl2_env = MatrixEnvAdapter(config.matrix.matrix_config(alpha), observation="rl2")
                rl2 = PolicyBundle("rl2", seed, rl2_agent(), load_params(os.path.join(directory, f"rl2_{tag}.bcpm")), rl2_env)
                rows += evaluate(rl2, [partner], config.eval.episodes, rng)
        write_results(rows, os.path.join(directory, "results.csv"))

    stages.run("eval", eval_stage)


# gridworld

def _reference_dir(config: ExperimentConfig) -> str:
    return os.path.join(config.output_root, "reference_population")


def _tsg_seed_stages(config: ExperimentConfig, seed: int) -> None:
    directory = config.seed_dir(seed)
    population_dir = os.path.join(directory, "population")
    reference_dir = _reference_dir(config)
    stages = StageRunner(directory)
    schedule = config.tsg.population_config(config.tsg_hyper(), config.optim)
    net = config.tsg.net_config()
    predictor_config = PredictorConfig(
        iterations=config.tsg.predictor_iterations,
        batch_episodes=config.tsg.predictor_episodes,
        dataset_episodes=config.tsg.predictor_dataset,
        optim=config.optim,
    )

    def population_stage():
        generate_population(seed, schedule, population_dir)

    def predictor_stage():
        rng = stage_rng(seed, "predictor")
        data = skill_predictor_dataset(population_dir, predictor_config.dataset_episodes, rng)
        params, _ = train_skill_predictor(data, predictor_config, rng, net)
        save_params(params, os.path.join(directory, "predictor.bcpm"))
        held_out = skill_predictor_dataset(reference_dir, config.eval.episodes, rng)
        outputs = predict_sequences(Network(skill_predictor_spec(net)), params, held_out)
        rows = [("skill_predictor", seed, t, accuracy, n) for t, accuracy, n in step_accuracy(outputs, held_out)]
        write_predictor_accuracy(rows, os.path.join(directory, "predictor.csv"))

    def bc_stage():
        params, history = train_tsg_bc_policy(population_dir, schedule, stage_rng(seed, "bc"), directory)
        save_params(params, os.path.join(directory, "bc.bcpm"))
        write_stats_csv(history, os.path.join(directory, "stats_bc.csv"))

    def lstm_stage():
        params, history = train_lstm_policy(population_dir, schedule, stage_rng(seed, "lstm"), directory)
        save_params(params, os.path.join(directory, "lstm.bcpm"))
        write_stats_csv(history, os.path.join(directory, "stats_lstm.csv"))

    def eval_stage():
        rng = stage_rng(seed, "eval")
        env = TsgEnvAdapter(schedule.tsg, schedule.wave_size)
        partners = [level.value for level in SkillLevel]
        bc = PolicyBundle(
            "bc", seed, tsg_conditioned_agent(net), load_params(os.path.join(directory, "bc.bcpm")), env,
            Network(skill_predictor_spec(net)), load_params(os.path.join(directory, "predictor.bcpm")),
            population_seed=seed,
        )
        rows = evaluate(bc, partners, config.eval.episodes, rng, reference_dir)
        if config.tsg.train_lstm:
            lstm = PolicyBundle(
                "lstm", seed, tsg_lstm_agent(net), load_params(os.path.join(directory, "lstm.bcpm")), env,
                population_seed=seed,
            )
            rows += evaluate(lstm, partners, config.eval.episodes, rng, reference_dir)
        write_results(rows, os.path.join(directory, "results.csv"))

    stages.run("population", population_stage)
    stages.run("predictor", predictor_stage)
    stages.run("bc", bc_stage)
    if config.tsg.train_lstm:
        stages.run("lstm", lstm_stage)
    stages.run("eval", eval_stage)


# report

def _curves(config: ExperimentConfig) -> List[Tuple[str, int, str, list]]:
    curves = []
    for seed in config.seeds:
        directory = config.seed_dir(seed)
        if config.experiment.env == "matrix":
            for alpha in config.matrix.alphas:
                for name in ("bc", "rl2"):
                    path = os.path.join(directory, f"stats_{name}_{_alpha_tag(alpha)}.csv")
                    if os.path.exists(path):
                        curves.append((name, seed, f"dist:{alpha:g}", read_stats_csv(path)))
        else:
            for name, path in (
                ("population", os.path.join(directory, "population", "stats.csv")),
                ("bc", os.path.join(directory, "stats_bc.csv")),
                ("lstm", os.path.join(directory, "stats_lstm.csv")),
            ):
                if os.path.exists(path):
                    curves.append((name, seed, "train", read_stats_csv(path)))
    return curves


def _predictor_rows(config: ExperimentConfig) -> Optional[list]:
    rows = []
    for seed in config.seeds:
        path = os.path.join(config.seed_dir(seed), "predictor.csv")
        if os.path.exists(path):
            lines = load_text(path).splitlines()[1:]
            for line in lines:
                experiment, row_seed, t, accuracy, n = line.split(",")
                rows.append((experiment, int(row_seed), int(t), float(accuracy), int(n)))
    return rows or None


def _report(config: ExperimentConfig) -> None:
    rows: List[EvalRow] = []
    for seed in config.seeds:
        rows += read_results(os.path.join(config.seed_dir(seed), "results.csv"))
    rng = stage_rng(config.experiment.first_seed, "oracle")
    if config.experiment.env == "matrix":
        for alpha in config.matrix.alphas:
            rows.append(matrix_oracle_row(alpha, config.eval.oracle_layouts, rng, config.matrix.matrix_config(alpha)))
    else:
        rows += oracle_rows(config.eval.oracle_layouts, config.tsg.tsg_config(), rng)
    emit_report(rows, config.output_root, _curves(config), _predictor_rows(config), config.eval.std_ddof)


def run_experiment(config: ExperimentConfig) -> str:
    """Run or resume every stage; returns the directory holding the report"""
    root = StageRunner(config.output_root)
    logger.info("Experiment %s (%s) seeds %s -> %s", config.experiment.name, config.experiment.env,
                config.seeds, config.output_root)
    if config.experiment.env == "tsg":
        if config.tsg.reference_seed in config.seeds:
            raise ConfigurationError(
                f"Reference seed {config.tsg.reference_seed} is also a training seed", code="PARTNER_OVERLAP"
            )
        schedule = config.tsg.population_config(config.tsg_hyper(), config.optim)
        root.run("reference_population", lambda: generate_population(
            config.tsg.reference_seed, schedule, _reference_dir(config)))
    for seed in config.seeds:
        if config.experiment.env == "matrix":
            _matrix_seed_stages(config, seed)
        else:
            _tsg_seed_stages(config, seed)
    root.run("report", lambda: _report(config))
    return config.output_root
