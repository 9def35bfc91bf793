"""
Travelling salesman gridworld: two agents collect subgoals with a shared reward,
then either agent collects the final goal.
"""
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from exceptions import ConfigurationError, UsageError
from schemas.env_schemas import TsgConfig

Cell = Tuple[int, int]

N_MOVES = 4
# up, down, left, right; y grows downwards
MOVES: Tuple[Cell, ...] = ((0, -1), (0, 1), (-1, 0), (1, 0))

OBJECT_TYPES = ("self", "partner", "subgoal", "final")
PAIR_WIDTH = 2 + 2 + len(OBJECT_TYPES) + 1 + 1

DEFAULT_CONFIG = TsgConfig()


@dataclass(frozen=True)
class TsgState:
    pos_a: Cell
    pos_b: Cell
    subgoal_pos: Tuple[Cell, ...]
    final_pos: Cell
    collected: Tuple[bool, ...]
    final_collected: bool = False
    t: int = 0

    def positions(self, agent: int) -> Tuple[Cell, Cell]:
        """(own, partner) positions as seen by agent 0 (A) or 1 (B)"""
        return (self.pos_a, self.pos_b) if agent == 0 else (self.pos_b, self.pos_a)

    def cells(self) -> List[Cell]:
        return [self.pos_a, self.pos_b, *self.subgoal_pos, self.final_pos]

    def is_done(self, cfg: TsgConfig = DEFAULT_CONFIG) -> bool:
        return self.final_collected or self.t >= cfg.max_steps

    def mirrored(self, cfg: TsgConfig = DEFAULT_CONFIG) -> "TsgState":
        """Reflect the layout across the vertical axis"""
        flip = lambda cell: (cfg.width - 1 - cell[0], cell[1])
        return replace(
            self,
            pos_a=flip(self.pos_a),
            pos_b=flip(self.pos_b),
            subgoal_pos=tuple(flip(cell) for cell in self.subgoal_pos),
            final_pos=flip(self.final_pos),
        )


def tsg_reset(cfg: TsgConfig, rng: np.random.Generator) -> TsgState:
    """Place both agents, the subgoals and the final goal on distinct uniform cells"""
    n_cells = cfg.width * cfg.height
    if n_cells < cfg.n_objects:
        raise ConfigurationError("Grid cannot host every object on a distinct cell", code="GRID_TOO_SMALL")
    chosen = rng.choice(n_cells, size=cfg.n_objects, replace=False)
    cells = [(int(index % cfg.width), int(index // cfg.width)) for index in chosen]
    return TsgState(
        pos_a=cells[0],
        pos_b=cells[1],
        subgoal_pos=tuple(cells[2:2 + cfg.n_subgoals]),
        final_pos=cells[-1],
        collected=(False,) * cfg.n_subgoals,
    )


def _move(cell: Cell, action: int, cfg: TsgConfig) -> Cell:
    if not 0 <= int(action) < N_MOVES:
        raise ConfigurationError(f"Move {action} is outside 0..{N_MOVES - 1}", code="INVALID_ACTION")
    dx, dy = MOVES[int(action)]
    return (min(max(cell[0] + dx, 0), cfg.width - 1), min(max(cell[1] + dy, 0), cfg.height - 1))


def tsg_step(state: TsgState, action_a: int, action_b: int, cfg: TsgConfig = DEFAULT_CONFIG) -> Tuple[TsgState, float, bool]:
    """Move both agents at once, then resolve pickups; the final goal needs every subgoal"""
    if state.is_done(cfg):
        raise UsageError("Episode already finished", code="EPISODE_DONE", details={"t": state.t})
    pos_a = _move(state.pos_a, action_a, cfg)
    pos_b = _move(state.pos_b, action_b, cfg)

    reward = cfg.step_reward
    collected = list(state.collected)
    for index, cell in enumerate(state.subgoal_pos):
        if not collected[index] and (pos_a == cell or pos_b == cell):
            collected[index] = True
            reward += cfg.goal_reward

    final_collected = state.final_collected
    if all(collected) and not final_collected and state.final_pos in (pos_a, pos_b):
        final_collected = True
        reward += cfg.goal_reward

    next_state = replace(
        state,
        pos_a=pos_a,
        pos_b=pos_b,
        collected=tuple(collected),
        final_collected=final_collected,
        t=state.t + 1,
    )
    return next_state, reward, next_state.is_done(cfg)


def encode_pairs(state: TsgState, observer: int = 0, cfg: TsgConfig = DEFAULT_CONFIG) -> np.ndarray:
    """
    Agent-object pair vectors from the observer's perspective, shape (2 * (n_subgoals + 2), PAIR_WIDTH).
    Each row: agent xy, object xy, object type one-hot (self/partner/subgoal/final),
    collected flag, and 1.0 when the row's agent is the observer.
    """
    own, partner = state.positions(observer)
    scale = np.array([max(cfg.width - 1, 1), max(cfg.height - 1, 1)], dtype=np.float64)
    goals = [(cell, 2, float(flag)) for cell, flag in zip(state.subgoal_pos, state.collected)]
    goals.append((state.final_pos, 3, float(state.final_collected)))

    rows = []
    for agent, other_agent, other_type, is_observer in ((own, partner, 1, 1.0), (partner, own, 0, 0.0)):
        for cell, kind, flag in [(other_agent, other_type, 0.0), *goals]:
            row = np.zeros(PAIR_WIDTH)
            row[0:2] = np.asarray(agent) / scale
            row[2:4] = np.asarray(cell) / scale
            row[4 + kind] = 1.0
            row[8] = flag
            row[9] = is_observer
            rows.append(row)
    return np.stack(rows)


def encode_pairs_batch(states: Sequence[TsgState], observer: int = 0, cfg: TsgConfig = DEFAULT_CONFIG) -> np.ndarray:
    return np.stack([encode_pairs(state, observer, cfg) for state in states])


def episode_return(n_pickups: int, length: int, cfg: TsgConfig = DEFAULT_CONFIG) -> float:
    """Return of an episode from its pickup count and length"""
    return n_pickups * cfg.goal_reward + length * cfg.step_reward
