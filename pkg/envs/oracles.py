"""
Exhaustive planners for the gridworld on an open grid with Manhattan distances.
"""
from itertools import permutations
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from envs.tsg import Cell, TsgState, episode_return, tsg_reset
from exceptions import UsageError
from schemas.env_schemas import TsgConfig


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _best_tours(start: Cell, goals: Sequence[Cell], final: Cell) -> Tuple[int, int]:
    """
    (earliest time every goal is visited, earliest arrival at the final goal after
    visiting every goal) over all visiting orders. Empty goal sets start at time 0.
    """
    if not goals:
        return 0, manhattan(start, final)
    best_done = best_final = None
    for order in permutations(goals):
        elapsed, cell = 0, start
        for goal in order:
            elapsed += manhattan(cell, goal)
            cell = goal
        finish = elapsed + manhattan(cell, final)
        best_done = elapsed if best_done is None else min(best_done, elapsed)
        best_final = finish if best_final is None else min(best_final, finish)
    return best_done, best_final


def _check_fresh(state: TsgState) -> None:
    if state.t != 0 or any(state.collected) or state.final_collected:
        raise UsageError("Planner needs a fresh layout", code="LAYOUT_NOT_FRESH")


def joint_optimal_plan(state: TsgState) -> int:
    """
    Fewest simultaneous steps until the final pickup, over every split of the
    subgoals between the agents, every visiting order and either finisher.
    The final pickup cannot precede the last subgoal pickup.
    """
    _check_fresh(state)
    subgoals = list(state.subgoal_pos)
    best = None
    for mask in range(1 << len(subgoals)):
        share_a = [cell for index, cell in enumerate(subgoals) if mask >> index & 1]
        share_b = [cell for index, cell in enumerate(subgoals) if not mask >> index & 1]
        done_a, final_a = _best_tours(state.pos_a, share_a, state.final_pos)
        done_b, final_b = _best_tours(state.pos_b, share_b, state.final_pos)
        last_subgoal = max(done_a, done_b)
        length = min(max(final_a, last_subgoal), max(final_b, last_subgoal))
        best = length if best is None else min(best, length)
    return int(best)


def solo_optimal_plan(state: TsgState, agent: int = 0) -> int:
    """Fewest steps when the designated agent collects everything alone"""
    _check_fresh(state)
    start = state.pos_a if agent == 0 else state.pos_b
    return int(_best_tours(start, list(state.subgoal_pos), state.final_pos)[1])


def monte_carlo_optimal(n_layouts: int, cfg: TsgConfig, rng: np.random.Generator) -> Dict[str, List[int]]:
    """Joint and solo optimal lengths over random layouts"""
    joint, solo = [], []
    for _ in range(n_layouts):
        state = tsg_reset(cfg, rng)
        joint.append(joint_optimal_plan(state))
        solo.append(solo_optimal_plan(state))
    return {"joint": joint, "solo": solo}


def optimal_return(length: float, cfg: TsgConfig) -> float:
    """Return of a plan that collects every goal in `length` steps"""
    return episode_return(cfg.n_subgoals + 1, length, cfg)


def format_layout_line(state: TsgState, joint: int, solo: int) -> str:
    """ax,ay;bx,by;s1..s4;fx,fy → joint,solo"""
    cells = ";".join(f"{x},{y}" for x, y in state.cells())
    return f"{cells} → {joint},{solo}"


def parse_layout_line(line: str) -> Tuple[TsgState, int, int]:
    separator = "→" if "→" in line else "->"
    layout, lengths = (part.strip() for part in line.split(separator))
    cells = [tuple(int(v) for v in cell.split(",")) for cell in layout.split(";")]
    joint, solo = (int(v) for v in lengths.split(","))
    state = TsgState(
        pos_a=cells[0],
        pos_b=cells[1],
        subgoal_pos=tuple(cells[2:-1]),
        final_pos=cells[-1],
        collected=(False,) * (len(cells) - 3),
    )
    return state, joint, solo


def write_layout_dump(lines: Iterable[str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in lines:
            handle.write(line + "\n")
