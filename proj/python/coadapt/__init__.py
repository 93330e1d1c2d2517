"""Quadratic human-AI games: equilibria, co-adaptation dynamics and analysis.

Thin wrapper over the compiled ``_coadapt`` extension. Functions returning
JSON text in C++ return parsed Python objects here.
"""

import json as _json

from . import _coadapt
from ._coadapt import (
    ConditionReport,
    DimensionError,
    GameParams,
    JointAction,
    SimConfig,
    SolverError,
    ai_step,
    analyze_csv,
    best_response_M,
    calibrate_offsets,
    check_differential_nash,
    check_differential_stackelberg,
    cost_H,
    cost_M,
    estimate_gradient_bias,
    grad_H,
    grad_M,
    load_game,
    random_game,
    simulate_simultaneous_gd,
    simulate_zeroth_order,
    solve_nash,
    solve_stackelberg_human_led,
    validate,
)


def build_session(version, mode, seed, key, game):
    """Session plan as a dict; see the server's /api/session."""
    return _json.loads(_coadapt.build_session(version, mode, seed, key, game))


def game_to_dict(game, name=""):
    return _json.loads(game.to_json(name))


__all__ = [n for n in dir() if not n.startswith("_")]
