"""Kinetic Monte Carlo for the reaction-diffusion lattice and its tilted versions."""
from .simulator import (BACKEND, BIRTH, DEATH, JUMP_LEFT, JUMP_RIGHT, EventLog, ParticleState,
                        SimParams, SimResult, WeightAccumulator, build_rates, initial_counts,
                        log_rn_weight_exact, replica_stream, simulate)
from .martingales import extract_dynkin_martingale, extract_quadratic_martingales
from .weights import log_rn_weight_from_events, log_rn_weight_taylor
from .eventlog import read_event_log, write_event_log

__all__ = [
    "BACKEND", "BIRTH", "DEATH", "JUMP_LEFT", "JUMP_RIGHT", "EventLog", "ParticleState",
    "SimParams", "SimResult", "WeightAccumulator", "build_rates", "initial_counts",
    "log_rn_weight_exact", "replica_stream", "simulate", "extract_dynkin_martingale",
    "extract_quadratic_martingales", "log_rn_weight_from_events", "log_rn_weight_taylor",
    "read_event_log", "write_event_log",
]
