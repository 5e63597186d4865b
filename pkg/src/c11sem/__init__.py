"""Executable operational semantics for C11 concurrency: histories,
viewfronts and per-thread operation buffers, with an exhaustive explorer,
a seeded random runner, a litmus corpus and an RCU case study."""

from .explorer import ExplorationResult, Trace, TraceStep, canonicalize, explore, witness_trace
from .front import Front
from .lang import NULL, Loc
from .litmus import LitmusTest, check_test, load_suite
from .parser import ParseError, SourceProgram, parse
from .printer import print_stmt
from .random_runner import RunReport, TransitionCache, random_run, replay
from .rcu import RcuVariant, build_rcu, campaign, check_rcu_invariants
from .semantics import Config, initial_config, step
from .state import AspectConfig, MachineState

__all__ = [
    "NULL", "AspectConfig", "Config", "ExplorationResult", "Front", "LitmusTest", "Loc", "MachineState",
    "ParseError", "RcuVariant", "RunReport", "SourceProgram", "Trace", "TraceStep", "TransitionCache",
    "build_rcu", "campaign", "canonicalize", "check_rcu_invariants", "check_test", "explore",
    "initial_config", "load_suite", "parse", "print_stmt", "random_run", "replay", "step", "witness_trace",
]
