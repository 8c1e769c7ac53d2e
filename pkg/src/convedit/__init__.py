"""Multimodal dialogue system for conversational image editing.

A POMDP-style dialogue manager over an image-edit engine: a belief tracker
fuses noisy speech with exact gestures, and either a threshold rule policy
or a small Q-network picks one system action per turn. The package bundles
the user simulator and error channel used for training and evaluation, a
scripted scene dataset with a toy vision backend, an HTTP service for live
sessions, and the CLI.
"""

from .engine import ExecResult, ImageEditEngine, apply_adjust
from .harness import (
    EpisodeRecord,
    EvalSummary,
    RunConfig,
    default_setup,
    evaluate,
    reward_shaped,
    reward_terminal,
    run_dialogue,
    ser_sweep,
    sweep_csv,
    train_dqn,
    trained_policy,
)
from .ontology import Ontology, SemanticFrame, SystemAction, default_ontology
from .policy import DQNPolicy, load_checkpoint, rule_action, save_checkpoint
from .raster import Mask, Raster
from .simulator import ErrorChannel, UserGoal, UserSimulator, sample_goals
from .tracker import BeliefState, parse_utterance
from .vision import Dataset, SceneSpec, generate_dataset, load_dataset, query, save_dataset

__all__ = [
    "BeliefState",
    "Dataset",
    "DQNPolicy",
    "EpisodeRecord",
    "ErrorChannel",
    "EvalSummary",
    "ExecResult",
    "ImageEditEngine",
    "Mask",
    "Ontology",
    "Raster",
    "RunConfig",
    "SceneSpec",
    "SemanticFrame",
    "SystemAction",
    "UserGoal",
    "UserSimulator",
    "apply_adjust",
    "default_ontology",
    "default_setup",
    "evaluate",
    "generate_dataset",
    "load_checkpoint",
    "load_dataset",
    "parse_utterance",
    "query",
    "reward_shaped",
    "reward_terminal",
    "rule_action",
    "run_dialogue",
    "sample_goals",
    "save_checkpoint",
    "save_dataset",
    "ser_sweep",
    "sweep_csv",
    "train_dqn",
    "trained_policy",
]
