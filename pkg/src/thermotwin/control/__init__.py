"""Controllers behind one contract, plus the closed-loop runner."""

from .base import ConstantController, Controller, Decision, Observation
from .llm import (
    HistoryStore,
    HttpBackend,
    LlmController,
    LlmControllerConfig,
    LlmBackendError,
    LlmError,
    LlmParseError,
    LlmTimeoutError,
    MockBackend,
    Record,
    build_prompt,
    llm_step,
    parse_controls,
)
from .loop import TELEMETRY_COLUMNS, EpisodeResult, read_telemetry, run_closed_loop
from .mpc import MpcConfig, MpcController, MpcResult, affine_response, mpc_step, stage_cost
from .references import ReferenceProfile
from .rl import (
    ACTIONS,
    DivergenceError,
    DqnAgent,
    DqnController,
    PlantEnv,
    RewardWeights,
    RlConfig,
    TwinEnv,
    dqn_act,
    dqn_train,
    reward,
)

__all__ = [
    "ACTIONS", "ConstantController", "Controller", "Decision", "DivergenceError", "DqnAgent", "DqnController",
    "EpisodeResult", "HistoryStore", "HttpBackend", "LlmBackendError", "LlmController", "LlmControllerConfig",
    "LlmError", "LlmParseError", "LlmTimeoutError", "MockBackend", "MpcConfig", "MpcController", "MpcResult",
    "Observation", "PlantEnv", "Record", "ReferenceProfile", "RewardWeights", "RlConfig", "TELEMETRY_COLUMNS",
    "TwinEnv", "affine_response", "build_prompt", "dqn_act", "dqn_train", "llm_step", "mpc_step",
    "parse_controls", "read_telemetry", "reward", "run_closed_loop", "stage_cost",
]
