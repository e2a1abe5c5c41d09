"""Online p-norm selection for LMP adaptive filters via kernel-based approximate policy iteration."""
from .dictionary import DELTA_ALD, Dictionary
from .harness import RunConfig, RunResult, emit_outputs, preset_config, run_api, run_experiment
from .kernel import KernelSpec
from .lmp import LmpConfig, lmp_update, one_step_loss, run_fixed_p_baseline
from .model import Scenario, State, StateAction
from .noise import NoiseSpec
from .policy import PolicyConfig

__all__ = [
    "DELTA_ALD",
    "Dictionary",
    "KernelSpec",
    "LmpConfig",
    "NoiseSpec",
    "PolicyConfig",
    "RunConfig",
    "RunResult",
    "Scenario",
    "State",
    "StateAction",
    "emit_outputs",
    "lmp_update",
    "one_step_loss",
    "preset_config",
    "run_api",
    "run_experiment",
    "run_fixed_p_baseline",
]
