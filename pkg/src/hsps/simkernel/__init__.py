"""Event-skipping Monte Carlo of the heralding chain: SSPD herald, gated APD1, APD1-gated APD2."""

from .backend import DEFAULT as BACKEND
from .engine import (
    CountingTotals, ScenarioError, SimScenario, SimulationInvariantError, block_rng, kernel_params, run,
    with_mu,
)
from .ops import (
    ClickRecord, ClickTrain, detect, sample_pulse, sample_pulses, skip_to_next_event, tac_gate, transport,
)

__all__ = [
    "BACKEND", "ClickRecord", "ClickTrain", "CountingTotals", "ScenarioError", "SimScenario",
    "SimulationInvariantError", "block_rng", "detect", "kernel_params", "run", "sample_pulse",
    "sample_pulses", "skip_to_next_event", "tac_gate", "transport", "with_mu",
]
