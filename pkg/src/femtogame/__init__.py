"""Game-theoretic channel and power allocation for multiple femtocells."""
from .model import (DATA, NONE, VOICE, JointStrategy, PureStrategy, Scenario, ScenarioError,
                    alpha, channel_rate, normalized_cost, penalty_cost, potential, squared_cost,
                    user_rate, voice_data_surplus, voice_gated_alpha, voice_penalty_cost)
from .strategy import (BudgetExceeded, StrategySpace, build_grid, enumerate_space, enumerate_spaces,
                       index_to_strategy, strategy_to_index)

__version__ = "0.1.0"
