"""Optimal observation selection and conditional planning on discrete chains."""

from .costs import CostModel
from .errors import (EnumerationCapError, FormatVersionError, SchemaError,
                     StateDependentCostError, VoidpError, ZeroEvidenceError)
from .model import (ChainModel, Evidence, HmmModel, Marginal, MaxMarginal, Mode,
                    condition_chain, fold_hmm, max_marginal, pairwise_posterior,
                    posterior_marginal, sample, validate_hmm, validate_model)
from .multi import (MultiChainModel, MultiSchedule, ProductCoupling,
                    SamplerCoupling, cross_chain_expected_reward, flatten_joint,
                    lower_bound_objective, recent_observation_filter,
                    schedule_multi)
from .oracles import (ExplicitJoint, greedy_subset, joint_from_chain,
                      label_vote_star, oracle_best_plan, oracle_best_subset,
                      oracle_total_reward, uniform_spacing)
from .plan import (CallbackSource, EpisodeRecord, PlanExecution, PlanTables,
                   RecordedSource, SampledSource, build_plan, execute_plan,
                   plan_value, realized_reward)
from .rewards import (DecisionVoi, Expectation, Hotspot, JointEntropy, Margin,
                      ResidualEntropy, RewardSpec, WeightedVariance,
                      concrete_local_reward, expected_local_reward, local_reward,
                      point_reward, self_expected_reward, total_objective)
from .subset import SubsetResult, select_subset

__version__ = "0.1.0"
