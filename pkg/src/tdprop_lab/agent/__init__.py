from .envs import GridWorld, WindyChain, make_env
from .qfunc import LinearQ, MlpQ, TabularQ, make_q, mlp_value_and_grad
from .sarsa import (
    ActorStreams,
    SarsaConfig,
    TrainResult,
    epsilon_soft_policy_iteration,
    evaluate_policy,
    expected_q,
    optimal_average_return,
    policy_probs,
    rollout_and_errors,
    train,
    write_curve_csv,
)
