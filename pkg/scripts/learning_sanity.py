"""Tabular Expected SARSA on the toy environments, checked against exact dynamic programming.

    python scripts/learning_sanity.py [--steps 500000]
"""

import argparse
import time

import numpy as np

from tdprop_lab.agent import (
    GridWorld,
    SarsaConfig,
    TabularQ,
    WindyChain,
    evaluate_policy,
    optimal_average_return,
    policy_probs,
    train,
)
from tdprop_lab.agent.sarsa import nonterminal_states
from tdprop_lab.optim import Hyperparams

# one hand-picked working setting per optimizer
GRID_SETTINGS = {
    "sgd": Hyperparams(alpha=0.5),
    "adam": Hyperparams(alpha=5e-3, beta2=0.5, epsilon=1e-3),
    "tdprop": Hyperparams(alpha=5e-3, beta2=0.5, epsilon=1e-3),
}


def chain_check(steps, seed):
    env = WindyChain(5)
    cfg = SarsaConfig(total_steps=steps, epsilon_greedy=0.2, hp=Hyperparams(alpha=0.1), seed=seed)
    res = train(env, TabularQ(env.n_states, env.n_actions), cfg)
    q = res.theta.reshape(env.n_states, env.n_actions)
    exact = evaluate_policy(env, policy_probs(q, cfg.epsilon_greedy), cfg.gamma)
    idx = nonterminal_states(env)
    return float(np.max(np.abs(q[idx] - exact[idx])))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=500_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    print(f"chain: max |Q - Q_pi| over non-terminal states = {chain_check(200_000, args.seed):.4f}")

    env = GridWorld()
    best = optimal_average_return(env, 0.01)
    print(f"gridworld: best epsilon-greedy return {best:.4f}")
    for kind, hp in GRID_SETTINGS.items():
        cfg = SarsaConfig(total_steps=args.steps, optimizer=kind, hp=hp, seed=args.seed)
        res = train(env, TabularQ(env.n_states, env.n_actions), cfg)
        last = res.asymptotic_return()
        print(f"  {kind:7s} last-100 return {last:.4f}  ({last / best:.1%} of optimum)"
              f"  average {res.avg_return:.4f}")
    print(f"done in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
