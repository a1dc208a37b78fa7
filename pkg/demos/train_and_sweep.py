"""Train a power-allocation agent briefly, then compare it against the fixed rules.

The default 1000 episodes take about a minute on one core. The outcome depends
on the seed: seed 0 settles near rho1 = 0.08 (J close to 1), while some seeds
stay near rho1 = 0.25 with J around 0.97.

Run: python3 demos/train_and_sweep.py [episodes] [seed]
"""

import dataclasses
import sys

from nomacsk import harness

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
cfg = harness.ExperimentConfig(r_step=0.1, trials=5, seed=seed)
cfg = dataclasses.replace(cfg, agent=dataclasses.replace(cfg.agent, max_episodes=episodes))

run = harness.run_train(cfg)
last = run.history[-1]
print(f"trained {len(run.history)} episodes, rolling average return {last.rolling_avg_return:.1f}")

_, means = harness.run_sweep_r(cfg, run.agent)
print(f"{'r':>5} " + " ".join(f"{p:>17}" for p in cfg.policies))
print(f"{'':>5} " + " ".join(f"{'Mbps     J':>17}" for _ in cfg.policies))
by = {(m["r"], m["policy"]): m for m in means}
for r in cfg.r_grid:
    cells = [by[(float(r), p)] for p in cfg.policies]
    print(f"{r:5.2f} " + " ".join(f"{c['sum_rate'] / 1e6:10.1f} {c['J']:6.3f}" for c in cells))
