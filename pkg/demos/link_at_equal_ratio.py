"""Compare fixed-rule allocations on one channel pair.

Run: python3 demos/link_at_equal_ratio.py [r]
"""

import sys

import numpy as np

from nomacsk.channel import ChannelPair
from nomacsk.harness import evaluate_policy
from nomacsk.link import LinkConfig, evaluate_link

r = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
pair = ChannelPair.from_ratio(3.132e-4, r)
cfg = LinkConfig(snr_db=10.0)

print(f"h1 = {pair.h1:.4e}, h2 = {pair.h2:.4e}, SNR = {cfg.snr_db} dB")
print(f"{'policy':>8} {'rho1':>7} {'T1 Mbps':>8} {'T2 Mbps':>8} {'J':>7} {'BER1':>9} {'BER2':>9}")
for k, policy in enumerate(("grpa", "ngdpa", "tdma")):
    row = evaluate_policy(policy, pair, cfg, np.random.default_rng(k), cfg.mc_symbols)
    print(f"{policy:>8} {row['rho']:7.4f} {row['T1'] / 1e6:8.2f} {row['T2'] / 1e6:8.2f} "
          f"{row['J']:7.4f} {row['BER1']:9.2e} {row['BER2']:9.2e}")

# sweep rho by hand to see where fairness breaks down
print("\nrho1 sweep")
for rho in (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5):
    rep = evaluate_link(pair, rho, cfg, np.random.default_rng(99), 20_000)
    print(f"  rho1 = {rho:4.2f}  sum = {rep.sum_rate / 1e6:7.2f} Mbps  J = {rep.jain:.4f}")
