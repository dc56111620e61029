"""Optimise one seeded instance and print the audit, rates and leakage.

    python3 scripts/optimize_instance.py --n-ris 64 --seed 0
"""
import argparse

import numpy as np

from nfcovert.channel import realize
from nfcovert.config import AOConfig, SystemConfig, watt_to_dbm
from nfcovert.optimizer import ao_joint, baseline_beamformers, complexity_from_trace
from nfcovert.rsma import rates


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-ris", type=int, default=64)
    p.add_argument("--m-bs", type=int, default=4)
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--p-max-dbm", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--trace", help="write the optimiser trace CSV here")
    args = p.parse_args()

    cfg = SystemConfig(n_ris=args.n_ris, m_bs=args.m_bs, n_users=args.users,
                       p_max_dbm=args.p_max_dbm)
    real = realize(cfg, args.seed)
    res = ao_joint(real, cfg, AOConfig(n_starts=args.starts))
    rep = rates(res.state, real.user_channels(res.state.theta), cfg.noise)
    print(f"R_sum      {res.r_sum:.4f} bit/s/Hz after {res.trace.n_outer} outer iterations")
    print(f"R_c        {np.round(rep.R_c, 4)}")
    print(f"R_p        {np.round(rep.R_p, 4)}")
    print(f"p_c        {np.round(res.state.p_c, 4)}")
    print(f"power      {watt_to_dbm(res.audit.power):.2f} dBm of {cfg.p_max_dbm} dBm")
    print(f"leakage    {res.audit.aleph:.3e} W (budget {res.audit.p_leak:.3e} W)")
    print(f"audit      {'ok' if res.feasible else ', '.join(res.violations)}")
    print(f"op count   {complexity_from_trace(res.trace, cfg.n_users, cfg.m_bs, cfg.n_ris):.3e}")

    base = baseline_beamformers(realize(cfg, args.seed, far_field=True), cfg)
    ff = realize(cfg, args.seed, far_field=True)
    print(f"FF base    {rates(base, ff.user_channels(base.theta), cfg.noise).R_total:.4f}")
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(res.trace.to_csv())


if __name__ == "__main__":
    main()
