#!/usr/bin/env python3
"""Time the synthetic generator at full scale and sanity-check its counts."""
import argparse
import sys
import time

from timetrail.simulate import ScenarioConfig, describe, generate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=1_750_000)
    parser.add_argument("--fraud-rate", type=float, default=0.001345)
    parser.add_argument("--users", type=int, default=20_000)
    parser.add_argument("--terminals", type=int, default=600)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = ScenarioConfig(
        n_users=args.users,
        n_terminals=args.terminals,
        target_rows=args.rows,
        fraud_rate=args.fraud_rate,
        seed=args.seed,
    )
    t0 = time.monotonic()
    data = generate(cfg)
    elapsed = time.monotonic() - t0

    doc = describe(data)
    print(f"rows:        {doc['rows']:,}")
    print(f"fraud rows:  {doc['fraud_count']:,} (rate {doc['fraud_rate']:.6f})")
    for name, count in doc["per_scenario"].items():
        print(f"  {name:<20} {count:,}")
    print(f"generated in {elapsed:.1f}s ({doc['rows'] / elapsed:,.0f} rows/s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
