#!/usr/bin/env python3
"""Stream a few samples from a running feed server.

    python examples/stream_samples.py 127.0.0.1:9000 --epoch 0 --count 4
"""

import argparse

import tumorcp_client


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("endpoint", help="host:port or unix socket path")
    ap.add_argument("--epoch", type=int, default=0)
    ap.add_argument("--count", type=int, default=4)
    args = ap.parse_args()

    with tumorcp_client.connect(args.endpoint) as session:
        print(f"connected; dataset has {session.dataset_size} cases")
        for i, (intensities, labels, record) in enumerate(
            session.iter_epoch(args.epoch, args.count)
        ):
            tumor_voxels = int((labels == 2).sum())
            print(
                f"sample {i}: case={record['target_case']} dims={intensities.shape} "
                f"applied={record['applied']} tumor_voxels={tumor_voxels}"
            )


if __name__ == "__main__":
    main()
