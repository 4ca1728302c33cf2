#!/usr/bin/env python3
"""
spikekit command line.

    python scripts/run_spikekit.py trace --neuron asn --inline 2.3,0.4,3.8
    python scripts/run_spikekit.py verify --config configs/asn_shifted.json
    python scripts/run_spikekit.py gradcheck --neuron nasn
    python scripts/run_spikekit.py train --config configs/ablation_shifted.json --seeds 10 --kinds ilif,asn,nilif,nasn
    python scripts/run_spikekit.py bench --config configs/bench.json
    python scripts/run_spikekit.py energy --checkpoint <run>/checkpoint_asn_seed0.spkf --zeros
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from spikekit.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
