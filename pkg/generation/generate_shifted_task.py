"""Generate the shifted synthetic classification task used by the ablation configs."""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from spikekit.data import export_csv, gen_shifted_task, truncation_fraction, write_idx  # noqa: E402

# Configuration
SEED = 0
SAMPLES = 512
FEATURES = 16
CLASSES = 4
NOISE = 0.25
D = 4
SHIFTS = [-6.0, -3.0, 0.0, 3.0, 6.0]
OUTPUT_DIR = Path("datasets/shifted")


def write_idx_copy(dataset, out_dir, stem):
    """IDX stores uint8 pixels: map [min, max] onto [0, 255] and record the mapping."""
    lo, hi = float(dataset.inputs.min()), float(dataset.inputs.max())
    pixels = np.round((dataset.inputs - lo) / (hi - lo) * 255.0).astype(np.uint8)
    images = pixels.reshape(dataset.samples, 1, dataset.features)
    images_path = out_dir / f"{stem}-images-idx3-ubyte"
    labels_path = out_dir / f"{stem}-labels-idx1-ubyte"
    write_idx(images, dataset.labels.astype(np.uint8), images_path, labels_path)
    return {"images": str(images_path), "labels": str(labels_path), "value_min": lo, "value_max": hi}


def main(shifts=SHIFTS, with_idx=False):
    print("=" * 60)
    print("GENERATING SHIFTED SYNTHETIC TASK")
    print("=" * 60)
    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)

    stats = {
        "seed": SEED,
        "samples": SAMPLES,
        "features": FEATURES,
        "classes": CLASSES,
        "noise": NOISE,
        "d": D,
        "datasets": [],
    }
    for shift in shifts:
        ds = gen_shifted_task(SEED, SAMPLES, FEATURES, CLASSES, shift, NOISE)
        stem = f"shifted_{shift:+g}"
        csv_path = OUTPUT_DIR / f"{stem}.csv"
        export_csv(ds, csv_path)
        frac = truncation_fraction(ds, D)
        entry = {
            "shift": shift,
            "csv": str(csv_path),
            "truncation_fraction": frac,
            "class_counts": np.bincount(ds.labels, minlength=CLASSES).tolist(),
        }
        if with_idx:
            entry["idx"] = write_idx_copy(ds, OUTPUT_DIR, stem)
        stats["datasets"].append(entry)
        print(f"  ✓ shift {shift:+g}: {SAMPLES} samples, {frac:.1%} of pre-activations outside [0, {D}]")

    stats_path = OUTPUT_DIR / "generation_stats.json"
    with open(stats_path, "w", encoding="utf-8") as f:
        json.dump(stats, f, indent=2)

    print(f"\n✅ SUCCESS! Saved {len(shifts)} datasets to {OUTPUT_DIR}")
    print(f"📊 Statistics: {stats_path}")
    print("\nNext step: python scripts/run_spikekit.py train --config configs/ablation_shifted.json --seeds 10 --kinds ilif,asn,nilif,nasn")


if __name__ == "__main__":
    with_idx = "--idx" in sys.argv
    args = [a for a in sys.argv[1:] if a != "--idx"]
    main(shifts=[float(a) for a in args] or SHIFTS, with_idx=with_idx)
