"""
Summarize training runs written by `run_spikekit.py train`.

    python analysis/summarize_runs.py validation/results/ablation_shifted
"""
import re
import sys
from pathlib import Path

import pandas as pd

CURVE_PATTERN = re.compile(r"curve_(?P<kind>[a-z]+)_seed(?P<seed>\d+)\.csv$")


def load_curves(run_dir):
    """All curve CSVs in a run directory, stacked with kind/seed columns."""
    frames = []
    for path in sorted(Path(run_dir).glob("curve_*.csv")):
        match = CURVE_PATTERN.search(path.name)
        if not match:
            continue
        df = pd.read_csv(path)
        df["kind"] = match["kind"]
        df["seed"] = int(match["seed"])
        frames.append(df)
    if not frames:
        return pd.DataFrame()
    return pd.concat(frames, ignore_index=True)


def final_epoch_table(curves):
    """Last epoch of every run, then mean / std / stderr of train accuracy per kind."""
    last = curves.sort_values("epoch").groupby(["kind", "seed"]).tail(1)
    table = last.groupby("kind")["train_acc"].agg(["count", "mean", "std"])
    table["stderr"] = table["std"] / table["count"] ** 0.5
    return table


def alpha_drift(curves, layer=1):
    """Change of alpha_l{layer} between the first and last logged epoch of each run."""
    column = f"alpha_l{layer}"
    if column not in curves or curves[column].isna().all():
        return pd.DataFrame()
    ordered = curves.dropna(subset=[column]).sort_values("epoch").groupby(["kind", "seed"])[column]
    return (ordered.last() - ordered.first()).rename("alpha_change").reset_index()


def plot_curves(curves, out_dir):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    fig, axes = plt.subplots(1, 2, figsize=(12, 5))
    for kind, group in curves.groupby("kind"):
        mean_curve = group.groupby("epoch")[["loss", "train_acc"]].mean()
        axes[0].plot(mean_curve.index, mean_curve["loss"], label=kind)
        axes[1].plot(mean_curve.index, mean_curve["train_acc"], label=kind)
    axes[0].set_title("Training loss (mean over seeds)")
    axes[1].set_title("Training accuracy (mean over seeds)")
    for ax in axes:
        ax.set_xlabel("Epoch")
        ax.legend()
    plt.tight_layout()
    curve_png = out_dir / "curves.png"
    plt.savefig(curve_png)
    plt.close(fig)

    written = [curve_png]
    if "alpha_l1" in curves and not curves["alpha_l1"].isna().all():
        fig = plt.figure(figsize=(10, 6))
        for (kind, seed), group in curves.dropna(subset=["alpha_l1"]).groupby(["kind", "seed"]):
            plt.plot(group["epoch"], group["alpha_l1"], alpha=0.6, label=f"{kind} seed {seed}")
        plt.title("Layer-1 alpha trajectory")
        plt.xlabel("Epoch")
        plt.ylabel("alpha")
        plt.tight_layout()
        alpha_png = out_dir / "alpha_l1.png"
        plt.savefig(alpha_png)
        plt.close(fig)
        written.append(alpha_png)
    return written


def main(run_dir):
    curves = load_curves(run_dir)
    if curves.empty:
        print(f"❌ No curve_*.csv files in {run_dir}")
        return 1

    print("=== Runs ===\n")
    print(curves.groupby("kind")["seed"].nunique().rename("seeds"))

    print("\n=== Final Training Accuracy ===")
    print(final_epoch_table(curves))

    drift = alpha_drift(curves)
    if not drift.empty:
        print("\n=== Layer-1 Alpha Change ===")
        print(drift.groupby("kind")["alpha_change"].describe())
        print("\nRuns with alpha moving up:")
        print(drift.assign(up=drift["alpha_change"] > 0).groupby("kind")["up"].sum())

    for path in plot_curves(curves, run_dir):
        print(f"\n✓ Saved {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else "validation/results"))
