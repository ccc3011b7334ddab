"""Learnt gate probabilities next to the known warp derivative, with Pearson correlations over the evaluation window."""
import numpy as np

from common import base_parser, run_grid
from twiqrnn.experiment import ExperimentConfig, export_alpha, read_csv


def traces(args, task, warp, extra):
    cfg = ExperimentConfig(task=task, warp=warp, model="twi-qrnn", gate_mode="learnt", trials=args.trials,
                           max_evals=args.max_evals, rounds=args.rounds, out_dir=args.out, **extra)
    known, learnt = [], []
    for path in export_alpha(cfg):
        print(f"wrote {path}")
        _, rows = read_csv(path)
        known.append([float(r["known_dcdt"]) for r in rows[cfg.train_len:]])
        learnt.append([float(r["learnt_alpha"]) for r in rows[cfg.train_len:]])
    return np.array(known), np.array(learnt)


def r(a, b):
    return float("nan") if np.ptp(a) == 0 or np.ptp(b) == 0 else float(np.corrcoef(a, b)[0, 1])


def main():
    p = base_parser(__doc__)
    p.add_argument("--observable", default="Z", choices=["X", "Y", "Z"])
    args = p.parse_args()
    spin = {"spin_observable": args.observable}
    run_grid(args, [("cosine-remember", "linear:0.1", "twi-qrnn", "learnt"), ("cosine-remember", "linear:0.05", "twi-qrnn", "learnt"),
                    ("spin-predict", "sqrt", "twi-qrnn", "learnt", spin)])
    # one linear rate has a constant derivative, so the two rates are pooled
    lin = [traces(args, "cosine-remember", w, {}) for w in ("linear:0.1", "linear:0.05")]
    k = np.concatenate([a[0] for a, _ in lin])
    l = np.concatenate([b.mean(axis=0) for _, b in lin])
    print(f"linear (pooled rates): r = {r(k, l):.3f}")
    k, l = traces(args, "spin-predict", "sqrt", spin)
    print(f"sqrt: r = {r(k[0], l.mean(axis=0)):.3f}, learnt spread {np.ptp(l):.3g}")


if __name__ == "__main__":
    main()
