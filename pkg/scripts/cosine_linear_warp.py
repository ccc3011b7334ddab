"""Cosine recall under linear warps: QRNN vs TWI-QRNN (known and learnt gates) vs LSTM, optionally the stochastic pair."""
from common import base_parser, plot_group, run_grid, wins


def main():
    p = base_parser(__doc__)
    p.add_argument("--rates", default="0.1,0.05")
    p.add_argument("--stochastic", action="store_true", help="also run SQRNN and TWI-SQRNN on the discretized task")
    p.add_argument("--no-lstm", action="store_true")
    args = p.parse_args()
    for a in args.rates.split(","):
        warp = f"linear:{a}"
        grid = [("cosine-remember", warp, "qrnn", "none"), ("cosine-remember", warp, "twi-qrnn", "known"),
                ("cosine-remember", warp, "twi-qrnn", "learnt")]
        if not args.no_lstm:
            grid.append(("cosine-remember", warp, "lstm", "none"))
        if args.stochastic:
            grid += [("cosine-remember", warp, "sqrnn", "none"), ("cosine-remember", warp, "twi-sqrnn", "known"),
                     ("cosine-remember", warp, "twi-sqrnn", "learnt")]
        finals = run_grid(args, grid)
        tags = list(finals)
        base = tags[0]
        for tag in tags[1:3]:
            print(f"  {tag} beats qrnn in {wins(finals, base, tag)}/{args.trials} trials")
        plot_group(args.out, [t for t in tags if "sqrnn" not in t], f"cosine_linear-{a}.svg", f"cosine recall, linear warp a={a}")
        if args.stochastic:
            sq = [t for t in tags if "sqrnn" in t]
            for tag in sq[1:]:
                print(f"  {tag} beats sqrnn in {wins(finals, sq[0], tag)}/{args.trials} trials")
            plot_group(args.out, sq, f"cosine_linear-{a}_stochastic.svg", f"discretized cosine, linear warp a={a}")


if __name__ == "__main__":
    main()
