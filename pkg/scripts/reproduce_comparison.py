"""Standard vs multipurpose secondary control on the bundled ten-bus network.

Runs both strategies at the default 50 ms horizon and at the 250 ms horizon,
writes CSV and SVG output for each, and prints the steady-state metrics.

    python3 scripts/reproduce_comparison.py --out out/comparison
"""
import argparse
from pathlib import Path

from adhocgrid.cli import cmd_compare
from adhocgrid.scenario import parse_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/comparison")
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()

    print(f"{'scenario':<18}{'strategy':<14}{'sharing_error':>15}{'|v_bar-v_ref| (V)':>20}{'settled (s)':>13}")
    for name in ("paper_fig3", "paper_fig3_long"):
        sc = parse_scenario(name)
        _, rep = cmd_compare(sc, Path(args.out) / name, plots=not args.no_plots)
        for strategy, entry in rep["strategies"].items():
            m = entry["metrics"]
            settle = entry["voltage_settle_time_s"]
            print(f"{name:<18}{strategy:<14}{m['sharing_error']:>15.3e}{m['voltage_error']:>20.4f}"
                  f"{'never' if settle is None else f'{settle:.4f}':>13}")


if __name__ == "__main__":
    main()
