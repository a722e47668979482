"""Run the three spin-example sweeps and render them.

    python scripts/reproduce_figures.py --out results
"""

import argparse
import subprocess
import sys
from pathlib import Path

from qsl.runner import emit_plot_script, load_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results")
    parser.add_argument("--no-render", action="store_true", help="write CSVs and the plot script only")
    args = parser.parse_args()

    for name in ("fig1", "fig2", "fig3"):
        result, _ = run(load_config(CONFIGS / f"{name}.toml"), out_dir=args.out)
        (Path(args.out) / "manifest.txt").rename(Path(args.out) / f"manifest_{name}.txt")
        print(name, {k: v for k, v in result.summary.items() if k != "rows"})
    script = emit_plot_script(args.out)
    if not args.no_render:
        subprocess.run([sys.executable, str(script)], check=True)
        print("figures written to", args.out)


if __name__ == "__main__":
    main()
