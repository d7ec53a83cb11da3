"""Run the 20-seed NMF vs SNMF simulation study and print the comparison table.

    python scripts/repro_table.py --out results/ [--seeds 20] [--jobs 4]

Extra arguments are passed through to ``snmf repro-sim``.
"""

import sys

from snmf.cli import main

if __name__ == "__main__":
    sys.exit(main(["repro-sim", *sys.argv[1:]]))
