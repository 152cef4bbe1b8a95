"""Write the UCI 8x8 digits as a headerless 65-column CSV (64 pixels, label).

Uses the copy bundled with scikit-learn when available, otherwise downloads
optdigits from the UCI repository.

    python scripts/fetch_digits.py data/digits.csv
"""

import gzip
import os
import sys
import urllib.request
from pathlib import Path

UCI_URLS = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/optdigits/optdigits.tra",
    "https://archive.ics.uci.edu/ml/machine-learning-databases/optdigits/optdigits.tes",
)


def bundled_rows():
    import sklearn

    path = Path(sklearn.__file__).parent / "datasets" / "data" / "digits.csv.gz"
    with gzip.open(path, "rt") as fh:
        return [",".join(str(int(float(v))) for v in line.strip().split(",")) for line in fh if line.strip()]


def downloaded_rows():
    rows = []
    for url in UCI_URLS:
        with urllib.request.urlopen(url, timeout=60) as resp:
            rows += [line.strip() for line in resp.read().decode().splitlines() if line.strip()]
    return rows


def main(argv):
    out = Path(argv[1] if len(argv) > 1 else "data/digits.csv")
    try:
        rows = bundled_rows()
    except (ImportError, OSError):
        rows = downloaded_rows()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_suffix(".tmp")
    tmp.write_text("\n".join(rows) + "\n", encoding="utf-8")
    os.replace(tmp, out)
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main(sys.argv)
