"""
Export the GBSG2 breast-cancer table to CSV
===========================================

The German Breast Cancer Study Group 2 data (686 patients, 8 covariates,
about 56% censored) is distributed as an ARFF file, for example inside the
scikit-survival source tree at ``sksurv/datasets/data/GBSG2.arff``. This
script converts it to the plain CSV layout read by ``fpboost``::

    python demos/export_gbsg2.py path/to/GBSG2.arff gbsg2.csv

Nominal attributes are written as their level names, the event indicator
``cens`` as 0/1. Rows keep the file order.
"""
import argparse
import csv

from scipy.io import arff


def export(src, dst):
    data, meta = arff.loadarff(src)
    names = meta.names()
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(names)
        for row in data:
            cells = []
            for name, value in zip(names, row):
                if meta[name][0] == "nominal":
                    value = value.decode()  # ARFF nominals come back as bytes
                cells.append(value if isinstance(value, str) else repr(float(value)))
            out.writerow(cells)
    return len(data)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("arff")
    parser.add_argument("csv")
    args = parser.parse_args()
    n = export(args.arff, args.csv)
    print(f"wrote {n} rows to {args.csv}")
