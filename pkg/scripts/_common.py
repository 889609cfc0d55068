"""Small helpers shared by the experiment scripts."""

import csv
import sys


def write_rows(rows, path=None):
    """Write a list of dicts as CSV to ``path`` (stdout when None)."""
    if not rows:
        return
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if path:
            out.close()


def int_list(text):
    return [int(t) for t in text.split(",") if t]


def float_list(text):
    return [float(t) for t in text.split(",") if t]
