#!/usr/bin/env python3
"""Write the scikit-learn 8x8 digits set as a headered CSV (p0..p63,label)."""
import argparse
import csv

from sklearn.datasets import load_digits


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    args = ap.parse_args()
    digits = load_digits()
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"p{k}" for k in range(digits.data.shape[1])] + ["label"])
        for row, label in zip(digits.data, digits.target):
            w.writerow([f"{v:g}" for v in row] + [int(label)])


if __name__ == "__main__":
    main()
