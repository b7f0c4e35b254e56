#!/usr/bin/env python3
"""Reference ACOPF optima of the bundled cases from PYPOWER's interior-point solver.

The frozen objectives in the tests come from this script:

    python3 tools/reference_optima.py            # all bundled cases
    python3 tools/reference_optima.py case9.m    # selected cases
"""

import argparse
import pathlib
import re
import sys

import numpy as np
from pypower.api import ppoption, runopf

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"
CASES = ["case9.m", "case30.m", "case57.m", "case118.m", "case300.m"]


def read_matpower(path):
    text = path.read_text()
    text = re.sub(r"%.*", "", text)
    ppc = {"version": "2"}
    ppc["baseMVA"] = float(re.search(r"mpc\.baseMVA\s*=\s*([-\d.eE+]+)", text).group(1))
    for name in ("bus", "gen", "branch", "gencost"):
        body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S).group(1)
        rows = [r.split() for r in body.replace(";", "\n").splitlines() if r.strip()]
        width = max(len(r) for r in rows)
        ppc[name] = np.array([[float(v) for v in r] + [0.0] * (width - len(r)) for r in rows])
    # rateA = 0 means unlimited. PYPOWER's own copies of these cases use 9900 MVA
    # instead, and its solver fails under NumPy 2 when no line is limited.
    rate_a = ppc["branch"][:, 5]
    rate_a[rate_a == 0] = 9900.0
    return ppc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("cases", nargs="*", default=CASES)
    args = ap.parse_args()
    opt = ppoption(VERBOSE=0, OUT_ALL=0)
    ok = True
    for name in args.cases:
        res = runopf(read_matpower(DATA / name), opt)
        ok = ok and bool(res["success"])
        print(f"{name:10s} success={bool(res['success'])} objective={res['f']:.4f}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
