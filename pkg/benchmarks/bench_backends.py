"""Time the same workload with the gmpy2 and the pure-Python rational backend.

Each backend runs in its own interpreter because the choice is made at import
time (``PBLIMP_PURE_PYTHON=1`` forces :mod:`fractions`).

    python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import pblimp
from pathlib import Path
from pblimp import Q, load_program, parse_predicate
from pblimp.belief import initial_belief
from pblimp.corpus import difftest
from pblimp.operational import exec_alt
from pblimp.syntax import loops_of
from pblimp.wp import check_invariant, wp_eval

prog = load_program(Path(PROGRAM).read_text())
sig = prog.signature
post = parse_predicate("Pr(d = 1)", sig)
inv = parse_predicate(Path(INVARIANT).read_text(), sig)
params = {"q": Q(1, 10)}
b0 = initial_belief(sig)
(loop,) = loops_of(prog.body)

def timed(fn):
    best = None
    for _ in range(REPEAT):
        start = time.perf_counter()
        fn()
        t = time.perf_counter() - start
        best = t if best is None else min(best, t)
    return best

out = {"backend": pblimp.BACKEND}
out["difftest_100"] = timed(lambda: difftest(0, 100))
out["exec_alt_fuel_12"] = timed(lambda: exec_alt(prog.body, b0, 12, params, sig))
out["wp_eval_n_20"] = timed(lambda: wp_eval(prog.body, post, b0, sig, params, unroll=20))
out["check_invariant"] = timed(lambda: check_invariant(loop, post, inv, sig))
print(json.dumps(out))
"""


def run(pure: bool, repeat: int) -> dict:
    here = os.path.dirname(os.path.abspath(__file__))
    programs = os.path.join(os.path.dirname(here), "programs")
    env = dict(os.environ)
    env.pop("PBLIMP_PURE_PYTHON", None)
    if pure:
        env["PBLIMP_PURE_PYTHON"] = "1"
    code = (
        f"PROGRAM = {os.path.join(programs, 'treat.pbl')!r}\n"
        f"INVARIANT = {os.path.join(programs, 'treat_inv.pred')!r}\n"
        f"REPEAT = {repeat}\n" + WORKLOAD
    )
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    pure = run(True, args.repeat)
    tasks = [k for k in fast if k != "backend"]
    print(f"{'task':<20}{fast['backend']:>12}{pure['backend']:>12}{'ratio':>8}")
    for k in tasks:
        print(f"{k:<20}{fast[k]:>11.3f}s{pure[k]:>11.3f}s{pure[k] / fast[k]:>8.2f}")


if __name__ == "__main__":
    main()
