"""Compare the compiled and pure-Python token kernels.

Two measurements per model size: the raw ``fire_all`` loop over every
reachable snapshot, and a full state-space exploration.

    python3 benchmarks/bench_kernel.py --n 6 8 --repeat 3
"""

import argparse
import time

from bpmncheck import kernel
from bpmncheck.benchgen import gen_parallel
from bpmncheck.explorer import explore
from bpmncheck.hot import generate_rules


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def workload(n):
    rs = generate_rules(gen_parallel(n))
    table = [(i, *r.compile_simple()) for i, r in enumerate(rs.rules) if r.is_simple]
    lts = explore(rs)
    tokens = [s.tokens for st in lts.states for _, s in st.walk() if s.tokens]
    return rs, table, tokens


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[6, 8])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    # python first so the speedup column is relative to the fallback
    backends = sorted(kernel.BACKENDS, reverse=True)
    if "cython" not in backends:
        print("compiled kernel not available; timing the pure-Python kernel only")
    print(f"{'n':>3} {'snapshots':>9} {'backend':>8} {'fire_all ms':>12} {'explore ms':>11} {'speedup':>8}")
    for n in args.n:
        rs, table, tokens = workload(n)
        base = None
        for name in backends:
            fire_all = kernel.get(name).fire_all

            def fire():
                for t in tokens:
                    fire_all(t, table)

            micro = best_of(args.repeat, fire)
            full = best_of(args.repeat, lambda: explore(rs, backend=name))
            base = base or micro
            print(
                f"{n:>3} {len(tokens):>9} {name:>8} {micro * 1e3:>12.1f} {full * 1e3:>11.1f} {base / micro:>7.2f}x"
            )
        if len(backends) == 2:
            py = kernel.get("python").fire_all
            cy = kernel.get("cython").fire_all
            assert all(py(t, table) == cy(t, table) for t in tokens), "backends disagree"


if __name__ == "__main__":
    main()
