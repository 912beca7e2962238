"""Pre-build the acceptance-suite cache with parallel worker processes.

Each work unit trains one model configuration (or runs one evaluation) and
writes its results to the shared cache; units are independent and fully
seeded, so results do not depend on scheduling.  Workers run single-threaded
BLAS: at these matrix sizes one thread per worker is faster than sharing
threads across one process.

Usage:  python tools/warm_acceptance_cache.py [--jobs 2] [--only unit1,unit2]
"""

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

WORKER_SNIPPET = (
    "import sys; sys.path.insert(0, {tests!r}); "
    "from acceptance_lib import run_unit; run_unit({name!r})"
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--only", default=None, help="comma-separated unit names")
    args = parser.parse_args(argv)

    sys.path.insert(0, str(REPO / "tests"))
    from acceptance_lib import work_units

    names = list(work_units())
    if args.only:
        wanted = [n.strip() for n in args.only.split(",") if n.strip()]
        unknown = set(wanted) - set(names)
        if unknown:
            parser.error(f"unknown units: {sorted(unknown)} (have {names})")
        names = wanted

    env = dict(os.environ)
    env.update(OPENBLAS_NUM_THREADS="1", OMP_NUM_THREADS="1", MKL_NUM_THREADS="1")

    print(f"warming {len(names)} units with {args.jobs} workers: {names}", flush=True)
    pending = list(names)
    running = {}
    failures = []
    t0 = time.time()
    while pending or running:
        while pending and len(running) < args.jobs:
            name = pending.pop(0)
            code = WORKER_SNIPPET.format(tests=str(REPO / "tests"), name=name)
            running[name] = subprocess.Popen([sys.executable, "-c", code],
                                             cwd=REPO, env=env)
            print(f"[{time.time() - t0:7.0f}s] started {name}", flush=True)
        for name, proc in list(running.items()):
            if proc.poll() is not None:
                del running[name]
                status = "done" if proc.returncode == 0 else f"FAILED rc={proc.returncode}"
                print(f"[{time.time() - t0:7.0f}s] {name}: {status}", flush=True)
                if proc.returncode != 0:
                    failures.append(name)
        time.sleep(2)
    print(f"finished in {time.time() - t0:.0f}s; failures: {failures or 'none'}", flush=True)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
