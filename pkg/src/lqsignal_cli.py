"""Console entry point.

Lives outside the package so the BLAS thread cap can be written to the
environment before numpy is imported; `--threads N` (or LQSIGNAL_THREADS)
otherwise has no effect on an already-initialized BLAS.
"""

import os
import sys


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    threads = os.environ.get("LQSIGNAL_THREADS")
    if "--threads" in argv:
        i = argv.index("--threads")
        if i + 1 >= len(argv):
            print("error: --threads requires a value", file=sys.stderr)
            return 1
        threads = argv[i + 1]
        del argv[i : i + 2]
    if threads is not None:
        if not threads.isdigit() or int(threads) < 1:
            print(f"error: invalid thread count {threads!r}", file=sys.stderr)
            return 1
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = threads

    from lqsignal.cli import run

    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
