#!/usr/bin/env python3
"""Run the acceptance gate and show the one-line-per-criterion report."""

import subprocess
import sys


def main() -> int:
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "tests/test_acceptance.py", "-v", "-s",
         "--no-header", "-rN"],
        cwd=None)
    return proc.returncode


if __name__ == "__main__":
    sys.exit(main())
