"""The backend comparison script runs, gates on parity, and reports."""

import pathlib
import subprocess
import sys

import pytest

BENCH = pathlib.Path(__file__).resolve().parent.parent / "bench" / "bench_kernels.py"


@pytest.mark.benchmark
def test_bench_script_runs_and_reports():
    proc = subprocess.run(
        [sys.executable, str(BENCH), "--size", "2000", "--repeats", "1"],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    out = proc.stdout
    assert "newton_solve" in out
    assert "greedy_counts" in out
    assert "escape_counts" in out
    assert "speedup" in out
