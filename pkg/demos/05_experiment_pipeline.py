"""
The experiment pipeline
=======================

A JSON configuration drives calibration, grid building and the comparison
against a fine reference integration. The same steps are available as
``python -m thg calibrate | build-grid | sample | compare``; this demo runs
them through the command line entry point in a temporary directory.
"""
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp(prefix="thg-demo-"))
config = {
    "schedule": {"kind": "flow"},
    "model": {"preset": "two-mode", "mode": "velocity", "dim": 8},
    "solver": "euler",
    "N": 50, "omega": 3.5, "rho": 1.1, "boost": 1.1, "i_hi": 38,
    "evaluation": {"seeds": 10},
}
(work / "config.json").write_text(json.dumps(config, indent=2))
env = dict(os.environ, THG_OUTPUT_DIR=str(work / "out"))


def thg(*args):
    done = subprocess.run([sys.executable, "-m", "thg", *args], env=env, cwd=work,
                          capture_output=True, text=True)
    print(f"$ thg {' '.join(args)}  -> exit {done.returncode}")
    print(done.stdout + done.stderr)


thg("calibrate", "--config", "config.json")
thg("build-grid", "--profile", "out/profile.csv", "--rho", "1.1", "--p", "1", "--out", "grid.json")
thg("sample", "--config", "config.json", "--grid", "out/grid.json", "--method", "thg", "--out", "thg.csv")
thg("compare", "--config", "config.json", "--grid", "out/grid.json", "--out", "report.csv")
print((work / "out" / "report.csv").read_text().splitlines()[-2:])
thg("build-grid", "--profile", "out/profile.csv")  # usage error, exit 1
