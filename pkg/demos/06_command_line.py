"""
Command line tour
=================

Write a model file, then run a few commands. Reports are canonical JSON,
so two runs with the same inputs give identical bytes.
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

model = {
    "states": ["0", "1", "2"],
    "target": ["0"],
    "rates": [["1", "0", 0.5], ["1", "2", 1.0], ["2", "0", 0.5], ["2", "1", 2.0]],
}


def fptexp(*args):
    res = subprocess.run([sys.executable, "-m", "fptexp", *args], capture_output=True, text=True)
    return res.returncode, res.stdout, res.stderr


with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.json"
    path.write_text(json.dumps(model))

    code, out, _ = fptexp("check-exp", "--model", str(path), "--mu", "uniform",
                          "--grid", "0.05:5:32geom", "--tol", "1e-9")
    res = json.loads(out)["result"]
    print(f"check-exp -> exit {code}, {res['verdict']}, alpha {res['alpha']}")

    code, out, _ = fptexp("qsd", "--model", str(path))
    print("qsd ->", json.loads(out)["result"]["qsd"])

    code, out, _ = fptexp("emergence", "--q21", "1", "--q31", "2", "--q23", "0.5", "--q32", "0.5")
    print("emergence ->", json.loads(out)["result"])

    runs = []
    for k in range(2):
        report = Path(tmp) / f"sim{k}.json"
        fptexp("simulate", "--model", str(path), "--mu", "point:1", "--n", "1000",
               "--seed", "7", "--scheme", "two-clock", "--out", str(report))
        runs.append(report.with_suffix(".csv").read_bytes())
    print("simulate twice, identical CSV:", runs[0] == runs[1])

    code, _, err = fptexp("check-exp", "--model", str(path), "--mu", "point:9")
    print(f"bad label -> exit {code}: {err.strip()}")

print(fptexp("--version")[1])
