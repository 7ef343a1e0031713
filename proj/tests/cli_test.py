"""End-to-end checks of the maforge command line.

usage: cli_test.py <maforge binary> <source dir>
"""

import filecmp
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

BIN = Path(sys.argv[1])
SRC = Path(sys.argv[2])
failures = []


def run(*args, cwd=None):
    return subprocess.run([str(BIN), *map(str, args)], capture_output=True, text=True, cwd=cwd)


def expect(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    expect(run("run", "--m", "4").returncode == 2, "even m is a config error (exit 2)")
    bad = tmp / "bad.ini"
    bad.write_text("colour = blue\n")
    expect(run("run", "-c", bad).returncode == 2, "unknown config key (exit 2)")
    expect(run("run", "--bogus-flag").returncode == 2, "unknown flag (exit 2)")
    expect(run("run", "--max-sweeps", "1", "--m", "17", "-o", tmp / "stall").returncode == 3,
           "sweep limit reached (exit 3)")

    small = tmp / "small.ini"
    small.write_text("preset = tetrahedron\nn = 3\nm = 21\nsweep = gauss-seidel\n")
    r = run("run", "-c", small, "--m", "17", "-o", tmp / "tet")
    expect(r.returncode == 1, "coarse tetrahedron run fails verification (exit 1)")
    cfg = (tmp / "tet" / "config.ini").read_text()
    expect("m = 17" in cfg, "flags override the config file")
    header = (tmp / "tet" / "fields.csv").read_text().splitlines()[0]
    expect(header == "x1,x2,x3,u_star,u,psi,contact,stratum", "CSV header")
    vtk = (tmp / "tet" / "fields.vtk").read_text().splitlines()
    expect(vtk[0] == "# vtk DataFile Version 3.0" and vtk[3] == "DATASET STRUCTURED_POINTS",
           "VTK preamble")
    expect("DIMENSIONS 17 17 17" in vtk and "POINT_DATA 4913" in vtk, "VTK dimensions")

    schema = json.loads((SRC / "schemas" / "report.schema.json").read_text())
    report = json.loads((tmp / "tet" / "report.json").read_text())
    try:
        jsonschema.validate(report, schema)
        expect(True, "report.json validates against the schema")
    except jsonschema.ValidationError as e:
        expect(False, "report.json validates against the schema: " + e.message)
    names = [c["name"] for c in report["checks"]]
    expect(len(names) == len(set(names)), "each check appears once")
    manifest = json.loads((tmp / "tet" / "manifest.json").read_text())
    expect(manifest["report"] == report, "manifest embeds the report")

    r = run("export", tmp / "tet" / "fields.csv", "-o", tmp / "again.vtk")
    expect(r.returncode == 0, "export exits 0")
    again = (tmp / "again.vtk").read_text().splitlines()
    expect(again[4:] == vtk[4:], "export reproduces the VTK arrays")

    for k in (1, 2):
        run("run", "-c", small, "--sweep", "jacobi", "-o", tmp / f"jac{k}")
    expect(filecmp.cmp(tmp / "jac1" / "fields.csv", tmp / "jac2" / "fields.csv", shallow=False),
           "jacobi runs write identical CSV")

    r = run("barrier-check", "--samples", "20", "-o", tmp / "barrier.csv")
    rows = (tmp / "barrier.csv").read_text().splitlines()
    expect(r.returncode == 0 and len(rows) == 1 + 5 * 20, "barrier-check CSV rows")
    expect(rows[0].startswith("model,"), "barrier-check CSV header")

    r = run("legendre-test", "--samples", "500")
    expect(r.returncode == 0 and "all checks passed" in r.stdout, "legendre-test passes")

    r = run("run", "--mode", "y-graph", "--n", "2", "--m", "9")
    expect(r.returncode == 2, "y-graph without segments (exit 2)")

if failures:
    print(f"{len(failures)} failure(s)")
    sys.exit(1)
