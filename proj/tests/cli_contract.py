#    Copyright 2026 The rapidset Authors
#
#    Licensed under the Apache License, Version 2.0 (the "License");
#    you may not use this file except in compliance with the License.
#    You may obtain a copy of the License at
#
#        http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS,
#    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#    See the License for the specific language governing permissions and
#    limitations under the License.

"""Exit-code and schema contract for the rapidset command-line tool.

usage: cli_contract.py <rapidset binary> <schemas dir> <scratch dir>
"""

import filecmp
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource

BIN, SCHEMAS, SCRATCH = (pathlib.Path(a) for a in sys.argv[1:4])

schemas = {p.name: json.loads(p.read_text()) for p in SCHEMAS.glob("*.schema.json")}
registry = Registry().with_resources((name, Resource.from_contents(s)) for name, s in schemas.items())
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def validate(doc, schema, what):
    try:
        jsonschema.Draft202012Validator(schemas[schema], registry=registry).validate(doc)
        check(True, f"{what} matches {schema}")
    except jsonschema.ValidationError as e:
        check(False, f"{what} matches {schema}: {e.message} at {list(e.absolute_path)}")


def run(*args):
    p = subprocess.run([str(BIN), *map(str, args)], capture_output=True, text=True)
    return p.returncode, p.stdout


def write(name, doc):
    path = SCRATCH / name
    path.write_text(json.dumps(doc))
    return path


def load(path):
    return json.loads(pathlib.Path(path).read_text())


def validate_tree(out, summary_schema):
    validate(load(out / "config.json"), "config.schema.json", f"{out.name}/config.json")
    validate(load(out / "summary.json"), summary_schema, f"{out.name}/summary.json")
    for rec in sorted(out.glob("runs/*/record.json")):
        validate(load(rec), "record.schema.json", str(rec.relative_to(SCRATCH)))
    for fit in sorted(out.glob("runs/*/fit_stage*.json")):
        validate(load(fit), "fit.schema.json", str(fit.relative_to(SCRATCH)))


shutil.rmtree(SCRATCH, ignore_errors=True)
SCRATCH.mkdir(parents=True)

minimal = {"alpha": 0.5, "N": 64, "stages": 1, "ensemble": 5, "master_seed": 77, "probability_trials": 5000}
cfg = write("minimal.json", minimal)

code, out = run("spectrum", "--config", cfg, "--out", SCRATCH / "spectrum")
check(code == 0, "spectrum on minimal config exits 0")
validate(json.loads(out), "status.schema.json", "spectrum status line")
summary = load(SCRATCH / "spectrum" / "summary.json")
check(len(summary["runs"]) == 5, "summary holds 5 run records")
validate_tree(SCRATCH / "spectrum", "summary.schema.json")

code, _ = run("spectrum", "--config", cfg, "--out", SCRATCH / "spectrum_again")
cmp = filecmp.dircmp(SCRATCH / "spectrum", SCRATCH / "spectrum_again")


def identical(d):
    return not d.diff_files and not d.left_only and not d.right_only and all(identical(s) for s in d.subdirs.values())


def same_bytes(a, b):
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    return identical(filecmp.dircmp(a, b)) and all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


check(code == 0 and same_bytes(SCRATCH / "spectrum", SCRATCH / "spectrum_again"), "rerun is byte-identical")
code, _ = run("spectrum", "--config", cfg, "--jobs", 3, "--out", SCRATCH / "spectrum_jobs")
check(code == 0 and same_bytes(SCRATCH / "spectrum", SCRATCH / "spectrum_jobs"), "--jobs 3 is byte-identical to --jobs 1")

code, _ = run("spectrum", "--config", cfg, "--seed", 78, "--out", SCRATCH / "spectrum_seed")
seeded = load(SCRATCH / "spectrum_seed" / "config.json")
check(code == 0 and seeded["master_seed"] == 78, "--seed overrides master_seed")

code, out = run("construct", "--config", cfg, "--out", SCRATCH / "construct")
check(code == 0, "construct exits 0")
validate_tree(SCRATCH / "construct", "summary.schema.json")

code, out = run("simulate", "--config", cfg, "--out", SCRATCH / "simulate")
check(code == 0 and (SCRATCH / "simulate" / "paths" / "path_0004.csv").exists(), "simulate writes 5 paths")
validate(load(SCRATCH / "simulate" / "summary.json"), "simulate.schema.json", "simulate/summary.json")

code, out = run("report", "--out", SCRATCH / "spectrum")
check(code == 0, "report exits 0")
report = load(SCRATCH / "spectrum" / "report.json")
validate(report, "report.schema.json", "report.json")
check(report["aggregate"] == summary["aggregate"], "report aggregate equals summary aggregate")

bad = dict(minimal, beta_schedule=[0.6])
code, out = run("construct", "--config", write("bad_beta.json", bad), "--out", SCRATCH / "bad")
err = json.loads(out)
check(code == 2 and err["field"] == "beta_schedule", "beta >= alpha exits 2 naming beta_schedule")
validate(err, "error.schema.json", "invalid-config error")

code, out = run("construct", "--config", write("bad_gamma.json", dict(minimal, gamma=0.9)), "--out", SCRATCH / "bad")
check(code == 2 and json.loads(out)["field"] == "gamma", "gamma >= 1 - alpha^2 exits 2 naming gamma")

code, out = run("construct", "--config", write("unknown.json", dict(minimal, colour=1)), "--out", SCRATCH / "bad")
check(code == 2 and json.loads(out)["field"] == "colour", "unknown key exits 2")

(SCRATCH / "not_json.json").write_text("{ nope")
code, out = run("construct", "--config", SCRATCH / "not_json.json", "--out", SCRATCH / "bad")
check(code == 2, "malformed JSON exits 2")
validate(json.loads(out), "error.schema.json", "malformed-config error")

code, out = run("construct", "--bogus-flag")
check(code == 2, "unknown flag exits 2")

(SCRATCH / "blocker").write_text("x")
code, out = run("construct", "--config", cfg, "--out", SCRATCH / "blocker" / "sub")
check(code == 3, "output under a regular file exits 3")
validate(json.loads(out), "error.schema.json", "unwritable-output error")

doomed = {"alpha": 0.99, "N": 4, "stages": 3, "beta_schedule": [0.97, 0.98, 0.985], "ensemble": 2,
          "master_seed": 1, "probability_trials": 5000, "samples_per_interval": 2}
code, out = run("spectrum", "--config", write("doomed.json", doomed), "--out", SCRATCH / "doomed")
check(code == 4, "all chains dying exits 4")
partial = load(SCRATCH / "doomed" / "summary.json")
check(partial["aggregate"]["death_rate"] == 1.0 and len(partial["runs"]) == 2, "partial results written on exit 4")
validate_tree(SCRATCH / "doomed", "summary.schema.json")

grid = {"moment": {"p_points": 10, "t_points": 10}, "chernoff_mc": {"trials": 10000, "sets": 2},
        "binomial": {"n_min": 10, "n_max": 20,
                     "triples": [{"n": 100, "p": 0.5, "r": 50, "side": "upper"}]}}
code, out = run("verify", "--config", write("grid.json", grid), "--out", SCRATCH / "verify")
vreport = load(SCRATCH / "verify" / "verify.json")
check(code == 0 and vreport["holds_all"], "verify on small grid exits 0 with holds_all")
check(any(r["status"] == "skipped-precondition" for r in vreport["records"]), "invalid triple is skipped, not failed")
validate(vreport, "verify.schema.json", "verify.json")
validate(json.loads(out), "verify.schema.json", "verify stdout")

code, out = run("verify", "--config", write("empty_grid.json", {"gaussian": {"y_min": 3, "y_max": 1}}), "--out", SCRATCH / "v")
check(code == 2, "empty verification grid exits 2")
validate(json.loads(out), "error.schema.json", "empty-grid error")

print(f"{len(failures)} contract failure(s)")
sys.exit(1 if failures else 0)
