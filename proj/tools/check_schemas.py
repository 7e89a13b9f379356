#!/usr/bin/env python3
"""Run each CLI command on small inputs and validate the JSON it writes."""
import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def run(cli, *args):
    proc = subprocess.run([cli, *args], capture_output=True, text=True)
    if proc.returncode != 0:
        sys.exit(f"{' '.join(args)} exited {proc.returncode}: {proc.stderr}")


def check(schema_dir, name, path):
    schema = json.loads((schema_dir / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    doc = json.loads(path.read_text())
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=str)
    for e in errors:
        print(f"{path.name}: {'/'.join(map(str, e.path))}: {e.message}")
    return not errors


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schemas", required=True, type=pathlib.Path)
    ap.add_argument("--data", required=True, type=pathlib.Path)
    args = ap.parse_args()

    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp)
        tiny = str(args.data / "tiny.csv")
        run(args.cli, "fit", "--input", tiny, "-o", tmp)
        ok &= check(args.schemas, "fit", out / "fit.json")
        run(args.cli, "select", "--fit", str(out / "fit.json"), "-o", tmp)
        ok &= check(args.schemas, "selection", out / "selection.json")
        run(args.cli, "select", "--fit", str(out / "fit.json"), "-q", "0.001", "-o", tmp)
        ok &= check(args.schemas, "selection", out / "selection.json")
        run(args.cli, "simulate", "--design", "Example3", "--reps", "2", "-o", tmp)
        ok &= check(args.schemas, "summary", out / "summary.json")
    print("all outputs valid" if ok else "schema violations found")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
