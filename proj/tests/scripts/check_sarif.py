#!/usr/bin/env python3
"""Cross-checks emitted SARIF with the jsonschema package, independent of the C++ validator.

usage: check_sarif.py <apaudit binary> <source dir>
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    apaudit, root = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    e2e = root / "tests" / "fixtures" / "e2e"
    schema = json.loads((root / "schemas" / "sarif-2.1.0-rtm.5.json").read_text())
    validator = jsonschema.Draft4Validator(schema, format_checker=jsonschema.FormatChecker())
    artifacts = sorted(str(p) for p in (e2e / "artifacts").iterdir())

    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp)
        scans = {
            "scan": ["--artifacts", *artifacts],
            "adversarial": ["--artifacts", str(e2e / "artifacts" / "LZD"),
                            "--cassettes", str(e2e / "adversarial" / "cassettes")],
        }
        for name, extra in scans.items():
            subprocess.run([str(apaudit), "scan", "--config", str(e2e / "apaudit.json"), "--repo", str(e2e / "corpus"),
                            "--out", str(out / name), *extra], check=True, stdout=subprocess.DEVNULL)
        subprocess.run([str(apaudit), "report", "--reports", str(out / "scan" / "reports.json"),
                        "--sarif", str(out / "report.sarif")], check=True, stdout=subprocess.DEVNULL)

        failed = 0
        for doc in [out / "scan" / "reports.sarif", out / "adversarial" / "reports.sarif", out / "report.sarif"]:
            errors = list(validator.iter_errors(json.loads(doc.read_text())))
            for e in errors[:5]:
                print(f"{doc.name}: {'/'.join(map(str, e.absolute_path))}: {e.message}")
            print(f"{doc.relative_to(out)}: {'ok' if not errors else f'{len(errors)} errors'}")
            failed += bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
