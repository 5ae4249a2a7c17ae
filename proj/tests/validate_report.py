# Copyright 2026 The mia-bench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Runs the quick configuration and validates report.json against the shipped schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main() -> int:
    bench, source = Path(sys.argv[1]), Path(sys.argv[2])
    schema = json.loads((source / "schemas" / "report.schema.json").read_text())
    with tempfile.TemporaryDirectory() as out:
        subprocess.run([str(bench), "run", "--config", str(source / "configs" / "quick.json"),
                        "--seed", "1,2", "--format", "json", "--out", out],
                       check=True, stdout=subprocess.DEVNULL)
        report = json.loads((Path(out) / "report.json").read_text())
    jsonschema.validate(report, schema)
    print(f"report.json with {len(report['rows'])} rows validates")
    return 0


if __name__ == "__main__":
    sys.exit(main())
