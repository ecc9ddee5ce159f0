"""Plan, compile, fly against mocks and report for one scenario file.

    python scripts/demo_end_to_end.py scenario.json -o demo_out [--faults faults.json]
"""

import argparse
import json
import sys
from pathlib import Path

from uavlight.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("-o", "--output", default="demo_out")
    ap.add_argument("--faults")
    ap.add_argument("--speedup", default="20")
    args = ap.parse_args()

    out = Path(args.output)
    plan = out / "plan.json"
    code = cli(["plan", args.scenario, "-o", str(out)])
    if code:
        return code
    n = len(json.loads(plan.read_text())["uavs"])
    sns = ",".join(f"MOCK{i:02d}" for i in range(n))
    fly = ["fly", str(out / "flight.txt"), "--mock", str(n), "--plan", str(plan),
           "--speedup", args.speedup, "-o", str(out / "flight.log")]
    if args.faults:
        fly += ["--faults", args.faults]
    for step in (["compile", str(plan), "--sn", sns, "-o", str(out / "flight.txt")], fly,
                 ["report", str(out / "flight.log"), str(plan), "-o", str(out / "report")]):
        code = cli(step)
        if code and step[0] != "fly":
            return code
    return code


if __name__ == "__main__":
    sys.exit(main())
