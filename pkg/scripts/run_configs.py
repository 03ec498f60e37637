"""Run every config in a directory and print one status line per config.

    python scripts/run_configs.py [configs] [--out out]
"""

import argparse
import json
from pathlib import Path

from qviscosity.cli import run_experiment
from qviscosity.config import ConfigError, load_config

STATUS = {0: "ok", 1: "failure", 2: "flagged"}


def headline(out: Path) -> str:
    path = out / "summary.json"
    if not path.exists():
        return ""
    s = json.loads(path.read_text())
    for key in ("limit_estimate", "limit", "image"):
        if key in s:
            return f"{key}={s[key]}"
    if "passed" in s:
        return f"passed={s['passed']}"
    return ""


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("directory", nargs="?", default=str(Path(__file__).resolve().parent.parent / "configs"))
    p.add_argument("--out", default="out")
    args = p.parse_args(argv)

    worst = 0
    for cfg_path in sorted(Path(args.directory).glob("*.yaml")):
        out = Path(args.out) / cfg_path.stem
        try:
            status = run_experiment(load_config(cfg_path), out)
        except ConfigError as exc:
            print(f"{cfg_path.stem:32s} invalid  {exc.errors[0]}")
            worst = 1
            continue
        worst = max(worst, status)
        print(f"{cfg_path.stem:32s} {STATUS[status]:8s} {headline(out)}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
