"""Shared bits for the experiment scripts: argument parsing and CSV output."""

import argparse
import json
from pathlib import Path

from onebit_radar.cli import write_csv


def parser(doc: str, trials: int | None = None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the default seed")
    if trials is not None:
        p.add_argument("--trials", type=int, default=trials)
    return p


def save(out: Path, name: str, rows: list[dict], summary: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{name}.csv", rows)
    if summary is not None:
        (out / f"{name}.json").write_text(json.dumps(summary, indent=2, default=float))
    print(f"wrote {out / name}.csv")
