"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

RESULTS: dict = {}


def report(num: int, ok: bool, detail: str) -> bool:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line, flush=True)
    return ok
