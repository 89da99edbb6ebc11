"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

RESULTS: dict = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    RESULTS[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({title}): {detail}"
    print(RESULTS[number])
    return passed
