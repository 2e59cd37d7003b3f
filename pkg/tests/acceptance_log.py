"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def record(number, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {text}"
    LINES.append(line)
    print(line)
    return ok
