"""Collects one line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, passed: bool, text: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}: {text}"
    LINES.append(line)
    print(line)
    return line
