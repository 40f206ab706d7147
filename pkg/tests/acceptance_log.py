"""Collects one verdict line per acceptance criterion for the end-of-run summary."""

RESULTS = []


def record(number, title, passed, detail):
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
    RESULTS.append((number, line))
    print(line)
    return passed
