import pytest

_ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 12


@pytest.fixture
def report(request):
    """Record one acceptance criterion: ``report(number, title, checks)``.

    ``checks`` is a list of ``(label, passed, detail)``; the criterion
    passes only if every check does.
    """
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _report(number: int, title: str, checks) -> bool:
        ok = all(c[1] for c in checks)
        store[number] = (title, ok, list(checks))
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, None)
    if not store:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        if number not in store:
            tr.write_line(f"criterion {number:2d}: NOT RUN")
            continue
        title, ok, checks = store[number]
        tr.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
        for label, passed, detail in checks:
            tr.write_line(f"      [{'ok' if passed else 'XX'}] {label}: {detail}")
