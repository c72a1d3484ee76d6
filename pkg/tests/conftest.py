import pytest

_acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = marker.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _acceptance[num] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_acceptance):
        title, ok, detail = _acceptance[num]
        line = f"{'PASS' if ok else 'FAIL'}  {num:>2}. {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
    passed = sum(ok for _, ok, _ in _acceptance.values())
    terminalreporter.write_line(f"{passed}/{len(_acceptance)} criteria passed")
