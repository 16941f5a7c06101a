import acceptance_record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = acceptance_record.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in acceptance_record.CRITERIA:
        if n in results:
            ok, details = results[n]
            terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {details}")
        else:
            terminalreporter.write_line(f"criterion {n} NOT RUN")
