import sys
from pathlib import Path

# oracles.py sits next to the tests
sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        ok, text = mod.RESULTS[num]
        terminalreporter.write_line(f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}  {text}")
