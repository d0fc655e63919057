import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from test_acceptance import OUTCOMES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(OUTCOMES):
        terminalreporter.write_line(OUTCOMES[n])
