"""
Display utility for command-line output and formatting
"""

import sys
from typing import List, Sequence, TextIO


class Display:
    """Handles all console output of the command-line driver"""

    def __init__(self, stream: TextIO = None, width: int = 80):
        self.stream = stream or sys.stdout
        self.width = width

    def _print(self, text: str = ""):
        print(text, file=self.stream)

    def show_title(self, title: str):
        """Display a framed title line"""
        self._print('=' * self.width)
        self._print(f"{title:^{self.width}}")
        self._print('=' * self.width)

    def show_message(self, message: str):
        self._print(message)

    def format_table(self, headers: Sequence[str], rows: Sequence[Sequence[object]]) -> List[str]:
        """Format rows as left-aligned text columns"""
        cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
        lines = []
        for index, row in enumerate(cells):
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
            if index == 0:
                lines.append("  ".join('-' * w for w in widths))
        return lines

    def show_table(self, headers: Sequence[str], rows: Sequence[Sequence[object]]):
        for line in self.format_table(headers, rows):
            self._print(line)

    def show_error(self, message: str):
        print(f"Error: {message}", file=sys.stderr)

    def show_success(self, message: str):
        self._print(f"OK: {message}")

    def show_warning(self, message: str):
        print(f"Warning: {message}", file=sys.stderr)

    def show_separator(self):
        self._print('-' * self.width)
