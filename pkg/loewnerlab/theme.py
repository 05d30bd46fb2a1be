"""Theme and shared console for the loewnerlab CLI."""

from rich.console import Console
from rich.table import Table
from rich.theme import Theme

LAB_THEME = Theme(
    {
        # Outcomes
        "success": "green",
        "error": "bold red",
        "warning": "#d4a017",
        "info": "cyan",
        "pass": "bold green",
        "fail": "bold red",
        # UI elements
        "header": "bold #a0a0a0",
        "muted": "#808080",
        "highlight": "bold cyan",
        "value": "orange1",
        "stderr": "#a0a0a0",
    }
)

console = Console(theme=LAB_THEME)
err_console = Console(theme=LAB_THEME, stderr=True)

# Vertical line prefix for indented content under section headers
RULE = "[muted]│[/muted]"


def verdict(passed: bool) -> str:
    """Styled PASS/FAIL marker."""
    return "[pass]✓ pass[/pass]" if passed else "[fail]✗ fail[/fail]"


def report_table(title: str, rows: list[tuple[str, str, str]]) -> Table:
    """Three-column table of (term, value, stderr) rows."""
    table = Table(title=title, title_style="header", show_edge=False, pad_edge=False)
    table.add_column("term", style="highlight")
    table.add_column("value", style="value", justify="right")
    table.add_column("stderr", style="stderr", justify="right")
    for name, value, err in rows:
        table.add_row(name, value, err)
    return table
